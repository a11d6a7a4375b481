// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "fusebox/filtering.hpp"
#include "fusebox/fusion.hpp"
#include "fusebox/geometry.hpp"

namespace fusebox::boxfit {

/// Per-class minimum and typical object footprint, meters.
struct ClassSize {
  double min_length = 0.0;
  double min_width = 0.0;
  double min_height = 0.0;
  double prior_length = 0.0;
  double prior_width = 0.0;
  double prior_height = 0.0;
};

/// Size priors keyed by class id. The built-in defaults cover the standard
/// table (1=vehicle, 2=pedestrian, 3=cyclist); a prior file overrides them
/// with text lines "class_id min_l min_w min_h prior_l prior_w prior_h".
class SizePriorTable {
 public:
  static SizePriorTable defaults();
  static SizePriorTable load(const std::filesystem::path& path);

  /// Throws ConfigError for unknown class ids.
  const ClassSize& at(int class_id) const;
  void set(int class_id, const ClassSize& size);

 private:
  std::map<int, ClassSize> sizes_;
};

struct FitResult {
  geom::BevBox box;
  bool degenerate = false;  // <3 points or collinear: box is a centroid stub
};

/// Search-based rectangle fit: headings 0..89 degrees in 1-degree steps,
/// scored by the closeness criterion (sum of inverse distances to the nearer
/// rectangle edge). Returns the minimal enclosing rotated rectangle at the
/// best heading, canonicalized to length >= width. Degenerate inputs (fewer
/// than 3 points or collinear) return a zero-size axis-aligned box at the
/// centroid with `degenerate` set; the caller substitutes the class minimum.
FitResult fit_bev_rectangle(std::span<const geom::Point3> points);

/// Grows implausibly small boxes to the class prior, one deficient dimension
/// at a time, keeping yaw and holding the box edge nearest the sensor in
/// place so growth extends away from the sensor.
geom::BevBox apply_size_prior(const geom::BevBox& box, int class_id,
                              const SizePriorTable& priors,
                              const geom::Point3& sensor_origin = {0.0, 0.0,
                                                                   0.0});

/// Lifts a BEV box to 3D: top at the highest point, bottom at the lowest,
/// lowered to (top - min_height) when the extent is under the class minimum.
geom::Box3D lift_to_3d(const geom::BevBox& box,
                       std::span<const geom::Point3> points, int class_id,
                       const SizePriorTable& priors);

struct BoxGenParams {
  filter::FilterParams filter;
  bool enable_local_filter = true;
  bool enable_global_filter = true;
  bool keep_unanchored = false;  // keep instances that have no real points
  geom::Point3 sensor_origin{0.0, 0.0, 0.0};
};

/// Per-frame bookkeeping emitted alongside the boxes.
struct BoxGenStats {
  std::size_t instances = 0;
  std::size_t unanchored = 0;
  std::size_t points_after_local = 0;
  std::size_t points_after_global = 0;
  std::size_t fallback_boxes = 0;
};

/// Full per-instance pipeline: local filter, global filter, BEV fit, size
/// prior, 3D lift. Fit-derived boxes score 1.0; degenerate fallbacks score
/// 0.5 and take the class minimum footprint at the centroid.
std::vector<geom::Box3D> generate_initial_boxes(
    std::span<const fusion::InstanceCloud> clouds, const BoxGenParams& params,
    const SizePriorTable& priors, BoxGenStats* stats = nullptr);

}  // namespace fusebox::boxfit
