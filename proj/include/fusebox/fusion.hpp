// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fusebox/frame_io.hpp"
#include "fusebox/geometry.hpp"

namespace fusebox::fusion {

/// Identifies one object instance: mask ids are only unique per camera, so
/// the camera name is part of the key.
struct InstanceKey {
  std::string camera;
  std::uint16_t id = 0;

  auto operator<=>(const InstanceKey&) const = default;
};

enum class PointOrigin { kReal, kPseudo };

/// A 3D point carrying the class/instance labels it picked up from an
/// instance mask, plus whether it is a LiDAR return or a back-projected
/// pixel.
struct LabeledPoint {
  geom::Point3 position;
  int class_id = 0;
  InstanceKey key;
  PointOrigin origin = PointOrigin::kReal;
};

/// Per-object bundle of real points R and pseudo points V.
struct InstanceCloud {
  InstanceKey key;
  int class_id = 0;
  std::vector<LabeledPoint> real;    // R
  std::vector<LabeledPoint> pseudo;  // V
};

struct LabelResult {
  std::vector<LabeledPoint> foreground;
  std::size_t background_count = 0;  // visible in no camera or on background
};

/// Projects every LiDAR point into every camera and labels the ones that
/// land on a nonzero mask pixel. A point visible in several cameras takes
/// the label from the camera whose principal axis makes the smallest angle
/// with the ray to the point, and contributes exactly once.
LabelResult label_real_points(const io::Frame& frame);

using ScaleMap = std::map<InstanceKey, double>;

/// Per-instance depth-map scale correction: the median over anchor pixels of
/// (LiDAR planar depth / depth-map value). Instances with fewer than 5
/// anchors keep scale 1. For metric depth inputs all scales come out ~1.
ScaleMap align_depth_scale(const io::Frame& frame);

/// Back-projects every nonzero-mask pixel with valid depth into a pseudo
/// point carrying the pixel's class and instance labels. Instances with more
/// than max_per_instance pixels keep a uniform stride subsample (row-major
/// pixel order). `scales` applies align_depth_scale factors before
/// back-projection; pass nullptr for identity.
std::vector<LabeledPoint> generate_pseudo_points(const io::Frame& frame,
                                                 std::size_t max_per_instance,
                                                 const ScaleMap* scales = nullptr);

/// Partitions real and pseudo points into per-instance clouds, ordered by
/// (camera name, instance id).
std::vector<InstanceCloud> group_by_instance(
    std::span<const LabeledPoint> real, std::span<const LabeledPoint> pseudo);

}  // namespace fusebox::fusion
