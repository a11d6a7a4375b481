// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "fusebox/fusion.hpp"
#include "fusebox/geometry.hpp"

namespace fusebox::filter {

struct FilterParams {
  double lambda = 0.01;  // radius factor: threshold = lambda * anchor range
  int k_neighbors = 16;  // neighborhood size of the statistical filter
  double alpha = 1.0;    // keep points with mean distance <= mu + alpha*sigma

  void validate() const;  // throws ConfigError when out of range
};

/// Depth-aware local radius filter. A pseudo point survives when its
/// distance to the nearest real point of the same instance is at most
/// lambda times that anchor's distance to the sensor origin; the radius
/// therefore grows with range. Returns indices into `pseudo` of the
/// survivors, in ascending order.
std::vector<std::size_t> local_radius_keep_indices(
    std::span<const geom::Point3> real, std::span<const geom::Point3> pseudo,
    double lambda, const geom::Point3& origin = {0.0, 0.0, 0.0});

/// Global statistical outlier removal: for each point, the mean distance to
/// its k nearest neighbors; points whose mean exceeds mu + alpha*sigma of
/// that distribution are dropped. Sets with at most k points pass through
/// unchanged. Returns surviving indices in ascending order.
std::vector<std::size_t> statistical_keep_indices(
    std::span<const geom::Point3> points, int k_neighbors, double alpha);

struct LocalFilterResult {
  std::vector<fusion::LabeledPoint> fused;  // F = kept pseudo points + all of R
  bool anchored = true;  // false when R was empty (Eq. 1 has no anchor)
};

/// Labeled-point wrapper over local_radius_keep_indices. The fused set lists
/// R first, then the surviving pseudo points, both in input order. When R is
/// empty the instance is unanchored: fused = V unfiltered and anchored =
/// false, so the caller can drop or keep it by policy.
LocalFilterResult local_radius_filter(const fusion::InstanceCloud& cloud,
                                      const FilterParams& params,
                                      const geom::Point3& origin = {0.0, 0.0,
                                                                    0.0});

/// Labeled-point wrapper over statistical_keep_indices.
std::vector<fusion::LabeledPoint> global_statistical_filter(
    std::span<const fusion::LabeledPoint> fused, const FilterParams& params);

}  // namespace fusebox::filter
