// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fusebox/evaluation.hpp"
#include "fusebox/frame_io.hpp"
#include "fusebox/geometry.hpp"

namespace fusebox::ref {

// Serial brute-force counterparts of the parallel kernels. Tests pin the
// production implementations against these; the benchmark target measures
// the gap. Everything here is O(n^2)-ish on purpose and stays independent
// of the k-d tree and OpenMP paths.

/// Nearest point by exhaustive scan; ties resolve to the lowest index.
std::size_t nearest_index_bruteforce(std::span<const geom::Point3> points,
                                     const geom::Point3& query);

/// Local radius filter, O(|real| * |pseudo|): keep pseudo[j] iff its distance
/// to the nearest real point is at most lambda times that anchor's distance
/// to the origin.
std::vector<std::size_t> local_radius_keep_bruteforce(
    std::span<const geom::Point3> real, std::span<const geom::Point3> pseudo,
    double lambda, const geom::Point3& origin = {0.0, 0.0, 0.0});

/// Statistical outlier removal with an all-pairs distance table.
std::vector<std::size_t> statistical_keep_bruteforce(
    std::span<const geom::Point3> points, int k_neighbors, double alpha);

/// Monte-Carlo volume IoU: uniform samples in the joint bounding box.
double iou3d_monte_carlo(const geom::Box3D& a, const geom::Box3D& b,
                         std::size_t samples, std::uint64_t seed);

/// Monte-Carlo BEV IoU.
double bev_iou_monte_carlo(const geom::BevBox& a, const geom::BevBox& b,
                           std::size_t samples, std::uint64_t seed);

/// The merge rule written as the plain double loop (no IoU matrix): added
/// new boxes first, then reserved old boxes in old order.
std::vector<geom::Box3D> merge_boxes_bruteforce(
    std::span<const geom::Box3D> old_boxes,
    std::span<const geom::Box3D> new_boxes, double v);

/// Dense-set construction by per-box crops and a set union.
std::vector<geom::Point3> densify_bruteforce(
    std::span<const geom::Point3> real, std::span<const geom::Point3> pool,
    std::span<const geom::Box3D> boxes);

/// Population variance, the long way.
double population_variance_bruteforce(std::span<const double> values);

struct ApSlice {
  double ap = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// One-(class, range-bin) AP recomputed from scratch at every rank: greedy
/// score-ordered matching, then the all-point interpolated area with an
/// explicit max scan per recall point.
ApSlice ap_bruteforce(std::span<const io::BoxRecord> preds,
                      std::span<const io::BoxRecord> truths, double iou_thresh,
                      int class_id, double range_lo, double range_hi,
                      eval::IouKind kind);

/// Serial single-threaded rectangle fit (same search, no OpenMP) for the
/// benchmark comparison.
geom::BevBox fit_bev_rectangle_serial(std::span<const geom::Point3> points);

}  // namespace fusebox::ref
