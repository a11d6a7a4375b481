// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "fusebox/geometry.hpp"

namespace fusebox {

/// Exact 3D k-d tree over a fixed point set. No approximation anywhere:
/// queries order candidates by (squared distance, point index), so equal
/// distances resolve to the lowest index and results match a brute-force
/// scan bit for bit.
class KdTree3 {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  struct Neighbor {
    double dist2 = 0.0;
    std::size_t index = npos;
  };

  KdTree3() = default;
  explicit KdTree3(std::span<const geom::Point3> points);

  std::size_t size() const { return points_.size(); }

  /// Index of the nearest point to `q` (ties: lowest index); npos when empty.
  std::size_t nearest(const geom::Point3& q) const;

  /// The k nearest points to `q`, sorted ascending by (dist2, index).
  /// `exclude` removes one index from consideration (pass npos to keep all).
  /// Returns fewer than k neighbors when the tree is too small.
  std::vector<Neighbor> knn(const geom::Point3& q, std::size_t k,
                            std::size_t exclude = npos) const;

 private:
  struct Node {
    std::size_t point = npos;  // index into points_
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi);
  void search(int node, const geom::Point3& q, std::size_t k,
              std::size_t exclude, std::vector<Neighbor>& heap) const;

  std::vector<geom::Point3> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace fusebox
