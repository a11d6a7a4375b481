// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusebox/kdtree.hpp"

#include <algorithm>
#include <cmath>

namespace fusebox {

namespace {

double coord(const geom::Point3& p, int axis) {
  return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
}

// max-heap order: the worst neighbor (largest dist2, then largest index)
// sits at the front.
bool heap_less(const KdTree3::Neighbor& a, const KdTree3::Neighbor& b) {
  if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
  return a.index < b.index;
}

}  // namespace

KdTree3::KdTree3(std::span<const geom::Point3> points)
    : points_(points.begin(), points.end()) {
  if (points_.empty()) return;
  std::vector<std::size_t> idx(points_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  nodes_.reserve(points_.size());
  root_ = build(idx, 0, idx.size());
}

int KdTree3::build(std::vector<std::size_t>& idx, std::size_t lo,
                   std::size_t hi) {
  if (lo >= hi) return -1;
  // split along the widest extent of this subset
  geom::Point3 mn = points_[idx[lo]];
  geom::Point3 mx = mn;
  for (std::size_t i = lo; i < hi; ++i) {
    const auto& p = points_[idx[i]];
    mn = {std::min(mn.x, p.x), std::min(mn.y, p.y), std::min(mn.z, p.z)};
    mx = {std::max(mx.x, p.x), std::max(mx.y, p.y), std::max(mx.z, p.z)};
  }
  int axis = 0;
  double extent = mx.x - mn.x;
  if (mx.y - mn.y > extent) {
    axis = 1;
    extent = mx.y - mn.y;
  }
  if (mx.z - mn.z > extent) axis = 2;

  const std::size_t mid = lo + (hi - lo) / 2;
  std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                   [&](std::size_t a, std::size_t b) {
                     const double ca = coord(points_[a], axis);
                     const double cb = coord(points_[b], axis);
                     if (ca != cb) return ca < cb;
                     return a < b;
                   });

  const int node_id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{idx[mid], axis, -1, -1});
  const int left = build(idx, lo, mid);
  const int right = build(idx, mid + 1, hi);
  nodes_[node_id].left = left;
  nodes_[node_id].right = right;
  return node_id;
}

void KdTree3::search(int node, const geom::Point3& q, std::size_t k,
                     std::size_t exclude, std::vector<Neighbor>& heap) const {
  if (node < 0) return;
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  const geom::Point3& p = points_[n.point];

  if (n.point != exclude) {
    const Neighbor cand{geom::dist2(q, p), n.point};
    if (heap.size() < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), heap_less);
    } else if (heap_less(cand, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), heap_less);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), heap_less);
    }
  }

  const double diff = coord(q, n.axis) - coord(p, n.axis);
  const int near = diff <= 0.0 ? n.left : n.right;
  const int far = diff <= 0.0 ? n.right : n.left;
  search(near, q, k, exclude, heap);
  // descend the far side on exact ties too: an equally distant point with a
  // lower index must still win
  if (heap.size() < k || diff * diff <= heap.front().dist2)
    search(far, q, k, exclude, heap);
}

std::size_t KdTree3::nearest(const geom::Point3& q) const {
  const auto n = knn(q, 1);
  return n.empty() ? npos : n.front().index;
}

std::vector<KdTree3::Neighbor> KdTree3::knn(const geom::Point3& q,
                                            std::size_t k,
                                            std::size_t exclude) const {
  std::vector<Neighbor> heap;
  if (root_ < 0 || k == 0) return heap;
  heap.reserve(k + 1);
  search(root_, q, k, exclude, heap);
  std::sort(heap.begin(), heap.end(), heap_less);
  return heap;
}

}  // namespace fusebox
