// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusebox/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "fusebox/rng.hpp"

namespace fusebox::ref {

namespace {

bool point_in_obb(double x, double y, double z, const geom::Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double dx = x - box.center.x;
  const double dy = y - box.center.y;
  const double dz = z - box.center.z;
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= box.length / 2.0 && std::abs(ly) <= box.width / 2.0 &&
         std::abs(dz) <= box.height / 2.0;
}

bool point_in_rect(double x, double y, const geom::BevBox& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double dx = x - box.cx;
  const double dy = y - box.cy;
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= box.length / 2.0 && std::abs(ly) <= box.width / 2.0;
}

}  // namespace

std::size_t nearest_index_bruteforce(std::span<const geom::Point3> points,
                                     const geom::Point3& query) {
  std::size_t best = 0;
  double best_d2 = geom::dist2(query, points[0]);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double d2 = geom::dist2(query, points[i]);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

std::vector<std::size_t> local_radius_keep_bruteforce(
    std::span<const geom::Point3> real, std::span<const geom::Point3> pseudo,
    double lambda, const geom::Point3& origin) {
  std::vector<std::size_t> kept;
  if (real.empty()) return kept;
  for (std::size_t j = 0; j < pseudo.size(); ++j) {
    const std::size_t anchor = nearest_index_bruteforce(real, pseudo[j]);
    const double d = std::sqrt(geom::dist2(pseudo[j], real[anchor]));
    const double range = std::sqrt(geom::dist2(real[anchor], origin));
    if (d <= lambda * range) kept.push_back(j);
  }
  return kept;
}

std::vector<std::size_t> statistical_keep_bruteforce(
    std::span<const geom::Point3> points, int k_neighbors, double alpha) {
  const std::size_t n = points.size();
  std::vector<std::size_t> kept;
  if (n == 0) return kept;
  if (n <= static_cast<std::size_t>(k_neighbors)) {
    for (std::size_t i = 0; i < n; ++i) kept.push_back(i);
    return kept;
  }

  std::vector<double> mean_dist(n, 0.0);
  std::vector<std::pair<double, std::size_t>> all(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      all[c++] = {geom::dist2(points[i], points[j]), j};
    }
    std::sort(all.begin(), all.end());
    double acc = 0.0;
    for (int k = 0; k < k_neighbors; ++k)
      acc += std::sqrt(all[static_cast<std::size_t>(k)].first);
    mean_dist[i] = acc / static_cast<double>(k_neighbors);
  }

  double mu = 0.0;
  for (double d : mean_dist) mu += d;
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (double d : mean_dist) var += (d - mu) * (d - mu);
  var /= static_cast<double>(n);
  const double threshold = mu + alpha * std::sqrt(var);
  for (std::size_t i = 0; i < n; ++i)
    if (mean_dist[i] <= threshold) kept.push_back(i);
  return kept;
}

double iou3d_monte_carlo(const geom::Box3D& a, const geom::Box3D& b,
                         std::size_t samples, std::uint64_t seed) {
  double min_x = std::numeric_limits<double>::infinity();
  double max_x = -min_x;
  double min_y = min_x;
  double max_y = max_x;
  for (const geom::Box3D* box : {&a, &b}) {
    for (const auto& corner : box->bev().corners()) {
      min_x = std::min(min_x, corner[0]);
      max_x = std::max(max_x, corner[0]);
      min_y = std::min(min_y, corner[1]);
      max_y = std::max(max_y, corner[1]);
    }
  }
  const double min_z = std::min(a.z_bottom(), b.z_bottom());
  const double max_z = std::max(a.z_top(), b.z_top());

  Rng rng(seed);
  std::size_t in_a = 0;
  std::size_t in_b = 0;
  std::size_t in_both = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double x = rng.uniform(min_x, max_x);
    const double y = rng.uniform(min_y, max_y);
    const double z = rng.uniform(min_z, max_z);
    const bool pa = point_in_obb(x, y, z, a);
    const bool pb = point_in_obb(x, y, z, b);
    in_a += pa;
    in_b += pb;
    in_both += pa && pb;
  }
  const std::size_t in_union = in_a + in_b - in_both;
  if (in_union == 0) return 0.0;
  return static_cast<double>(in_both) / static_cast<double>(in_union);
}

double bev_iou_monte_carlo(const geom::BevBox& a, const geom::BevBox& b,
                           std::size_t samples, std::uint64_t seed) {
  double min_x = std::numeric_limits<double>::infinity();
  double max_x = -min_x;
  double min_y = min_x;
  double max_y = max_x;
  for (const geom::BevBox* box : {&a, &b}) {
    for (const auto& corner : box->corners()) {
      min_x = std::min(min_x, corner[0]);
      max_x = std::max(max_x, corner[0]);
      min_y = std::min(min_y, corner[1]);
      max_y = std::max(max_y, corner[1]);
    }
  }
  Rng rng(seed);
  std::size_t in_a = 0;
  std::size_t in_b = 0;
  std::size_t in_both = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double x = rng.uniform(min_x, max_x);
    const double y = rng.uniform(min_y, max_y);
    const bool pa = point_in_rect(x, y, a);
    const bool pb = point_in_rect(x, y, b);
    in_a += pa;
    in_b += pb;
    in_both += pa && pb;
  }
  const std::size_t in_union = in_a + in_b - in_both;
  if (in_union == 0) return 0.0;
  return static_cast<double>(in_both) / static_cast<double>(in_union);
}

std::vector<geom::Box3D> merge_boxes_bruteforce(
    std::span<const geom::Box3D> old_boxes,
    std::span<const geom::Box3D> new_boxes, double v) {
  std::vector<geom::Box3D> result;
  std::set<std::size_t> reserved;
  for (const geom::Box3D& nb : new_boxes) {
    double best = 0.0;
    std::size_t best_j = 0;
    bool have_best = false;
    for (std::size_t j = 0; j < old_boxes.size(); ++j) {
      double iou = 0.0;
      if (old_boxes[j].class_id == nb.class_id)
        iou = geom::iou3d(nb, old_boxes[j]);
      if (!have_best || iou > best) {
        best = iou;
        best_j = j;
        have_best = true;
      }
    }
    if (!have_best || best < v)
      result.push_back(nb);
    else
      reserved.insert(best_j);
  }
  for (std::size_t j : reserved) result.push_back(old_boxes[j]);
  return result;
}

std::vector<geom::Point3> densify_bruteforce(
    std::span<const geom::Point3> real, std::span<const geom::Point3> pool,
    std::span<const geom::Box3D> boxes) {
  std::vector<geom::Point3> dense(real.begin(), real.end());
  std::set<std::size_t> cropped;
  for (const geom::Box3D& box : boxes) {
    for (std::size_t idx : geom::points_in_box(pool, box)) cropped.insert(idx);
  }
  for (std::size_t idx : cropped) dense.push_back(pool[idx]);
  return dense;
}

double population_variance_bruteforce(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return var / static_cast<double>(values.size());
}

ApSlice ap_bruteforce(std::span<const io::BoxRecord> preds,
                      std::span<const io::BoxRecord> truths, double iou_thresh,
                      int class_id, double range_lo, double range_hi,
                      eval::IouKind kind) {
  auto in_slice = [&](const geom::Box3D& box) {
    if (box.class_id != class_id) return false;
    const double r = std::sqrt(box.center.x * box.center.x +
                               box.center.y * box.center.y);
    return r >= range_lo && r < range_hi;
  };
  auto iou_of = [kind](const geom::Box3D& p, const geom::Box3D& t) {
    return kind == eval::IouKind::kBev ? geom::bev_iou(p.bev(), t.bev())
                                       : geom::iou3d(p, t);
  };

  std::vector<std::size_t> pred_idx;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (in_slice(preds[i].box)) pred_idx.push_back(i);
  std::vector<std::size_t> truth_idx;
  for (std::size_t i = 0; i < truths.size(); ++i)
    if (in_slice(truths[i].box)) truth_idx.push_back(i);
  std::stable_sort(pred_idx.begin(), pred_idx.end(),
                   [&preds](std::size_t x, std::size_t y) {
                     return preds[x].box.score > preds[y].box.score;
                   });

  // greedy matching, highest score first
  std::vector<char> used(truth_idx.size(), 0);
  std::vector<char> is_tp(pred_idx.size(), 0);
  for (std::size_t r = 0; r < pred_idx.size(); ++r) {
    const auto& pred = preds[pred_idx[r]];
    double best = 0.0;
    std::size_t best_t = truth_idx.size();
    for (std::size_t t = 0; t < truth_idx.size(); ++t) {
      if (used[t]) continue;
      if (truths[truth_idx[t]].frame_id != pred.frame_id) continue;
      const double iou = iou_of(pred.box, truths[truth_idx[t]].box);
      if (iou > best) {
        best = iou;
        best_t = t;
      }
    }
    if (best >= iou_thresh && best > 0.0 && best_t < truth_idx.size()) {
      used[best_t] = 1;
      is_tp[r] = 1;
    }
  }

  ApSlice slice;
  const std::size_t npos_total = truth_idx.size();
  for (std::size_t r = 0; r < pred_idx.size(); ++r) {
    if (is_tp[r])
      ++slice.tp;
    else
      ++slice.fp;
  }
  slice.fn = npos_total - slice.tp;
  if (npos_total == 0 || pred_idx.empty()) {
    slice.ap = 0.0;
    return slice;
  }

  // precision/recall recomputed from scratch at every rank
  std::vector<double> recall(pred_idx.size());
  std::vector<double> precision(pred_idx.size());
  for (std::size_t r = 0; r < pred_idx.size(); ++r) {
    std::size_t tp = 0;
    for (std::size_t k = 0; k <= r; ++k) tp += is_tp[k] ? 1u : 0u;
    recall[r] = static_cast<double>(tp) / static_cast<double>(npos_total);
    precision[r] = static_cast<double>(tp) / static_cast<double>(r + 1);
  }
  double ap = 0.0;
  double prev = 0.0;
  for (std::size_t r = 0; r < pred_idx.size(); ++r) {
    double envelope = 0.0;  // max precision at recall >= recall[r]
    for (std::size_t k = r; k < pred_idx.size(); ++k)
      envelope = std::max(envelope, precision[k]);
    ap += (recall[r] - prev) * envelope;
    prev = recall[r];
  }
  slice.ap = ap;
  return slice;
}

geom::BevBox fit_bev_rectangle_serial(std::span<const geom::Point3> points) {
  double best_score = -1.0;
  int best_step = 0;
  for (int step = 0; step < 90; ++step) {
    const double theta = step * std::numbers::pi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    double min1 = std::numeric_limits<double>::infinity();
    double max1 = -min1;
    double min2 = min1;
    double max2 = max1;
    for (const auto& p : points) {
      const double c1 = c * p.x + s * p.y;
      const double c2 = -s * p.x + c * p.y;
      min1 = std::min(min1, c1);
      max1 = std::max(max1, c1);
      min2 = std::min(min2, c2);
      max2 = std::max(max2, c2);
    }
    double q = 0.0;
    for (const auto& p : points) {
      const double c1 = c * p.x + s * p.y;
      const double c2 = -s * p.x + c * p.y;
      const double d1 = std::min(max1 - c1, c1 - min1);
      const double d2 = std::min(max2 - c2, c2 - min2);
      q += 1.0 / (std::min(d1, d2) + 0.05);
    }
    if (q > best_score) {
      best_score = q;
      best_step = step;
    }
  }
  const double theta = best_step * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  double min1 = std::numeric_limits<double>::infinity();
  double max1 = -min1;
  double min2 = min1;
  double max2 = max1;
  for (const auto& p : points) {
    const double c1 = c * p.x + s * p.y;
    const double c2 = -s * p.x + c * p.y;
    min1 = std::min(min1, c1);
    max1 = std::max(max1, c1);
    min2 = std::min(min2, c2);
    max2 = std::max(max2, c2);
  }
  const double mid1 = 0.5 * (min1 + max1);
  const double mid2 = 0.5 * (min2 + max2);
  return geom::make_canonical_bev(c * mid1 - s * mid2, s * mid1 + c * mid2,
                                  max1 - min1, max2 - min2, theta);
}

}  // namespace fusebox::ref
