// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusebox/filtering.hpp"

#include <cmath>
#include <cstdint>

#include "fusebox/errors.hpp"
#include "fusebox/kdtree.hpp"

namespace fusebox::filter {

void FilterParams::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("filter: lambda must be > 0");
  if (k_neighbors < 1) throw ConfigError("filter: k_neighbors must be >= 1");
  if (!(alpha >= 0.0)) throw ConfigError("filter: alpha must be >= 0");
}

std::vector<std::size_t> local_radius_keep_indices(
    std::span<const geom::Point3> real, std::span<const geom::Point3> pseudo,
    double lambda, const geom::Point3& origin) {
  std::vector<std::size_t> kept;
  if (real.empty() || pseudo.empty()) return kept;

  const KdTree3 tree(real);
  std::vector<char> keep(pseudo.size(), 0);
  const std::int64_t n = static_cast<std::int64_t>(pseudo.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < n; ++j) {
    const geom::Point3& v = pseudo[static_cast<std::size_t>(j)];
    const std::size_t anchor = tree.nearest(v);
    const double d_anchor = std::sqrt(geom::dist2(v, real[anchor]));
    const double range = std::sqrt(geom::dist2(real[anchor], origin));
    if (d_anchor <= lambda * range) keep[static_cast<std::size_t>(j)] = 1;
  }
  for (std::size_t j = 0; j < pseudo.size(); ++j)
    if (keep[j]) kept.push_back(j);
  return kept;
}

std::vector<std::size_t> statistical_keep_indices(
    std::span<const geom::Point3> points, int k_neighbors, double alpha) {
  std::vector<std::size_t> kept;
  const std::size_t n = points.size();
  if (n == 0) return kept;
  if (n <= static_cast<std::size_t>(k_neighbors)) {
    kept.resize(n);
    for (std::size_t i = 0; i < n; ++i) kept[i] = i;
    return kept;
  }

  const KdTree3 tree(points);
  std::vector<double> mean_dist(n, 0.0);
  const std::int64_t ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < ni; ++i) {
    const auto neighbors =
        tree.knn(points[static_cast<std::size_t>(i)],
                 static_cast<std::size_t>(k_neighbors),
                 static_cast<std::size_t>(i));
    double acc = 0.0;  // summed in (distance, index) order
    for (const auto& nb : neighbors) acc += std::sqrt(nb.dist2);
    mean_dist[static_cast<std::size_t>(i)] =
        acc / static_cast<double>(k_neighbors);
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

LocalFilterResult local_radius_filter(const fusion::InstanceCloud& cloud,
                                      const FilterParams& params,
                                      const geom::Point3& origin) {
  LocalFilterResult result;
  if (cloud.real.empty()) {
    result.anchored = false;
    result.fused = cloud.pseudo;
    return result;
  }

  std::vector<geom::Point3> real(cloud.real.size());
  for (std::size_t i = 0; i < real.size(); ++i)
    real[i] = cloud.real[i].position;
  std::vector<geom::Point3> pseudo(cloud.pseudo.size());
  for (std::size_t i = 0; i < pseudo.size(); ++i)
    pseudo[i] = cloud.pseudo[i].position;

  const auto kept =
      local_radius_keep_indices(real, pseudo, params.lambda, origin);
  result.fused = cloud.real;
  result.fused.reserve(cloud.real.size() + kept.size());
  for (std::size_t j : kept) result.fused.push_back(cloud.pseudo[j]);
  return result;
}

std::vector<fusion::LabeledPoint> global_statistical_filter(
    std::span<const fusion::LabeledPoint> fused, const FilterParams& params) {
  std::vector<geom::Point3> pts(fused.size());
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = fused[i].position;
  const auto kept =
      statistical_keep_indices(pts, params.k_neighbors, params.alpha);
  std::vector<fusion::LabeledPoint> out;
  out.reserve(kept.size());
  for (std::size_t i : kept) out.push_back(fused[i]);
  return out;
}

}  // namespace fusebox::filter
