// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusebox/boxfit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fusebox/errors.hpp"

namespace fusebox::boxfit {

namespace {

constexpr int kHeadingSteps = 90;  // 1-degree resolution over [0, 90)
// softening constant of the inverse-distance weight: keeps one noisy point
// from dominating the heading score while leaving clean data discriminative
constexpr double kClosenessSoftening = 0.05;  // meters
constexpr double kCollinearAreaEps = 1e-9;    // m^2

struct Projection {
  double min1, max1, min2, max2;
};

double closeness_score(std::span<const geom::Point3> pts, double c, double s,
                       Projection* proj) {
  double min1 = std::numeric_limits<double>::infinity();
  double max1 = -min1;
  double min2 = min1;
  double max2 = max1;
  for (const auto& p : pts) {
    const double c1 = c * p.x + s * p.y;
    const double c2 = -s * p.x + c * p.y;
    min1 = std::min(min1, c1);
    max1 = std::max(max1, c1);
    min2 = std::min(min2, c2);
    max2 = std::max(max2, c2);
  }
  double q = 0.0;
  for (const auto& p : pts) {
    const double c1 = c * p.x + s * p.y;
    const double c2 = -s * p.x + c * p.y;
    const double d1 = std::min(max1 - c1, c1 - min1);
    const double d2 = std::min(max2 - c2, c2 - min2);
    q += 1.0 / (std::min(d1, d2) + kClosenessSoftening);
  }
  if (proj) *proj = {min1, max1, min2, max2};
  return q;
}

bool collinear(std::span<const geom::Point3> pts) {
  // max triangle area against the first edge direction
  const auto& a = pts[0];
  for (std::size_t i = 1; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double cross = (pts[i].x - a.x) * (pts[j].y - a.y) -
                           (pts[i].y - a.y) * (pts[j].x - a.x);
      if (std::abs(cross) * 0.5 > kCollinearAreaEps) return false;
    }
  }
  return true;
}

geom::Point3 bev_centroid(std::span<const geom::Point3> pts) {
  geom::Point3 c{0.0, 0.0, 0.0};
  for (const auto& p : pts) {
    c.x += p.x;
    c.y += p.y;
  }
  const double n = static_cast<double>(pts.size());
  return {c.x / n, c.y / n, 0.0};
}

}  // namespace

SizePriorTable SizePriorTable::defaults() {
  SizePriorTable t;
  t.set(1, ClassSize{3.0, 1.4, 1.0, 4.6, 1.9, 1.7});  // vehicle
  t.set(2, ClassSize{0.4, 0.4, 1.2, 0.7, 0.7, 1.7});  // pedestrian
  t.set(3, ClassSize{1.2, 0.4, 1.0, 1.8, 0.6, 1.6});  // cyclist
  return t;
}

SizePriorTable SizePriorTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open file");
  SizePriorTable t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int class_id = 0;
    ClassSize s;
    if (!(ls >> class_id >> s.min_length >> s.min_width >> s.min_height >>
          s.prior_length >> s.prior_width >> s.prior_height)) {
      std::ostringstream os;
      os << path.string() << ":" << line_no
         << ": expected \"class_id min_l min_w min_h prior_l prior_w prior_h\"";
      throw IoError(os.str());
    }
    t.set(class_id, s);
  }
  return t;
}

void SizePriorTable::set(int class_id, const ClassSize& size) {
  if (!(size.min_length > 0.0 && size.min_width > 0.0 && size.min_height > 0.0))
    throw ConfigError("size prior: minimum dimensions must be positive");
  if (size.prior_length < size.min_length ||
      size.prior_width < size.min_width ||
      size.prior_height < size.min_height)
    throw ConfigError("size prior: prior dimensions must be >= minimums");
  sizes_[class_id] = size;
}

const ClassSize& SizePriorTable::at(int class_id) const {
  const auto it = sizes_.find(class_id);
  if (it == sizes_.end()) {
    std::ostringstream os;
    os << "size prior: unknown class id " << class_id;
    throw ConfigError(os.str());
  }
  return it->second;
}

FitResult fit_bev_rectangle(std::span<const geom::Point3> points) {
  FitResult result;
  if (points.size() < 3 || collinear(points)) {
    const auto c = bev_centroid(points.empty()
                                    ? std::span<const geom::Point3>()
                                    : points);
    result.box = geom::BevBox{points.empty() ? 0.0 : c.x,
                              points.empty() ? 0.0 : c.y, 0.0, 0.0, 0.0};
    result.degenerate = true;
    return result;
  }

  std::array<double, kHeadingSteps> scores;
#pragma omp parallel for schedule(static)
  for (int step = 0; step < kHeadingSteps; ++step) {
    const double theta = step * std::numbers::pi / 180.0;
    scores[static_cast<std::size_t>(step)] =
        closeness_score(points, std::cos(theta), std::sin(theta), nullptr);
  }
  int best = 0;
  for (int step = 1; step < kHeadingSteps; ++step)
    if (scores[static_cast<std::size_t>(step)] >
        scores[static_cast<std::size_t>(best)])
      best = step;

  const double theta = best * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Projection proj{};
  closeness_score(points, c, s, &proj);

  const double mid1 = 0.5 * (proj.min1 + proj.max1);
  const double mid2 = 0.5 * (proj.min2 + proj.max2);
  result.box = geom::make_canonical_bev(
      c * mid1 - s * mid2, s * mid1 + c * mid2, proj.max1 - proj.min1,
      proj.max2 - proj.min2, theta);
  return result;
}

geom::BevBox apply_size_prior(const geom::BevBox& box, int class_id,
                              const SizePriorTable& priors,
                              const geom::Point3& sensor_origin) {
  const ClassSize& size = priors.at(class_id);
  const bool grow_length = box.length < size.min_length;
  const bool grow_width = box.width < size.min_width;
  if (!grow_length && !grow_width) return box;

  geom::BevBox out = box;
  out.length = grow_length ? size.prior_length : box.length;
  out.width = grow_width ? size.prior_width : box.width;

  // The box edge nearest the sensor (by segment distance, so thin fits pick
  // their visible long face rather than a short end edge) is the visible
  // face; its midpoint stays put. The dimension normal to it grows away from
  // the sensor, the dimension along it grows symmetrically.
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double axes[2][2] = {{c, s}, {-s, c}};  // heading u, lateral w
  const double half[2] = {box.length * 0.5, box.width * 0.5};

  // sensor in box-local coordinates
  const double rel_x = sensor_origin.x - box.cx;
  const double rel_y = sensor_origin.y - box.cy;
  const double sensor_u = c * rel_x + s * rel_y;
  const double sensor_w = -s * rel_x + c * rel_y;

  int near_axis = 0;
  double near_sign = 1.0;
  double near_d2 = std::numeric_limits<double>::infinity();
  double near_tangent = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 2; ++axis) {
    for (double sign : {1.0, -1.0}) {
      // edge normal to `axis` at sign*half[axis], spanning the other axis
      const int other = 1 - axis;
      const double normal_gap =
          (axis == 0 ? sensor_u : sensor_w) - sign * half[axis];
      const double along = axis == 0 ? sensor_w : sensor_u;
      const double tangent_gap =
          std::max(0.0, std::abs(along) - half[other]);
      const double d2 = normal_gap * normal_gap + tangent_gap * tangent_gap;
      // corner views tie two adjacent edges on segment distance; the edge
      // the sensor actually faces is the one with less tangential overshoot
      if (d2 < near_d2 || (d2 == near_d2 && tangent_gap < near_tangent)) {
        near_d2 = d2;
        near_tangent = tangent_gap;
        near_axis = axis;
        near_sign = sign;
      }
    }
  }

  const double new_half =
      near_axis == 0 ? out.length * 0.5 : out.width * 0.5;
  const double anchor_x =
      box.cx + near_sign * axes[near_axis][0] * half[near_axis];
  const double anchor_y =
      box.cy + near_sign * axes[near_axis][1] * half[near_axis];
  out.cx = anchor_x - near_sign * axes[near_axis][0] * new_half;
  out.cy = anchor_y - near_sign * axes[near_axis][1] * new_half;
  return out;
}

geom::Box3D lift_to_3d(const geom::BevBox& box,
                       std::span<const geom::Point3> points, int class_id,
                       const SizePriorTable& priors) {
  const ClassSize& size = priors.at(class_id);
  double z_top = -std::numeric_limits<double>::infinity();
  double z_bottom = std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    z_top = std::max(z_top, p.z);
    z_bottom = std::min(z_bottom, p.z);
  }
  if (z_top - z_bottom < size.min_height) z_bottom = z_top - size.min_height;

  geom::Box3D out;
  out.center = {box.cx, box.cy, 0.5 * (z_top + z_bottom)};
  out.length = box.length;
  out.width = box.width;
  out.height = z_top - z_bottom;
  out.yaw = box.yaw;
  out.class_id = class_id;
  return out;
}

std::vector<geom::Box3D> generate_initial_boxes(
    std::span<const fusion::InstanceCloud> clouds, const BoxGenParams& params,
    const SizePriorTable& priors, BoxGenStats* stats) {
  BoxGenStats local_stats;
  std::vector<geom::Box3D> boxes;

  for (const fusion::InstanceCloud& cloud : clouds) {
    ++local_stats.instances;

    std::vector<fusion::LabeledPoint> fused;
    if (params.enable_local_filter) {
      auto lf = filter::local_radius_filter(cloud, params.filter,
                                            params.sensor_origin);
      if (!lf.anchored) {
        ++local_stats.unanchored;
        if (!params.keep_unanchored) continue;
      }
      fused = std::move(lf.fused);
    } else {
      if (cloud.real.empty()) {
        ++local_stats.unanchored;
        if (!params.keep_unanchored) continue;
      }
      fused = cloud.real;
      fused.insert(fused.end(), cloud.pseudo.begin(), cloud.pseudo.end());
    }
    local_stats.points_after_local += fused.size();
    if (fused.empty()) continue;

    std::vector<fusion::LabeledPoint> cleaned =
        params.enable_global_filter
            ? filter::global_statistical_filter(fused, params.filter)
            : std::move(fused);
    local_stats.points_after_global += cleaned.size();
    if (cleaned.empty()) continue;

    std::vector<geom::Point3> pts(cleaned.size());
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = cleaned[i].position;

    const FitResult fit = fit_bev_rectangle(pts);
    geom::BevBox bev;
    double score = 1.0;
    if (fit.degenerate) {
      const ClassSize& size = priors.at(cloud.class_id);
      bev = geom::BevBox{fit.box.cx, fit.box.cy, size.min_length,
                         size.min_width, 0.0};
      score = 0.5;
      ++local_stats.fallback_boxes;
    } else {
      bev = apply_size_prior(fit.box, cloud.class_id, priors,
                             params.sensor_origin);
    }

    geom::Box3D box = lift_to_3d(bev, pts, cloud.class_id, priors);
    box.score = score;
    box.instance_id = cloud.key.camera + ":" + std::to_string(cloud.key.id);
    boxes.push_back(std::move(box));
  }

  if (stats) *stats = local_stats;
  return boxes;
}

}  // namespace fusebox::boxfit
