// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusebox/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace fusebox::fusion {

namespace {

// Angle between a camera's principal axis and the ray from the camera to p.
double ray_axis_angle(const geom::CameraModel& cam, const geom::Point3& p) {
  const geom::Point3 ray = p - cam.position();
  const double n = geom::norm(ray);
  if (n == 0.0) return 0.0;
  const double c = geom::dot(cam.axis(2), ray) / n;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace

LabelResult label_real_points(const io::Frame& frame) {
  const std::int64_t n = static_cast<std::int64_t>(frame.points.size());
  // one slot per point; class_id < 0 marks background
  std::vector<LabeledPoint> slots(frame.points.size());
  std::vector<char> labeled(frame.points.size(), 0);

#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const geom::Point3 p = frame.points[static_cast<std::size_t>(i)].position();
    double best_angle = 0.0;
    bool found = false;
    LabeledPoint best;
    for (const io::CameraView& view : frame.cameras) {
      const auto px = geom::project_to_image(p, view.model);
      if (!px) continue;
      const int ix = static_cast<int>(std::floor(px->u));
      const int iy = static_cast<int>(std::floor(px->v));
      const std::uint16_t id = view.mask.at(ix, iy);
      if (id == 0) continue;
      const double angle = ray_axis_angle(view.model, p);
      if (!found || angle < best_angle) {
        found = true;
        best_angle = angle;
        best.position = p;
        best.class_id = view.mask.class_table.at(id);
        best.key = InstanceKey{view.model.name, id};
        best.origin = PointOrigin::kReal;
      }
    }
    if (found) {
      slots[static_cast<std::size_t>(i)] = std::move(best);
      labeled[static_cast<std::size_t>(i)] = 1;
    }
  }

  LabelResult result;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (labeled[i])
      result.foreground.push_back(std::move(slots[i]));
    else
      ++result.background_count;
  }
  return result;
}

ScaleMap align_depth_scale(const io::Frame& frame) {
  constexpr std::size_t kMinAnchors = 5;
  // anchor ratios per instance, gathered in point order for determinism
  std::map<InstanceKey, std::vector<double>> ratios;
  for (const io::RawPoint& rp : frame.points) {
    const geom::Point3 p = rp.position();
    for (const io::CameraView& view : frame.cameras) {
      const auto px = geom::project_to_image(p, view.model);
      if (!px) continue;
      const int ix = static_cast<int>(std::floor(px->u));
      const int iy = static_cast<int>(std::floor(px->v));
      const std::uint16_t id = view.mask.at(ix, iy);
      if (id == 0 || !view.depth.valid(ix, iy)) continue;
      ratios[InstanceKey{view.model.name, id}].push_back(
          px->depth / static_cast<double>(view.depth.at(ix, iy)));
    }
  }

  ScaleMap scales;
  for (auto& [key, r] : ratios) {
    if (r.size() < kMinAnchors) {
      scales[key] = 1.0;
      continue;
    }
    std::sort(r.begin(), r.end());
    const std::size_t mid = r.size() / 2;
    scales[key] =
        r.size() % 2 == 1 ? r[mid] : 0.5 * (r[mid - 1] + r[mid]);
  }
  return scales;
}

std::vector<LabeledPoint> generate_pseudo_points(const io::Frame& frame,
                                                 std::size_t max_per_instance,
                                                 const ScaleMap* scales) {
  std::vector<LabeledPoint> out;
  for (const io::CameraView& view : frame.cameras) {
    // gather pixel indices per instance in row-major order
    std::map<std::uint16_t, std::vector<std::size_t>> pixels;
    const std::size_t total =
        static_cast<std::size_t>(view.mask.width) * view.mask.height;
    for (std::size_t i = 0; i < total; ++i) {
      const std::uint16_t id = view.mask.values[i];
      if (id == 0) continue;
      const int x = static_cast<int>(i % view.mask.width);
      const int y = static_cast<int>(i / view.mask.width);
      if (!view.depth.valid(x, y)) continue;
      pixels[id].push_back(i);
    }

    for (const auto& [id, idx] : pixels) {
      double scale = 1.0;
      if (scales) {
        const auto it = scales->find(InstanceKey{view.model.name, id});
        if (it != scales->end()) scale = it->second;
      }
      // uniform stride subsample when the instance exceeds the cap
      std::size_t stride = 1;
      if (max_per_instance > 0 && idx.size() > max_per_instance)
        stride = (idx.size() + max_per_instance - 1) / max_per_instance;
      std::vector<std::size_t> chosen;
      chosen.reserve(idx.size() / stride + 1);
      for (std::size_t i = 0; i < idx.size(); i += stride)
        chosen.push_back(idx[i]);

      const std::size_t base = out.size();
      out.resize(base + chosen.size());
      const int class_id = view.mask.class_table.at(id);
      const std::int64_t m = static_cast<std::int64_t>(chosen.size());
#pragma omp parallel for schedule(static)
      for (std::int64_t j = 0; j < m; ++j) {
        const std::size_t pix = chosen[static_cast<std::size_t>(j)];
        const int x = static_cast<int>(pix % view.mask.width);
        const int y = static_cast<int>(pix / view.mask.width);
        const double depth = scale * static_cast<double>(view.depth.at(x, y));
        LabeledPoint& lp = out[base + static_cast<std::size_t>(j)];
        lp.position =
            geom::backproject(x + 0.5, y + 0.5, depth, view.model);
        lp.class_id = class_id;
        lp.key = InstanceKey{view.model.name, id};
        lp.origin = PointOrigin::kPseudo;
      }
    }
  }
  return out;
}

std::vector<InstanceCloud> group_by_instance(
    std::span<const LabeledPoint> real, std::span<const LabeledPoint> pseudo) {
  std::map<InstanceKey, InstanceCloud> clouds;
  auto slot = [&clouds](const LabeledPoint& p) -> InstanceCloud& {
    auto [it, inserted] = clouds.try_emplace(p.key);
    if (inserted) {
      it->second.key = p.key;
      it->second.class_id = p.class_id;
    }
    return it->second;
  };
  for (const LabeledPoint& p : real) slot(p).real.push_back(p);
  for (const LabeledPoint& p : pseudo) slot(p).pseudo.push_back(p);

  std::vector<InstanceCloud> out;
  out.reserve(clouds.size());
  for (auto& [key, cloud] : clouds) out.push_back(std::move(cloud));
  return out;  // std::map iteration is already (camera, id) order
}

}  // namespace fusebox::fusion
