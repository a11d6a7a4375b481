// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusebox/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fusebox/boxfit.hpp"
#include "fusebox/errors.hpp"
#include "fusebox/rng.hpp"

namespace fusebox::synth {

namespace {

using nlohmann::json;

constexpr std::size_t kMaxObjectsPerFrame = 64;  // per-pixel hit bitmask width

struct SceneObject {
  geom::Box3D box;
  std::uint16_t instance_id = 0;
};

geom::CameraModel make_camera(const std::string& name, double heading,
                              int width, int height, double cam_z) {
  geom::CameraModel cam;
  cam.name = name;
  cam.width = width;
  cam.height = height;
  const double f = width / 2.0;
  cam.intrinsics = {f, 0.0, width / 2.0, 0.0, f, height / 2.0, 0.0, 0.0, 1.0};
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  // camera x = image right, y = image down, z = principal axis
  cam.ego_from_camera = {s, 0.0, c, 0.0,
                         -c, 0.0, s, 0.0,
                         0.0, -1.0, 0.0, cam_z,
                         0.0, 0.0, 0.0, 1.0};
  return cam;
}

// Ray/box intersection parametrized by camera planar depth d: the ray point
// is origin + dir * d with dir_cam.z == 1, so a hit value is directly the
// depth-map sample.
bool intersect_box(const geom::Point3& origin, const geom::Point3& dir,
                   const geom::Box3D& box, double* depth) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const geom::Point3 rel = origin - box.center;
  const double ox = c * rel.x + s * rel.y;
  const double oy = -s * rel.x + c * rel.y;
  const double oz = rel.z;
  const double dx = c * dir.x + s * dir.y;
  const double dy = -s * dir.x + c * dir.y;
  const double dz = dir.z;

  double t0 = 1e-6;  // only hits in front of the camera
  double t1 = std::numeric_limits<double>::infinity();
  const double half[3] = {box.length / 2.0, box.width / 2.0, box.height / 2.0};
  const double o[3] = {ox, oy, oz};
  const double d[3] = {dx, dy, dz};
  for (int axis = 0; axis < 3; ++axis) {
    if (d[axis] == 0.0) {
      if (std::abs(o[axis]) > half[axis]) return false;
      continue;
    }
    double lo = (-half[axis] - o[axis]) / d[axis];
    double hi = (half[axis] - o[axis]) / d[axis];
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
    if (t0 > t1) return false;
  }
  *depth = t0;
  return true;
}

// Deterministic per-frame stream ids.
std::uint64_t stream_seed(std::uint64_t seed, int frame, int purpose) {
  return seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(frame) * 1000003ULL +
         static_cast<std::uint64_t>(purpose);
}

std::vector<SceneObject> place_objects(const SceneSpec& spec,
                                       const boxfit::SizePriorTable& priors,
                                       Rng& rng) {
  std::vector<SceneObject> objects;
  std::uint16_t next_id = 1;

  auto add_box = [&objects, &next_id](geom::Box3D box) {
    box.instance_id = std::to_string(next_id);
    box.score = 1.0;
    objects.push_back(SceneObject{std::move(box), next_id});
    ++next_id;
  };

  if (!spec.placements.empty()) {
    for (const Placement& pl : spec.placements) {
      const boxfit::ClassSize& size = priors.at(pl.class_id);
      geom::Box3D box;
      box.class_id = pl.class_id;
      box.length = pl.length > 0.0 ? pl.length : size.prior_length;
      box.width = pl.width > 0.0 ? pl.width : size.prior_width;
      box.height = pl.height > 0.0 ? pl.height : size.prior_height;
      box.yaw = geom::normalize_angle(pl.yaw);
      box.center = {pl.x, pl.y, spec.ground_z + box.height / 2.0};
      add_box(std::move(box));
    }
    return objects;
  }

  // keep bearings inside both the camera spacing and the 90-degree HFOV
  const double sector =
      std::min(std::numbers::pi / spec.num_cameras, std::numbers::pi / 4.0);
  for (const auto& [class_id, count] : spec.objects_per_class) {
    const boxfit::ClassSize& size = priors.at(class_id);
    for (int i = 0; i < count; ++i) {
      geom::Box3D box;
      box.class_id = class_id;
      bool placed = false;
      for (int attempt = 0; attempt < 256 && !placed; ++attempt) {
        const double jitter = 1.0 + spec.size_jitter * rng.uniform(-1.0, 1.0);
        box.length = size.prior_length * jitter;
        box.width = size.prior_width * jitter;
        box.height = size.prior_height * jitter;
        box.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
        const double range = rng.uniform(spec.range_min, spec.range_max);
        // keep the whole footprint inside one camera's horizontal FOV
        const double clearance = std::atan2(box.length / 2.0 + 0.5, range);
        if (clearance >= sector) continue;
        const int cam = static_cast<int>(
            rng.uniform_int(0, spec.num_cameras - 1));
        const double heading = 2.0 * std::numbers::pi * cam / spec.num_cameras;
        const double bearing =
            heading + rng.uniform(-(sector - clearance), sector - clearance);
        box.center = {range * std::cos(bearing), range * std::sin(bearing),
                      spec.ground_z + box.height / 2.0};

        bool clear = true;
        for (const SceneObject& other : objects) {
          geom::BevBox inflated = other.box.bev();
          inflated.length += 2.0;
          inflated.width += 2.0;
          if (geom::bev_intersection_area(box.bev(), inflated) > 0.0) {
            clear = false;
            break;
          }
        }
        placed = clear;
      }
      if (!placed)
        throw ConfigError("synth: could not place objects without overlap; "
                          "reduce counts or widen the range band");
      add_box(std::move(box));
    }
  }
  return objects;
}

// A LiDAR beam from the origin reaches p only if no other box blocks it.
bool lidar_occluded(const geom::Point3& p,
                    std::span<const SceneObject> objects,
                    std::size_t skip_index) {
  const geom::Point3 origin{0.0, 0.0, 0.0};
  for (std::size_t oi = 0; oi < objects.size(); ++oi) {
    if (oi == skip_index) continue;
    double t = 0.0;
    if (intersect_box(origin, p, objects[oi].box, &t) && t < 1.0 - 1e-9)
      return true;
  }
  return false;
}

std::vector<io::RawPoint> sample_lidar(const SceneSpec& spec,
                                       std::span<const SceneObject> objects,
                                       Rng& rng,
                                       std::vector<std::size_t>* per_object) {
  std::vector<io::RawPoint> points;
  per_object->assign(objects.size(), 0);

  for (std::size_t oi = 0; oi < objects.size(); ++oi) {
    const geom::Box3D& box = objects[oi].box;
    const double c = std::cos(box.yaw);
    const double s = std::sin(box.yaw);
    const geom::Point3 axes[3] = {{c, s, 0.0}, {-s, c, 0.0}, {0.0, 0.0, 1.0}};
    const double half[3] = {box.length / 2.0, box.width / 2.0,
                            box.height / 2.0};
    // each face: (normal axis, sign); sample the two spanning axes
    for (int axis = 0; axis < 3; ++axis) {
      for (double sign : {1.0, -1.0}) {
        const geom::Point3 normal = axes[axis] * sign;
        const geom::Point3 face_center = box.center + normal * half[axis];
        // visible from the sensor origin only
        if (geom::dot(normal, geom::Point3{0, 0, 0} - face_center) <= 0.0)
          continue;
        const int a1 = (axis + 1) % 3;
        const int a2 = (axis + 2) % 3;
        const int n1 = std::max(
            2, static_cast<int>(std::ceil(2.0 * half[a1] / spec.lidar_spacing)));
        const int n2 = std::max(
            2, static_cast<int>(std::ceil(2.0 * half[a2] / spec.lidar_spacing)));
        for (int i = 0; i < n1; ++i) {
          for (int j = 0; j < n2; ++j) {
            if (rng.uniform() < spec.lidar_dropout) continue;
            const double u = (i + 0.5) / n1 * 2.0 * half[a1] - half[a1];
            const double v = (j + 0.5) / n2 * 2.0 * half[a2] - half[a2];
            const geom::Point3 p = face_center + axes[a1] * u + axes[a2] * v;
            if (lidar_occluded(p, objects, oi)) continue;
            points.push_back(io::RawPoint{static_cast<float>(p.x),
                                          static_cast<float>(p.y),
                                          static_cast<float>(p.z), 0.5f});
            ++(*per_object)[oi];
          }
        }
      }
    }
  }

  // ground returns in an annulus starting just outside the ego; beams that
  // would hit an object first never reach the ground
  for (int i = 0; i < spec.ground_points; ++i) {
    const double r =
        std::sqrt(rng.uniform(3.0 * 3.0, spec.range_max * spec.range_max));
    const double phi = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const geom::Point3 p{r * std::cos(phi), r * std::sin(phi), spec.ground_z};
    if (lidar_occluded(p, objects, objects.size())) continue;
    points.push_back(io::RawPoint{static_cast<float>(p.x),
                                  static_cast<float>(p.y),
                                  static_cast<float>(p.z), 0.1f});
  }
  return points;
}

struct RenderOutput {
  io::InstanceMask mask;
  io::DepthMap depth;
  std::vector<std::size_t> visible;  // per object
  std::vector<std::size_t> solo;
};

RenderOutput render_camera(const geom::CameraModel& cam, const SceneSpec& spec,
                           std::span<const SceneObject> objects) {
  if (objects.size() > kMaxObjectsPerFrame)
    throw ConfigError("synth: at most 64 objects per frame are supported");

  RenderOutput out;
  out.mask.width = cam.width;
  out.mask.height = cam.height;
  out.mask.values.assign(static_cast<std::size_t>(cam.width) * cam.height, 0);
  out.depth.width = cam.width;
  out.depth.height = cam.height;
  out.depth.values.assign(static_cast<std::size_t>(cam.width) * cam.height,
                          0.0f);
  out.visible.assign(objects.size(), 0);
  out.solo.assign(objects.size(), 0);

  std::vector<std::uint64_t> hits(out.mask.values.size(), 0);
  const geom::Point3 origin = cam.position();

#pragma omp parallel for schedule(static)
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      // ego-frame ray direction with camera-frame z component 1, so the ray
      // parameter equals planar depth
      const double xc = (x + 0.5 - cam.cx()) / cam.fx();
      const double yc = (y + 0.5 - cam.cy()) / cam.fy();
      const auto& m = cam.ego_from_camera;
      const geom::Point3 dir{m[0] * xc + m[1] * yc + m[2],
                             m[4] * xc + m[5] * yc + m[6],
                             m[8] * xc + m[9] * yc + m[10]};

      double best_depth = std::numeric_limits<double>::infinity();
      std::uint16_t best_id = 0;
      std::uint64_t hit_bits = 0;
      for (std::size_t oi = 0; oi < objects.size(); ++oi) {
        double d = 0.0;
        if (!intersect_box(origin, dir, objects[oi].box, &d)) continue;
        hit_bits |= std::uint64_t{1} << oi;
        if (d < best_depth) {
          best_depth = d;
          best_id = objects[oi].instance_id;
        }
      }
      // ground plane: boxes rest on it, so it never occludes them
      if (dir.z < 0.0) {
        const double d = (spec.ground_z - origin.z) / dir.z;
        if (d > 0.0 && d < best_depth) {
          best_depth = d;
          best_id = 0;
        }
      }

      const std::size_t pix = static_cast<std::size_t>(y) * cam.width + x;
      hits[pix] = hit_bits;
      if (std::isfinite(best_depth)) {
        out.depth.values[pix] = static_cast<float>(best_depth);
        out.mask.values[pix] = best_id;
      }
    }
  }

  for (std::size_t pix = 0; pix < hits.size(); ++pix) {
    const std::uint64_t bits = hits[pix];
    if (bits == 0) continue;
    for (std::size_t oi = 0; oi < objects.size(); ++oi) {
      if (bits & (std::uint64_t{1} << oi)) ++out.solo[oi];
    }
    if (out.mask.values[pix] != 0) {
      for (std::size_t oi = 0; oi < objects.size(); ++oi) {
        if (objects[oi].instance_id == out.mask.values[pix]) {
          ++out.visible[oi];
          break;
        }
      }
    }
  }

  return out;
}

void apply_mask_bleed(io::InstanceMask& mask, double fraction, Rng& rng) {
  if (fraction <= 0.0) return;
  const int w = mask.width;
  const int h = mask.height;
  // per instance: pixel count and candidate background neighbors
  std::map<std::uint16_t, std::vector<std::size_t>> candidates;
  std::map<std::uint16_t, std::size_t> pixel_count;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint16_t id = mask.at(x, y);
      if (id == 0) continue;
      ++pixel_count[id];
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (mask.at(nx, ny) == 0)
            candidates[id].push_back(static_cast<std::size_t>(ny) * w + nx);
        }
      }
    }
  }
  for (auto& [id, cand] : candidates) {
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    std::size_t want = static_cast<std::size_t>(
        fraction * static_cast<double>(pixel_count[id]));
    want = std::min(want, cand.size());
    if (want == 0) continue;
    // deterministic shuffle, then take the first `want`
    for (std::size_t i = cand.size(); i > 1; --i) {
      const std::size_t j =
          static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(cand[i - 1], cand[j]);
    }
    for (std::size_t i = 0; i < want; ++i) mask.values[cand[i]] = id;
  }
}

void apply_depth_noise(io::DepthMap& depth, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  for (float& v : depth.values) {
    if (!(v > 0.0f)) continue;
    const double noisy = static_cast<double>(v) * (1.0 + sigma * rng.normal());
    v = static_cast<float>(std::max(noisy, 0.05));
  }
}

}  // namespace

SceneSpec SceneSpec::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open file");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }

  SceneSpec spec;
  try {
    if (doc.contains("frames")) spec.frames = doc["frames"].get<int>();
    if (doc.contains("objects_per_class")) {
      spec.objects_per_class.clear();
      for (const auto& [key, value] : doc["objects_per_class"].items())
        spec.objects_per_class[std::stoi(key)] = value.get<int>();
    }
    if (doc.contains("range_min")) spec.range_min = doc["range_min"].get<double>();
    if (doc.contains("range_max")) spec.range_max = doc["range_max"].get<double>();
    if (doc.contains("image_width")) spec.image_width = doc["image_width"].get<int>();
    if (doc.contains("image_height"))
      spec.image_height = doc["image_height"].get<int>();
    if (doc.contains("num_cameras")) spec.num_cameras = doc["num_cameras"].get<int>();
    if (doc.contains("camera_height"))
      spec.camera_height = doc["camera_height"].get<double>();
    if (doc.contains("ground_z")) spec.ground_z = doc["ground_z"].get<double>();
    if (doc.contains("lidar_spacing"))
      spec.lidar_spacing = doc["lidar_spacing"].get<double>();
    if (doc.contains("lidar_dropout"))
      spec.lidar_dropout = doc["lidar_dropout"].get<double>();
    if (doc.contains("ground_points"))
      spec.ground_points = doc["ground_points"].get<int>();
    if (doc.contains("depth_noise")) spec.depth_noise = doc["depth_noise"].get<double>();
    if (doc.contains("mask_bleed")) spec.mask_bleed = doc["mask_bleed"].get<double>();
    if (doc.contains("size_jitter")) spec.size_jitter = doc["size_jitter"].get<double>();
    if (doc.contains("placements")) {
      for (const auto& entry : doc["placements"]) {
        Placement pl;
        pl.class_id = entry.at("class_id").get<int>();
        pl.x = entry.at("x").get<double>();
        pl.y = entry.at("y").get<double>();
        pl.yaw = entry.value("yaw", 0.0);
        pl.length = entry.value("length", 0.0);
        pl.width = entry.value("width", 0.0);
        pl.height = entry.value("height", 0.0);
        spec.placements.push_back(pl);
      }
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument&) {
    throw IoError(path.string() + ": objects_per_class keys must be integers");
  }
  spec.validate();
  return spec;
}

void SceneSpec::validate() const {
  if (frames < 0) throw ConfigError("synth: frames must be >= 0");
  if (num_cameras < 1) throw ConfigError("synth: need at least one camera");
  if (image_width < 8 || image_height < 8)
    throw ConfigError("synth: image dimensions too small");
  if (!(range_min > 0.0 && range_max > range_min))
    throw ConfigError("synth: need 0 < range_min < range_max");
  if (!(lidar_spacing > 0.0)) throw ConfigError("synth: lidar_spacing must be > 0");
  if (lidar_dropout < 0.0 || lidar_dropout >= 1.0)
    throw ConfigError("synth: lidar_dropout must be in [0,1)");
  if (ground_z >= camera_height)
    throw ConfigError("synth: ground must lie below the cameras");
  if (depth_noise < 0.0 || mask_bleed < 0.0)
    throw ConfigError("synth: noise parameters must be >= 0");
}

SceneResult generate_scene(const SceneSpec& spec, std::uint64_t seed,
                           const std::filesystem::path& out) {
  spec.validate();
  const auto priors = boxfit::SizePriorTable::defaults();

  std::vector<geom::CameraModel> cameras;
  for (int i = 0; i < spec.num_cameras; ++i) {
    const double heading = 2.0 * std::numbers::pi * i / spec.num_cameras;
    std::ostringstream name;
    name << "cam" << i;
    cameras.push_back(make_camera(name.str(), heading, spec.image_width,
                                  spec.image_height, spec.camera_height));
  }
  for (const auto& cam : cameras) cam.validate();

  std::filesystem::create_directories(out / "frames");
  std::filesystem::create_directories(out / "truth");
  io::write_calibration(out / "calibration.json", cameras);

  SceneResult result;
  json stats_doc = json::array();

  for (int f = 0; f < spec.frames; ++f) {
    std::ostringstream fid;
    fid << "frame_";
    fid.width(4);
    fid.fill('0');
    fid << f;
    const std::string frame_id = fid.str();
    const auto frame_dir = out / "frames" / frame_id;
    std::filesystem::create_directories(frame_dir);

    Rng place_rng(stream_seed(seed, f, 1));
    const auto objects = place_objects(spec, priors, place_rng);

    Rng lidar_rng(stream_seed(seed, f, 2));
    std::vector<std::size_t> lidar_counts;
    const auto points = sample_lidar(spec, objects, lidar_rng, &lidar_counts);
    io::write_point_cloud(frame_dir / "cloud.pcbf", points);

    FrameStats frame_stats;
    frame_stats.frame_id = frame_id;
    for (std::size_t oi = 0; oi < objects.size(); ++oi) {
      ObjectStats os;
      os.instance_id = objects[oi].instance_id;
      os.class_id = objects[oi].box.class_id;
      os.lidar_points = lidar_counts[oi];
      frame_stats.objects.push_back(os);
    }

    std::map<std::uint16_t, int> class_table;
    for (const auto& obj : objects)
      class_table[obj.instance_id] = obj.box.class_id;

    for (std::size_t ci = 0; ci < cameras.size(); ++ci) {
      const auto& cam = cameras[ci];
      RenderOutput render = render_camera(cam, spec, objects);
      for (std::size_t oi = 0; oi < objects.size(); ++oi) {
        frame_stats.objects[oi].visible_pixels += render.visible[oi];
        frame_stats.objects[oi].solo_pixels += render.solo[oi];
      }

      Rng noise_rng(stream_seed(seed, f, 100 + static_cast<int>(ci)));
      apply_mask_bleed(render.mask, spec.mask_bleed, noise_rng);
      apply_depth_noise(render.depth, spec.depth_noise, noise_rng);

      render.mask.class_table = class_table;
      io::write_mask(frame_dir / ("mask_" + cam.name + ".pgm"),
                     frame_dir / ("mask_" + cam.name + ".txt"), render.mask);
      io::write_depth(frame_dir / ("depth_" + cam.name + ".pfm"), render.depth);
    }

    std::vector<io::BoxRecord> truth;
    for (const auto& obj : objects)
      truth.push_back(io::BoxRecord{frame_id, obj.box});
    io::write_boxes(out / "truth" / (frame_id + ".boxes"), truth);

    json frame_doc;
    frame_doc["frame_id"] = frame_id;
    frame_doc["objects"] = json::array();
    for (const ObjectStats& os : frame_stats.objects) {
      json obj_doc;
      obj_doc["instance_id"] = os.instance_id;
      obj_doc["class_id"] = os.class_id;
      obj_doc["lidar_points"] = os.lidar_points;
      obj_doc["visible_pixels"] = os.visible_pixels;
      obj_doc["solo_pixels"] = os.solo_pixels;
      frame_doc["objects"].push_back(std::move(obj_doc));
    }
    stats_doc.push_back(std::move(frame_doc));
    result.frames.push_back(std::move(frame_stats));
  }

  std::ofstream stats_out(out / "scene_stats.json", std::ios::trunc);
  if (!stats_out)
    throw IoError((out / "scene_stats.json").string() + ": cannot create file");
  stats_out << stats_doc.dump(2) << "\n";

  return result;
}

}  // namespace fusebox::synth
