// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fusebox/frame_io.hpp"
#include "fusebox/geometry.hpp"

namespace fusebox::synth {

/// Explicit object placement; overrides random placement when present.
struct Placement {
  int class_id = 1;
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double length = 0.0;  // <= 0 picks the class prior dimension
  double width = 0.0;
  double height = 0.0;
};

/// Parameters of a generated scene. Cameras sit at the ego origin facing
/// evenly spaced headings with a 90-degree horizontal FOV each (fx = w/2);
/// the ground is a plane below the sensor.
struct SceneSpec {
  int frames = 10;
  std::map<int, int> objects_per_class = {{1, 5}, {2, 3}, {3, 2}};
  double range_min = 9.0;
  double range_max = 38.0;
  int image_width = 800;
  int image_height = 450;
  int num_cameras = 4;
  double camera_height = 0.2;   // camera center z in the ego frame
  double ground_z = -1.8;
  double lidar_spacing = 0.12;  // surface sampling step, meters
  double lidar_dropout = 0.1;
  int ground_points = 2500;
  double depth_noise = 0.0;     // relative sigma on depth values
  double mask_bleed = 0.0;      // bled pixels as a fraction of instance pixels
  double size_jitter = 0.03;    // relative jitter on prior dimensions
  std::vector<Placement> placements;  // same placements in every frame

  static SceneSpec from_json_file(const std::filesystem::path& path);
  void validate() const;
};

/// Per-object render statistics, enough to decide visibility/occlusion.
struct ObjectStats {
  std::uint16_t instance_id = 0;
  int class_id = 0;
  std::size_t lidar_points = 0;
  std::size_t visible_pixels = 0;  // pixels where this object won the z-buffer
  std::size_t solo_pixels = 0;     // pixels its surface covers, ignoring others

  double visibility() const {
    return solo_pixels == 0 ? 0.0
                            : static_cast<double>(visible_pixels) /
                                  static_cast<double>(solo_pixels);
  }
};

struct FrameStats {
  std::string frame_id;
  std::vector<ObjectStats> objects;
};

struct SceneResult {
  std::vector<FrameStats> frames;
};

/// Writes a complete synthetic dataset under `out`: calibration.json,
/// frames/<id>/ rasters and point clouds, truth/<id>.boxes, and
/// scene_stats.json. Deterministic for a fixed (spec, seed).
SceneResult generate_scene(const SceneSpec& spec, std::uint64_t seed,
                           const std::filesystem::path& out);

}  // namespace fusebox::synth
