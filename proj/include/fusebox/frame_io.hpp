// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fusebox/geometry.hpp"

namespace fusebox::io {

/// One LiDAR return as stored on disk (PCBF keeps f32 for bit-exact round
/// trips).
struct RawPoint {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float intensity = 0.0f;

  geom::Point3 position() const { return {x, y, z}; }
};

/// Per-pixel 16-bit instance ids (0 = background) plus the id -> class map.
struct InstanceMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> values;        // row-major, top-down
  std::map<std::uint16_t, int> class_table;

  std::uint16_t at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

/// Per-pixel metric planar depth; a pixel is valid iff its value is finite
/// and > 0.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // row-major, top-down

  float at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  bool valid(int x, int y) const {
    const float v = at(x, y);
    return std::isfinite(v) && v > 0.0f;
  }
};

struct CameraView {
  geom::CameraModel model;
  InstanceMask mask;
  DepthMap depth;
};

struct Frame {
  std::string frame_id;
  std::vector<RawPoint> points;
  std::vector<CameraView> cameras;
  std::int64_t timestamp_us = 0;
};

/// (epoch, loss) samples with strictly increasing epochs.
struct LossTrace {
  struct Entry {
    int epoch = 0;
    double loss = 0.0;
  };
  std::vector<Entry> entries;
};

/// A 3D box keyed by the frame it belongs to (one line of a box file).
struct BoxRecord {
  std::string frame_id;
  geom::Box3D box;
};

// --- PCBF point clouds -----------------------------------------------------
// magic "PCBF", u32 little-endian record count, then count x 4 f32 LE
// (x, y, z, intensity).
std::vector<RawPoint> load_point_cloud(const std::filesystem::path& path);
void write_point_cloud(const std::filesystem::path& path,
                       std::span<const RawPoint> points);

// --- instance masks ----------------------------------------------------------
// Raster: binary PGM, magic "P5", maxval 65535, big-endian samples.
// Table: text lines "<instance_id> <class_id>".
InstanceMask load_mask(const std::filesystem::path& mask_path,
                       const std::filesystem::path& table_path);
void write_mask(const std::filesystem::path& mask_path,
                const std::filesystem::path& table_path,
                const InstanceMask& mask);

// --- depth maps --------------------------------------------------------------
// Single-channel PFM ("Pf"); negative scale means little-endian; rows are
// stored bottom-up on disk and converted to top-down in memory.
DepthMap load_depth(const std::filesystem::path& path);
void write_depth(const std::filesystem::path& path, const DepthMap& depth);

// --- boxes -------------------------------------------------------------------
// One box per line: frame_id class_id cx cy cz length width height yaw score
// instance_id. Numerics carry 9 significant digits; "-" marks an absent
// instance id.
std::vector<BoxRecord> read_boxes(const std::filesystem::path& path);
void write_boxes(const std::filesystem::path& path,
                 std::span<const BoxRecord> boxes);

// --- calibration -------------------------------------------------------------
// JSON array of {name, width, height, intrinsics:[9], ego_from_camera:[16]}.
std::vector<geom::CameraModel> load_calibration(
    const std::filesystem::path& path);
void write_calibration(const std::filesystem::path& path,
                       std::span<const geom::CameraModel> cameras);

// --- loss traces -------------------------------------------------------------
// CSV lines "epoch,loss"; an optional "epoch,loss" header row is tolerated.
LossTrace load_loss_trace(const std::filesystem::path& path);
void write_loss_trace(const std::filesystem::path& path,
                      const LossTrace& trace);

// --- dataset layout ----------------------------------------------------------
// <root>/calibration.json plus <root>/frames/<frame_id>/ holding cloud.pcbf
// and, per camera, mask_<cam>.pgm, mask_<cam>.txt, depth_<cam>.pfm.
std::vector<std::string> list_frame_ids(const std::filesystem::path& root);
Frame load_frame(const std::filesystem::path& root,
                 const std::string& frame_id,
                 std::span<const geom::CameraModel> cameras);

}  // namespace fusebox::io
