// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fusebox/boxfit.hpp"
#include "fusebox/evolution.hpp"
#include "fusebox/frame_io.hpp"
#include "fusebox/fusion.hpp"

namespace fusebox::pipeline {

/// Everything the pipeline drivers need, loadable from a JSON config file.
/// Defaults follow the reference settings: lambda 0.01, psi 0.1, IoU merge
/// threshold 0.2, k=16/alpha=1 statistical filtering, 5-epoch window, one
/// update round.
struct PipelineConfig {
  std::string dataset_root;  // default dataset; the --frames flag overrides
  double lambda = 0.01;
  int k_neighbors = 16;
  double alpha = 1.0;
  std::size_t max_per_instance = 4096;
  double psi = 0.1;
  double iou_threshold = 0.2;
  int window = 5;
  int max_update_rounds = 1;
  int max_epochs = 0;  // 0: run through the whole loss trace
  std::string decay_base = "euler";     // "euler" | "epoch"
  std::string merge_rule = "algorithm";  // "algorithm" | "prose"
  bool enable_local_filter = true;
  bool enable_global_filter = true;
  bool keep_unanchored = false;
  bool align_depth = true;  // per-instance metric scale correction
  std::string size_prior_path;  // empty: built-in defaults
  std::map<int, std::string> class_table = {
      {1, "vehicle"}, {2, "pedestrian"}, {3, "cyclist"}};
  std::vector<double> range_bins = {0.0, 30.0, 50.0, 80.0};
  double eval_iou = 0.25;
  int workers = 0;  // 0: library default

  static PipelineConfig load(const std::filesystem::path& path);
  void validate() const;

  /// FNV-1a hash of the canonical JSON serialization; stamped into run
  /// manifests so outputs are traceable to their settings.
  std::string hash() const;

  std::string to_json_string() const;

  filter::FilterParams filter_params() const {
    return {lambda, k_neighbors, alpha};
  }
  evolve::EvolutionParams evolution_params() const;
  boxfit::SizePriorTable priors() const;
};

/// Per-frame stage counts recorded in the run manifest.
struct FrameCounts {
  std::string frame_id;
  std::size_t raw_points = 0;
  std::size_t foreground = 0;
  std::size_t background = 0;
  std::size_t pseudo_points = 0;
  std::size_t instances = 0;
  std::size_t unanchored = 0;
  std::size_t points_after_local = 0;
  std::size_t points_after_global = 0;
  std::size_t boxes = 0;
};

struct FrameResult {
  std::vector<io::BoxRecord> boxes;
  FrameCounts counts;
};

/// Fusion, filtering and box fitting for one frame.
FrameResult process_frame(const io::Frame& frame, const PipelineConfig& config,
                          const boxfit::SizePriorTable& priors);

/// The fusion products evolution needs: the full real cloud and the
/// unfiltered pseudo pool.
evolve::EvolutionFrame fusion_products(const io::Frame& frame,
                                       const PipelineConfig& config);

/// Runs the generate pipeline over every frame under `dataset`, writing
/// <out>/<frame_id>.boxes plus <out>/manifest.json. Frames process in
/// parallel; a single writer keeps output order stable.
void run_generate(const PipelineConfig& config,
                  const std::filesystem::path& dataset,
                  const std::filesystem::path& out);

/// Runs dynamic self-evolution from initial boxes in `boxes_dir` with a
/// file-backed stub detector, writing refined box files and phase_log.txt
/// under `out`. The phase log is flushed as triggers complete, so a detector
/// failure still leaves the log of finished phases behind.
void run_evolve(const PipelineConfig& config,
                const std::filesystem::path& dataset,
                const std::filesystem::path& boxes_dir,
                const std::filesystem::path& detector_dir,
                const std::filesystem::path& out);

/// Reads one .boxes file, or every *.boxes under a directory (sorted).
std::vector<io::BoxRecord> read_box_records(const std::filesystem::path& path);

}  // namespace fusebox::pipeline
