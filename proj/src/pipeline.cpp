// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusebox/pipeline.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <omp.h>

#include "fusebox/errors.hpp"
#include "fusebox/filtering.hpp"

namespace fusebox::pipeline {

namespace {

using nlohmann::json;

json config_to_json(const PipelineConfig& c) {
  json doc;
  doc["dataset_root"] = c.dataset_root;
  doc["lambda"] = c.lambda;
  doc["k_neighbors"] = c.k_neighbors;
  doc["alpha"] = c.alpha;
  doc["max_per_instance"] = c.max_per_instance;
  doc["psi"] = c.psi;
  doc["iou_threshold"] = c.iou_threshold;
  doc["window"] = c.window;
  doc["max_update_rounds"] = c.max_update_rounds;
  doc["max_epochs"] = c.max_epochs;
  doc["decay_base"] = c.decay_base;
  doc["merge_rule"] = c.merge_rule;
  doc["enable_local_filter"] = c.enable_local_filter;
  doc["enable_global_filter"] = c.enable_global_filter;
  doc["keep_unanchored"] = c.keep_unanchored;
  doc["align_depth"] = c.align_depth;
  doc["size_prior_path"] = c.size_prior_path;
  json table;
  for (const auto& [id, name] : c.class_table)
    table[std::to_string(id)] = name;
  doc["class_table"] = std::move(table);
  doc["range_bins"] = c.range_bins;
  doc["eval_iou"] = c.eval_iou;
  doc["workers"] = c.workers;
  return doc;
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open file");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (!doc.is_object())
    throw ConfigError(path.string() + ": config must be a JSON object");

  PipelineConfig c;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "dataset_root") c.dataset_root = value.get<std::string>();
      else if (key == "lambda") c.lambda = value.get<double>();
      else if (key == "k_neighbors") c.k_neighbors = value.get<int>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "max_per_instance")
        c.max_per_instance = value.get<std::size_t>();
      else if (key == "psi") c.psi = value.get<double>();
      else if (key == "iou_threshold") c.iou_threshold = value.get<double>();
      else if (key == "window") c.window = value.get<int>();
      else if (key == "max_update_rounds")
        c.max_update_rounds = value.get<int>();
      else if (key == "max_epochs") c.max_epochs = value.get<int>();
      else if (key == "decay_base") c.decay_base = value.get<std::string>();
      else if (key == "merge_rule") c.merge_rule = value.get<std::string>();
      else if (key == "enable_local_filter")
        c.enable_local_filter = value.get<bool>();
      else if (key == "enable_global_filter")
        c.enable_global_filter = value.get<bool>();
      else if (key == "keep_unanchored")
        c.keep_unanchored = value.get<bool>();
      else if (key == "align_depth") c.align_depth = value.get<bool>();
      else if (key == "size_prior_path")
        c.size_prior_path = value.get<std::string>();
      else if (key == "class_table") {
        c.class_table.clear();
        for (const auto& [id, name] : value.items())
          c.class_table[std::stoi(id)] = name.get<std::string>();
      } else if (key == "range_bins")
        c.range_bins = value.get<std::vector<double>>();
      else if (key == "eval_iou") c.eval_iou = value.get<double>();
      else if (key == "workers") c.workers = value.get<int>();
      else
        throw ConfigError(path.string() + ": unknown config key \"" + key +
                          "\"");
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument&) {
    throw ConfigError(path.string() + ": class_table keys must be integers");
  }
  c.validate();
  return c;
}

void PipelineConfig::validate() const {
  filter_params().validate();
  evolution_params().validate();
  if (max_epochs < 0) throw ConfigError("config: max_epochs must be >= 0");
  if (workers < 0) throw ConfigError("config: workers must be >= 0");
  if (!(eval_iou > 0.0 && eval_iou <= 1.0))
    throw ConfigError("config: eval_iou must be in (0,1]");
  if (decay_base != "euler" && decay_base != "epoch")
    throw ConfigError("config: decay_base must be \"euler\" or \"epoch\"");
  if (merge_rule != "algorithm" && merge_rule != "prose")
    throw ConfigError("config: merge_rule must be \"algorithm\" or \"prose\"");
  if (range_bins.size() < 2)
    throw ConfigError("config: range_bins needs at least two edges");
  for (std::size_t i = 0; i + 1 < range_bins.size(); ++i)
    if (!(range_bins[i] < range_bins[i + 1]))
      throw ConfigError("config: range_bins must be strictly increasing");
}

std::string PipelineConfig::to_json_string() const {
  return config_to_json(*this).dump(2);
}

std::string PipelineConfig::hash() const {
  const std::string canonical = config_to_json(*this).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

evolve::EvolutionParams PipelineConfig::evolution_params() const {
  evolve::EvolutionParams p;
  p.psi = psi;
  p.iou_threshold = iou_threshold;
  p.window = window;
  p.max_update_rounds = max_update_rounds;
  p.decay = decay_base == "epoch" ? evolve::DecayKind::kEpoch
                                  : evolve::DecayKind::kEuler;
  p.merge_rule = merge_rule == "prose" ? evolve::MergeRule::kProse
                                       : evolve::MergeRule::kAlgorithm;
  return p;
}

boxfit::SizePriorTable PipelineConfig::priors() const {
  return size_prior_path.empty() ? boxfit::SizePriorTable::defaults()
                                 : boxfit::SizePriorTable::load(size_prior_path);
}

FrameResult process_frame(const io::Frame& frame, const PipelineConfig& config,
                          const boxfit::SizePriorTable& priors) {
  FrameResult result;
  result.counts.frame_id = frame.frame_id;
  result.counts.raw_points = frame.points.size();

  const auto labeled = fusion::label_real_points(frame);
  result.counts.foreground = labeled.foreground.size();
  result.counts.background = labeled.background_count;

  fusion::ScaleMap scales;
  if (config.align_depth) scales = fusion::align_depth_scale(frame);
  const auto pseudo = fusion::generate_pseudo_points(
      frame, config.max_per_instance, config.align_depth ? &scales : nullptr);
  result.counts.pseudo_points = pseudo.size();

  const auto clouds = fusion::group_by_instance(labeled.foreground, pseudo);

  boxfit::BoxGenParams params;
  params.filter = config.filter_params();
  params.enable_local_filter = config.enable_local_filter;
  params.enable_global_filter = config.enable_global_filter;
  params.keep_unanchored = config.keep_unanchored;

  boxfit::BoxGenStats stats;
  auto boxes = boxfit::generate_initial_boxes(clouds, params,
                                              priors, &stats);
  result.counts.instances = stats.instances;
  result.counts.unanchored = stats.unanchored;
  result.counts.points_after_local = stats.points_after_local;
  result.counts.points_after_global = stats.points_after_global;
  result.counts.boxes = boxes.size();

  result.boxes.reserve(boxes.size());
  for (auto& box : boxes)
    result.boxes.push_back(io::BoxRecord{frame.frame_id, std::move(box)});
  return result;
}

evolve::EvolutionFrame fusion_products(const io::Frame& frame,
                                       const PipelineConfig& config) {
  evolve::EvolutionFrame out;
  out.frame_id = frame.frame_id;
  out.real.reserve(frame.points.size());
  for (const io::RawPoint& p : frame.points) out.real.push_back(p.position());

  fusion::ScaleMap scales;
  if (config.align_depth) scales = fusion::align_depth_scale(frame);
  const auto pseudo = fusion::generate_pseudo_points(
      frame, config.max_per_instance, config.align_depth ? &scales : nullptr);
  out.pseudo_pool.reserve(pseudo.size());
  for (const auto& p : pseudo) out.pseudo_pool.push_back(p.position);
  return out;
}

void run_generate(const PipelineConfig& config,
                  const std::filesystem::path& dataset,
                  const std::filesystem::path& out) {
  config.validate();
  const auto priors = config.priors();
  const auto cameras = io::load_calibration(dataset / "calibration.json");
  const auto frame_ids = io::list_frame_ids(dataset);

  std::filesystem::create_directories(out);

  std::vector<FrameResult> results(frame_ids.size());
  std::vector<std::exception_ptr> errors(frame_ids.size());
  const std::int64_t n = static_cast<std::int64_t>(frame_ids.size());
  const int workers = config.workers > 0 ? config.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (std::int64_t i = 0; i < n; ++i) {
    const std::size_t idx = static_cast<std::size_t>(i);
    try {
      const io::Frame frame = io::load_frame(dataset, frame_ids[idx], cameras);
      results[idx] = process_frame(frame, config, priors);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const IoError& e) {
      throw IoError("frame " + frame_ids[i] + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError("frame " + frame_ids[i] + ": " + e.what());
    }
  }

  // single writer, frame order
  json manifest;
  manifest["config_hash"] = config.hash();
  manifest["frames"] = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    io::write_boxes(out / (frame_ids[i] + ".boxes"), results[i].boxes);
    const FrameCounts& c = results[i].counts;
    json fdoc;
    fdoc["frame_id"] = c.frame_id;
    fdoc["raw_points"] = c.raw_points;
    fdoc["foreground"] = c.foreground;
    fdoc["background"] = c.background;
    fdoc["pseudo_points"] = c.pseudo_points;
    fdoc["instances"] = c.instances;
    fdoc["unanchored"] = c.unanchored;
    fdoc["points_after_local"] = c.points_after_local;
    fdoc["points_after_global"] = c.points_after_global;
    fdoc["boxes"] = c.boxes;
    manifest["frames"].push_back(std::move(fdoc));
  }
  std::ofstream mf(out / "manifest.json", std::ios::trunc);
  if (!mf) throw IoError((out / "manifest.json").string() + ": cannot create file");
  mf << manifest.dump(2) << "\n";
  if (!mf) throw IoError((out / "manifest.json").string() + ": write failed");
}

void run_evolve(const PipelineConfig& config,
                const std::filesystem::path& dataset,
                const std::filesystem::path& boxes_dir,
                const std::filesystem::path& detector_dir,
                const std::filesystem::path& out) {
  config.validate();
  const auto cameras = io::load_calibration(dataset / "calibration.json");
  const auto frame_ids = io::list_frame_ids(dataset);

  std::vector<evolve::EvolutionFrame> frames(frame_ids.size());
  std::vector<std::exception_ptr> errors(frame_ids.size());
  const std::int64_t n = static_cast<std::int64_t>(frame_ids.size());
  const int workers = config.workers > 0 ? config.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (std::int64_t i = 0; i < n; ++i) {
    const std::size_t idx = static_cast<std::size_t>(i);
    try {
      const io::Frame frame = io::load_frame(dataset, frame_ids[idx], cameras);
      frames[idx] = fusion_products(frame, config);
      const auto path = boxes_dir / (frame_ids[idx] + ".boxes");
      for (auto& rec : io::read_boxes(path))
        frames[idx].boxes.push_back(std::move(rec.box));
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const IoError& e) {
      throw IoError("frame " + frame_ids[i] + ": " + e.what());
    }
  }

  evolve::StubDetector detector(detector_dir);
  const int max_epochs =
      config.max_epochs > 0 ? config.max_epochs : detector.max_epoch();

  std::filesystem::create_directories(out);
  const auto log_path = out / "phase_log.txt";
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError(log_path.string() + ": cannot create file");

  const auto result = evolve::run_evolution(
      std::move(frames), detector, config.evolution_params(), max_epochs,
      [&log](const evolve::PhaseLogEntry& entry) {
        log << entry.to_line() << "\n";
        log.flush();  // survive a later detector failure
      });

  for (const auto& frame : result.frames) {
    std::vector<io::BoxRecord> records;
    records.reserve(frame.boxes.size());
    for (const auto& box : frame.boxes)
      records.push_back(io::BoxRecord{frame.frame_id, box});
    io::write_boxes(out / (frame.frame_id + ".boxes"), records);
  }
}

std::vector<io::BoxRecord> read_box_records(
    const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".boxes")
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<io::BoxRecord> records;
    for (const auto& file : files) {
      auto part = io::read_boxes(file);
      records.insert(records.end(), std::make_move_iterator(part.begin()),
                     std::make_move_iterator(part.end()));
    }
    return records;
  }
  return io::read_boxes(path);
}

}  // namespace fusebox::pipeline
