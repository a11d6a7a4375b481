// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusebox/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fusebox/errors.hpp"
#include "fusebox/evaluation.hpp"
#include "fusebox/pipeline.hpp"
#include "fusebox/synthetic.hpp"

namespace fusebox::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;

pipeline::PipelineConfig load_config(const std::string& path) {
  if (path.empty()) return pipeline::PipelineConfig{};
  return pipeline::PipelineConfig::load(path);
}

void write_eval_json(const std::filesystem::path& path,
                     const eval::EvalReport& report) {
  nlohmann::json doc;
  doc["mAP"] = report.mean_ap;
  doc["classes"] = nlohmann::json::array();
  for (const auto& cr : report.classes) {
    nlohmann::json cdoc;
    cdoc["class_id"] = cr.class_id;
    auto bin_doc = [](const eval::BinStats& b) {
      nlohmann::json j;
      j["lo"] = b.bin.lo;
      j["hi"] = b.bin.hi;
      j["ap"] = b.ap;
      j["tp"] = b.tp;
      j["fp"] = b.fp;
      j["fn"] = b.fn;
      j["truths"] = b.truths;
      return j;
    };
    cdoc["bins"] = nlohmann::json::array();
    for (const auto& b : cr.bins) cdoc["bins"].push_back(bin_doc(b));
    cdoc["overall"] = bin_doc(cr.overall);
    doc["classes"].push_back(std::move(cdoc));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot create file");
  out << doc.dump(2) << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"pseudo-box generation from LiDAR point clouds fused with "
               "image instance masks and depth maps"};
  app.require_subcommand(1);

  std::string config_path;
  std::string frames_dir;
  std::string out_dir;
  std::string boxes_dir;
  std::string detector_dir;
  std::string pred_path;
  std::string truth_path;
  std::string iou_kind = "bev";
  std::string interp = "all";
  std::string spec_path;
  std::uint64_t seed = 0;

  auto* generate = app.add_subcommand(
      "generate", "fuse, filter and fit initial pseudo-boxes per frame");
  generate->add_option("--config", config_path, "pipeline config JSON");
  generate->add_option("--frames", frames_dir,
                       "dataset root (defaults to the config's dataset_root)");
  generate->add_option("--out", out_dir, "output directory")->required();

  auto* evolve_cmd = app.add_subcommand(
      "evolve", "refine pseudo-boxes with the dynamic self-evolution loop");
  evolve_cmd->add_option("--config", config_path, "pipeline config JSON");
  evolve_cmd->add_option("--frames", frames_dir,
                         "dataset root (defaults to the config's dataset_root)");
  evolve_cmd->add_option("--boxes", boxes_dir, "initial box files directory")
      ->required();
  evolve_cmd
      ->add_option("--detector", detector_dir,
                   "stub detector directory (loss.csv + phase_<p>/)")
      ->required();
  evolve_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* eval_cmd =
      app.add_subcommand("eval", "average precision against truth boxes");
  eval_cmd->add_option("--config", config_path, "pipeline config JSON");
  eval_cmd->add_option("--pred", pred_path, "predicted boxes file or directory")
      ->required();
  eval_cmd->add_option("--truth", truth_path, "truth boxes file or directory")
      ->required();
  eval_cmd->add_option("--iou", iou_kind, "IoU kind: bev or 3d")
      ->check(CLI::IsMember({"bev", "3d"}));
  eval_cmd->add_option("--interp", interp,
                       "AP interpolation: all, 11point or 40point")
      ->check(CLI::IsMember({"all", "11point", "40point"}));
  eval_cmd->add_option("--out", out_dir, "optional report JSON path");

  auto* synth = app.add_subcommand(
      "synth", "generate a synthetic dataset with ground truth");
  synth->add_option("--spec", spec_path, "scene spec JSON (defaults if omitted)");
  synth->add_option("--seed", seed, "RNG seed")->required();
  synth->add_option("--out", out_dir, "output dataset directory")->required();

  try {
    std::vector<const char*> argv;
    argv.push_back("fusebox");
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  auto dataset_of = [&frames_dir](const pipeline::PipelineConfig& config) {
    const std::string root =
        frames_dir.empty() ? config.dataset_root : frames_dir;
    if (root.empty())
      throw ConfigError("no dataset: pass --frames or set dataset_root");
    return root;
  };

  try {
    if (generate->parsed()) {
      const auto config = load_config(config_path);
      pipeline::run_generate(config, dataset_of(config), out_dir);
      std::cout << "wrote boxes and manifest to " << out_dir << "\n";
    } else if (evolve_cmd->parsed()) {
      const auto config = load_config(config_path);
      pipeline::run_evolve(config, dataset_of(config), boxes_dir, detector_dir,
                           out_dir);
      std::cout << "wrote refined boxes and phase log to " << out_dir << "\n";
    } else if (eval_cmd->parsed()) {
      const auto config = load_config(config_path);
      const auto preds = pipeline::read_box_records(pred_path);
      const auto truths = pipeline::read_box_records(truth_path);
      const auto bins = eval::bins_from_edges(config.range_bins);
      const auto mode = interp == "11point"
                            ? eval::ApInterpolation::kElevenPoint
                            : interp == "40point"
                                  ? eval::ApInterpolation::kFortyPoint
                                  : eval::ApInterpolation::kAllPoint;
      const auto report = eval::evaluate_ap(
          preds, truths, config.eval_iou, bins,
          iou_kind == "3d" ? eval::IouKind::k3D : eval::IouKind::kBev, mode);
      std::cout << eval::format_report(report, config.class_table);
      if (!out_dir.empty()) write_eval_json(out_dir, report);
    } else if (synth->parsed()) {
      synth::SceneSpec spec;
      if (!spec_path.empty()) spec = synth::SceneSpec::from_json_file(spec_path);
      const auto result = synth::generate_scene(spec, seed, out_dir);
      std::size_t objects = 0;
      for (const auto& frame : result.frames) objects += frame.objects.size();
      std::cout << "wrote " << result.frames.size() << " frames with "
                << objects << " objects to " << out_dir << "\n";
    }
  } catch (const IoError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ConfigError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace fusebox::cli
