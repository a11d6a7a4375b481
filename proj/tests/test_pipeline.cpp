// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "fusebox/cli.hpp"
#include "fusebox/errors.hpp"
#include "fusebox/evaluation.hpp"
#include "fusebox/pipeline.hpp"
#include "fusebox/synthetic.hpp"

using namespace fusebox;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("fusebox_pl_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

synth::SceneSpec small_scene() {
  synth::SceneSpec spec;
  spec.frames = 2;
  spec.objects_per_class = {{1, 2}, {2, 1}, {3, 1}};
  spec.image_width = 320;
  spec.image_height = 180;
  spec.range_min = 8.0;
  spec.range_max = 20.0;
  spec.ground_points = 600;
  spec.lidar_spacing = 0.15;
  return spec;
}

// directory snapshot: relative path -> file bytes
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    out[fs::relative(entry.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in),
                    std::istreambuf_iterator<char>());
  }
  return out;
}

void write_no_trigger_detector(const fs::path& dir) {
  fs::create_directories(dir);
  io::LossTrace trace;
  double amp = 2.0;
  for (int e = 1; e <= 12; ++e) {
    trace.entries.push_back({e, 100.0 + (e % 2 == 0 ? amp : 0.0)});
    amp *= 1.7;  // difference variance keeps moving: the rule never fires
  }
  io::write_loss_trace(dir / "loss.csv", trace);
}

void write_trigger_detector(const fs::path& dir,
                            const std::vector<std::string>& frame_ids) {
  fs::create_directories(dir / "phase_1");
  io::LossTrace trace;
  for (int e = 1; e <= 12; ++e)
    trace.entries.push_back({e, 10.0 - 0.5 * e});  // linear: fires ASAP
  io::write_loss_trace(dir / "loss.csv", trace);
  for (const auto& id : frame_ids) {
    io::BoxRecord rec;
    rec.frame_id = id;
    rec.box.class_id = 1;
    rec.box.center = {200.0, 200.0, 0.0};  // disjoint from everything
    rec.box.length = 4.0;
    rec.box.width = 2.0;
    rec.box.height = 1.5;
    rec.box.score = 0.9;
    rec.box.instance_id = "det:1";
    io::write_boxes(dir / "phase_1" / (id + ".boxes"), std::vector{rec});
  }
}

}  // namespace

TEST_CASE("synth: deterministic per seed, differing across seeds") {
  TempDir a("synth_a"), b("synth_b"), c("synth_c");
  const auto spec = small_scene();
  synth::generate_scene(spec, 42, a.path);
  synth::generate_scene(spec, 42, b.path);
  synth::generate_scene(spec, 43, c.path);
  CHECK(snapshot(a.path) == snapshot(b.path));
  CHECK(snapshot(a.path) != snapshot(c.path));
}

TEST_CASE("synth: one-car spec paints mask pixels and consistent depth") {
  TempDir tmp("synth_car");
  synth::SceneSpec spec;
  spec.frames = 1;
  spec.image_width = 320;
  spec.image_height = 180;
  spec.placements.push_back(synth::Placement{1, 12.0, 0.0, 0.6, 0, 0, 0});
  const auto result = synth::generate_scene(spec, 7, tmp.path);
  REQUIRE(result.frames.size() == 1);
  REQUIRE(result.frames[0].objects.size() == 1);
  CHECK(result.frames[0].objects[0].visible_pixels > 0);
  CHECK(result.frames[0].objects[0].lidar_points > 0);

  // cross-format consistency: every masked depth pixel re-projects into the
  // truth box of its instance id
  const auto cameras = io::load_calibration(tmp.path / "calibration.json");
  const auto frame = io::load_frame(tmp.path, "frame_0000", cameras);
  const auto truth = io::read_boxes(tmp.path / "truth" / "frame_0000.boxes");
  REQUIRE(truth.size() == 1);
  // depth rasters hold f32, so surface hits sit within f32 quantization of
  // the box boundary; inflate by that much
  geom::Box3D inflated = truth[0].box;
  inflated.length += 1e-4;
  inflated.width += 1e-4;
  inflated.height += 1e-4;
  std::size_t checked = 0;
  for (const auto& view : frame.cameras) {
    for (int y = 0; y < view.mask.height; y += 3) {
      for (int x = 0; x < view.mask.width; x += 3) {
        if (view.mask.at(x, y) == 0 || !view.depth.valid(x, y)) continue;
        const auto p = geom::backproject(x + 0.5, y + 0.5,
                                         view.depth.at(x, y), view.model);
        const std::vector<geom::Point3> single = {p};
        CHECK(geom::points_in_box(single, inflated).size() == 1);
        ++checked;
      }
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("synth: occluder puts a hole in the far object's mask") {
  TempDir tmp("synth_occ");
  synth::SceneSpec spec;
  spec.frames = 1;
  spec.image_width = 320;
  spec.image_height = 180;
  spec.placements.push_back(synth::Placement{1, 10.0, 0.0, 0.0, 0, 0, 0});
  spec.placements.push_back(synth::Placement{1, 18.0, 0.0, 0.0, 0, 0, 0});
  const auto result = synth::generate_scene(spec, 11, tmp.path);
  REQUIRE(result.frames[0].objects.size() == 2);
  const auto& near = result.frames[0].objects[0];
  const auto& far = result.frames[0].objects[1];
  CHECK(near.visibility() == doctest::Approx(1.0));
  CHECK(far.solo_pixels > 0);
  CHECK(far.visible_pixels < far.solo_pixels);  // z-buffer carved a hole
}

TEST_CASE("generate: synthetic 3-object frame yields 3 boxes plus manifest") {
  TempDir data("gen_data"), out("gen_out");
  synth::SceneSpec spec;
  spec.frames = 1;
  spec.image_width = 320;
  spec.image_height = 180;
  spec.placements.push_back(synth::Placement{1, 12.0, 1.0, 0.5, 0, 0, 0});
  spec.placements.push_back(synth::Placement{2, 9.0, -2.0, 0.0, 0, 0, 0});
  spec.placements.push_back(synth::Placement{3, 15.0, 3.0, -0.8, 0, 0, 0});
  synth::generate_scene(spec, 3, data.path);

  pipeline::PipelineConfig config;
  pipeline::run_generate(config, data.path, out.path);

  const auto boxes = io::read_boxes(out.path / "frame_0000.boxes");
  CHECK(boxes.size() == 3);
  std::map<int, int> per_class;
  for (const auto& rec : boxes) ++per_class[rec.box.class_id];
  CHECK(per_class[1] == 1);
  CHECK(per_class[2] == 1);
  CHECK(per_class[3] == 1);

  REQUIRE(fs::exists(out.path / "manifest.json"));
  std::ifstream mf(out.path / "manifest.json");
  const std::string manifest((std::istreambuf_iterator<char>(mf)),
                             std::istreambuf_iterator<char>());
  CHECK(manifest.find("config_hash") != std::string::npos);
  CHECK(manifest.find("frame_0000") != std::string::npos);
  CHECK(manifest.find("raw_points") != std::string::npos);
}

TEST_CASE("generate: corrupt mask fails with exit 2 naming the frame") {
  TempDir data("gen_bad"), out("gen_bad_out");
  auto spec = small_scene();
  spec.frames = 1;
  synth::generate_scene(spec, 5, data.path);
  {
    std::ofstream bad(data.path / "frames" / "frame_0000" / "mask_cam0.pgm",
                      std::ios::trunc | std::ios::binary);
    bad << "garbage";
  }
  pipeline::PipelineConfig config;
  CHECK_THROWS_WITH_AS(pipeline::run_generate(config, data.path, out.path),
                       doctest::Contains("frame_0000"), IoError);

  const int code = cli::run({"generate", "--frames", data.path.string(),
                             "--out", out.path.string()});
  CHECK(code == 2);
}

TEST_CASE("evolve: no-trigger trace leaves boxes equal to inputs") {
  TempDir data("ev_data"), boxes("ev_boxes"), det("ev_det"), out("ev_out");
  auto spec = small_scene();
  spec.frames = 2;
  synth::generate_scene(spec, 9, data.path);
  pipeline::PipelineConfig config;
  pipeline::run_generate(config, data.path, boxes.path);
  write_no_trigger_detector(det.path);

  pipeline::run_evolve(config, data.path, boxes.path, det.path, out.path);
  for (const auto& id : io::list_frame_ids(data.path)) {
    std::ifstream a(boxes.path / (id + ".boxes"), std::ios::binary);
    std::ifstream b(out.path / (id + ".boxes"), std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)),
                         std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(b)),
                         std::istreambuf_iterator<char>());
    CHECK(sa == sb);
  }
  std::ifstream log(out.path / "phase_log.txt");
  const std::string log_text((std::istreambuf_iterator<char>(log)),
                             std::istreambuf_iterator<char>());
  CHECK(log_text.empty());
}

TEST_CASE("evolve: scripted trigger logs one phase and adds detections") {
  TempDir data("ev2_data"), boxes("ev2_boxes"), det("ev2_det"), out("ev2_out");
  auto spec = small_scene();
  spec.frames = 1;
  synth::generate_scene(spec, 13, data.path);
  pipeline::PipelineConfig config;
  pipeline::run_generate(config, data.path, boxes.path);
  write_trigger_detector(det.path, {"frame_0000"});

  pipeline::run_evolve(config, data.path, boxes.path, det.path, out.path);
  std::ifstream log(out.path / "phase_log.txt");
  std::string line;
  REQUIRE(std::getline(log, line));
  CHECK(line.find("phase=1") != std::string::npos);
  CHECK(line.find("added=1") != std::string::npos);
  CHECK_FALSE(std::getline(log, line));  // exactly one trigger (cap 1)

  const auto refined = io::read_boxes(out.path / "frame_0000.boxes");
  bool has_detection = false;
  for (const auto& rec : refined)
    has_detection |= rec.box.instance_id == "det:1";
  CHECK(has_detection);
}

TEST_CASE("evolve: missing phase directory is an input error (exit 2)") {
  TempDir data("ev3_data"), boxes("ev3_boxes"), det("ev3_det"), out("ev3_out");
  auto spec = small_scene();
  spec.frames = 1;
  synth::generate_scene(spec, 17, data.path);
  pipeline::PipelineConfig config;
  pipeline::run_generate(config, data.path, boxes.path);
  // trigger-happy trace but no phase_1/ directory
  fs::create_directories(det.path);
  io::LossTrace trace;
  for (int e = 1; e <= 12; ++e) trace.entries.push_back({e, 10.0 - 0.5 * e});
  io::write_loss_trace(det.path / "loss.csv", trace);

  const int code = cli::run({"evolve", "--frames", data.path.string(),
                             "--boxes", boxes.path.string(), "--detector",
                             det.path.string(), "--out", out.path.string()});
  CHECK(code == 2);
  CHECK(fs::exists(out.path / "phase_log.txt"));  // flushed, empty
}

TEST_CASE("generate + evolve are byte-identical across runs") {
  TempDir data("det_data"), out1("det_out1"), out2("det_out2"),
      det("det_stub"), ev1("det_ev1"), ev2("det_ev2");
  auto spec = small_scene();
  synth::generate_scene(spec, 21, data.path);
  write_trigger_detector(det.path, {"frame_0000", "frame_0001"});

  pipeline::PipelineConfig config;
  config.workers = 2;
  pipeline::run_generate(config, data.path, out1.path);
  config.workers = 1;  // results must not depend on the worker count
  pipeline::run_generate(config, data.path, out2.path);
  auto snap2 = snapshot(out2.path);
  snap2.erase("manifest.json");  // differs: the config hash covers workers
  auto snap1 = snapshot(out1.path);
  const auto manifest1 = snap1.at("manifest.json");
  snap1.erase("manifest.json");
  CHECK(snap1 == snap2);

  config.workers = 2;
  pipeline::run_generate(config, data.path, out2.path);
  CHECK(snapshot(out2.path).at("manifest.json") == manifest1);
  CHECK(snapshot(out1.path) == snapshot(out2.path));

  pipeline::run_evolve(config, data.path, out1.path, det.path, ev1.path);
  pipeline::run_evolve(config, data.path, out2.path, det.path, ev2.path);
  CHECK(snapshot(ev1.path) == snapshot(ev2.path));
}

TEST_CASE("cli: eval subcommand round trip on synthetic truth") {
  TempDir data("cli_data"), out("cli_out");
  auto spec = small_scene();
  spec.frames = 1;
  synth::generate_scene(spec, 25, data.path);
  pipeline::run_generate(pipeline::PipelineConfig{}, data.path, out.path);

  const int code = cli::run({"eval", "--pred", out.path.string(), "--truth",
                             (data.path / "truth").string(), "--iou", "bev",
                             "--out", (out.path / "report.json").string()});
  CHECK(code == 0);
  CHECK(fs::exists(out.path / "report.json"));

  CHECK(cli::run({"eval", "--pred", "/nonexistent", "--truth",
                  (data.path / "truth").string()}) == 2);
}

TEST_CASE("cli: synth subcommand with a spec file") {
  TempDir out("cli_synth");
  const auto spec_path = out.path / "scene.json";
  {
    std::ofstream spec(spec_path);
    spec << R"({"frames": 1, "objects_per_class": {"1": 1},
               "image_width": 320, "image_height": 180,
               "range_min": 8, "range_max": 15, "ground_points": 200})";
  }
  CHECK(cli::run({"synth", "--spec", spec_path.string(), "--seed", "1",
                  "--out", (out.path / "data").string()}) == 0);
  CHECK(fs::exists(out.path / "data" / "calibration.json"));
  CHECK(fs::exists(out.path / "data" / "frames" / "frame_0000" / "cloud.pcbf"));

  // bad spec: input error
  {
    std::ofstream spec(spec_path, std::ios::trunc);
    spec << R"({"frames": -3})";
  }
  CHECK(cli::run({"synth", "--spec", spec_path.string(), "--seed", "1",
                  "--out", (out.path / "data2").string()}) == 2);
}

TEST_CASE("generate: empty frame list yields an empty manifest") {
  TempDir data("gen_empty"), out("gen_empty_out");
  fs::create_directories(data.path / "frames");
  io::write_calibration(data.path / "calibration.json", {});
  pipeline::run_generate(pipeline::PipelineConfig{}, data.path, out.path);
  std::ifstream mf(out.path / "manifest.json");
  const std::string manifest((std::istreambuf_iterator<char>(mf)),
                             std::istreambuf_iterator<char>());
  CHECK(manifest.find("\"frames\": []") != std::string::npos);
}

TEST_CASE("cli: dataset root comes from config when --frames is omitted") {
  TempDir data("root_data"), out("root_out");
  auto spec = small_scene();
  spec.frames = 1;
  synth::generate_scene(spec, 77, data.path);
  const auto config_path = out.path / "config.json";
  {
    std::ofstream cfg(config_path);
    cfg << "{\"dataset_root\": \"" << data.path.string() << "\"}";
  }
  CHECK(cli::run({"generate", "--config", config_path.string(), "--out",
                  (out.path / "boxes").string()}) == 0);
  CHECK(fs::exists(out.path / "boxes" / "frame_0000.boxes"));

  // neither --frames nor dataset_root: input error
  CHECK(cli::run({"generate", "--out", (out.path / "boxes2").string()}) == 2);
}

TEST_CASE("pipeline config: load, defaults, unknown keys, hashing") {
  TempDir tmp("config");
  const auto path = tmp.path / "config.json";
  {
    std::ofstream out(path);
    out << R"({"lambda": 0.05, "psi": 1.0, "enable_global_filter": false,
               "class_table": {"1": "vehicle"}})";
  }
  const auto config = pipeline::PipelineConfig::load(path);
  CHECK(config.lambda == 0.05);
  CHECK(config.psi == 1.0);
  CHECK_FALSE(config.enable_global_filter);
  CHECK(config.k_neighbors == 16);  // untouched default
  CHECK(config.hash() != pipeline::PipelineConfig{}.hash());
  CHECK(config.hash().size() == 16);

  {
    std::ofstream out(path, std::ios::trunc);
    out << R"({"lambda": 0.05, "typo_key": 1})";
  }
  CHECK_THROWS_AS(pipeline::PipelineConfig::load(path), ConfigError);

  {
    std::ofstream out(path, std::ios::trunc);
    out << R"({"lambda": -1.0})";
  }
  CHECK_THROWS_AS(pipeline::PipelineConfig::load(path), ConfigError);

  {
    std::ofstream out(path, std::ios::trunc);
    out << R"({"merge_rule": "sometimes"})";
  }
  CHECK_THROWS_AS(pipeline::PipelineConfig::load(path), ConfigError);
}
