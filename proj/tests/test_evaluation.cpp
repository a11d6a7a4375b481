// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fusebox/errors.hpp"
#include "fusebox/evaluation.hpp"
#include "fusebox/reference.hpp"
#include "fusebox/rng.hpp"
#include "test_util.hpp"

using namespace fusebox;

namespace {

io::BoxRecord make_record(const std::string& frame, int class_id, double x,
                          double y, double score, double length = 4.0,
                          double width = 2.0, double yaw = 0.0) {
  io::BoxRecord rec;
  rec.frame_id = frame;
  rec.box.class_id = class_id;
  rec.box.center = {x, y, 0.9};
  rec.box.length = length;
  rec.box.width = width;
  rec.box.height = 1.8;
  rec.box.yaw = yaw;
  rec.box.score = score;
  return rec;
}

const std::vector<eval::RangeBin> kBins = {{0, 30}, {30, 50}, {50, 80}};

}  // namespace

TEST_CASE("bins_from_edges builds the partition") {
  const std::vector<double> edges = {0, 30, 50, 80};
  const auto bins = eval::bins_from_edges(edges);
  REQUIRE(bins.size() == 3);
  CHECK(bins[0].lo == 0);
  CHECK(bins[2].hi == 80);
  const std::vector<double> bad = {0, 30, 30};
  CHECK_THROWS_AS(eval::bins_from_edges(bad), ConfigError);
}

TEST_CASE("evaluate_ap: predictions identical to truth give AP 1 everywhere") {
  std::vector<io::BoxRecord> truths;
  truths.push_back(make_record("f0", 1, 10, 0, 1.0));
  truths.push_back(make_record("f0", 1, 40, 5, 1.0));
  truths.push_back(make_record("f1", 2, 60, -10, 1.0, 0.7, 0.7));
  const auto report =
      eval::evaluate_ap(truths, truths, 0.25, kBins, eval::IouKind::kBev);
  for (const auto& cr : report.classes) {
    CHECK(cr.overall.ap == doctest::Approx(1.0));
    CHECK(cr.overall.fn == 0);
    CHECK(cr.overall.fp == 0);
    for (const auto& bin : cr.bins) {
      if (bin.truths > 0) CHECK(bin.ap == doctest::Approx(1.0));
    }
  }
  CHECK(report.mean_ap == doctest::Approx(1.0));
}

TEST_CASE("evaluate_ap: zero predictions give AP 0 and FN = |truth|") {
  std::vector<io::BoxRecord> truths;
  truths.push_back(make_record("f0", 1, 10, 0, 1.0));
  truths.push_back(make_record("f0", 1, 12, 6, 1.0));
  const auto report =
      eval::evaluate_ap({}, truths, 0.25, kBins, eval::IouKind::kBev);
  REQUIRE(report.classes.size() == 1);
  CHECK(report.classes[0].overall.ap == 0.0);
  CHECK(report.classes[0].overall.fn == 2);
  CHECK(report.mean_ap == 0.0);
}

TEST_CASE("evaluate_ap: hand-computed two-prediction PR curve") {
  // 2 truths; pred A (score 0.9) hits, pred B (score 0.8) misses:
  // PR points (1.0, 0.5) then (0.5, 0.5); all-point AP = 0.5
  std::vector<io::BoxRecord> truths;
  truths.push_back(make_record("f0", 1, 10, 0, 1.0));
  truths.push_back(make_record("f0", 1, 10, 8, 1.0));
  std::vector<io::BoxRecord> preds;
  preds.push_back(make_record("f0", 1, 10, 0, 0.9));
  preds.push_back(make_record("f0", 1, 20, -8, 0.8));  // overlaps nothing
  const auto report =
      eval::evaluate_ap(preds, truths, 0.25, kBins, eval::IouKind::kBev);
  REQUIRE(report.classes.size() == 1);
  CHECK(report.classes[0].overall.ap == doctest::Approx(0.5));
  CHECK(report.classes[0].overall.tp == 1);
  CHECK(report.classes[0].overall.fp == 1);
  CHECK(report.classes[0].overall.fn == 1);

  // cross-check with the brute-force slice
  const auto brute = ref::ap_bruteforce(preds, truths, 0.25, 1, 0.0, 80.0,
                                        eval::IouKind::kBev);
  CHECK(brute.ap == doctest::Approx(0.5));
}

TEST_CASE("evaluate_ap: fixed-grid interpolation protocols") {
  // same fixture as the hand-computed case: envelope is 1.0 up to recall
  // 0.5, then 0. 11-point: recalls {0,0.1,...,0.5} see precision 1 -> 6/11.
  // 40-point: recalls {1/40..20/40} see precision 1 -> 20/40.
  std::vector<io::BoxRecord> truths;
  truths.push_back(make_record("f0", 1, 10, 0, 1.0));
  truths.push_back(make_record("f0", 1, 10, 8, 1.0));
  std::vector<io::BoxRecord> preds;
  preds.push_back(make_record("f0", 1, 10, 0, 0.9));
  preds.push_back(make_record("f0", 1, 20, -8, 0.8));

  const auto eleven =
      eval::evaluate_ap(preds, truths, 0.25, kBins, eval::IouKind::kBev,
                        eval::ApInterpolation::kElevenPoint);
  CHECK(eleven.classes[0].overall.ap == doctest::Approx(6.0 / 11.0));
  const auto forty =
      eval::evaluate_ap(preds, truths, 0.25, kBins, eval::IouKind::kBev,
                        eval::ApInterpolation::kFortyPoint);
  CHECK(forty.classes[0].overall.ap == doctest::Approx(0.5));
  // a perfect detector scores 1.0 under every protocol
  const auto perfect =
      eval::evaluate_ap(truths, truths, 0.25, kBins, eval::IouKind::kBev,
                        eval::ApInterpolation::kElevenPoint);
  CHECK(perfect.classes[0].overall.ap == doctest::Approx(1.0));
}

TEST_CASE("evaluate_ap: matching is per frame") {
  std::vector<io::BoxRecord> truths = {make_record("f0", 1, 10, 0, 1.0)};
  std::vector<io::BoxRecord> preds = {make_record("f1", 1, 10, 0, 0.9)};
  const auto report =
      eval::evaluate_ap(preds, truths, 0.25, kBins, eval::IouKind::kBev);
  CHECK(report.classes[0].overall.tp == 0);
  CHECK(report.classes[0].overall.fp == 1);
}

TEST_CASE("evaluate_ap: objects land in their range bin") {
  std::vector<io::BoxRecord> truths = {
      make_record("f0", 1, 10, 0, 1.0),   // near
      make_record("f0", 1, 40, 0, 1.0),   // middle
      make_record("f0", 1, 70, 0, 1.0)};  // far
  const auto report =
      eval::evaluate_ap(truths, truths, 0.25, kBins, eval::IouKind::kBev);
  REQUIRE(report.classes.size() == 1);
  for (const auto& bin : report.classes[0].bins) {
    CHECK(bin.truths == 1);
    CHECK(bin.ap == doctest::Approx(1.0));
  }
}

TEST_CASE("evaluate_ap: 3D flag exercises vertical overlap") {
  auto truth = make_record("f0", 1, 10, 0, 1.0);
  auto pred = truth;
  pred.box.center.z += 1.4;  // mostly disjoint vertically
  const auto report_bev = eval::evaluate_ap(
      std::vector{pred}, std::vector{truth}, 0.25, kBins, eval::IouKind::kBev);
  const auto report_3d = eval::evaluate_ap(
      std::vector{pred}, std::vector{truth}, 0.25, kBins, eval::IouKind::k3D);
  CHECK(report_bev.classes[0].overall.tp == 1);
  CHECK(report_3d.classes[0].overall.tp == 0);
}

TEST_CASE("evaluate_ap matches the brute-force evaluator exactly") {
  Rng rng(90);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<io::BoxRecord> truths;
    std::vector<io::BoxRecord> preds;
    const char* frames[2] = {"f0", "f1"};
    for (int class_id = 1; class_id <= 2; ++class_id) {
      const int n_truth = static_cast<int>(rng.uniform_int(0, 6));
      for (int i = 0; i < n_truth; ++i) {
        truths.push_back(make_record(
            frames[rng.uniform_int(0, 1)], class_id, rng.uniform(5, 75),
            rng.uniform(-10, 10), 1.0, rng.uniform(2, 5), rng.uniform(1, 2),
            rng.uniform(-3, 3)));
      }
      const int n_pred = static_cast<int>(rng.uniform_int(0, 6));
      for (int i = 0; i < n_pred; ++i) {
        io::BoxRecord rec;
        if (!truths.empty() && rng.uniform() < 0.7) {
          rec = truths[static_cast<std::size_t>(
              rng.uniform_int(0, static_cast<std::int64_t>(truths.size()) - 1))];
          rec.box.center.x += rng.uniform(-2, 2);
          rec.box.center.y += rng.uniform(-2, 2);
          rec.box.class_id = class_id;
        } else {
          rec = make_record(frames[rng.uniform_int(0, 1)], class_id,
                            rng.uniform(5, 75), rng.uniform(-10, 10), 1.0);
        }
        rec.box.score = rng.uniform(0.05, 1.0);
        preds.push_back(rec);
      }
    }

    const auto report =
        eval::evaluate_ap(preds, truths, 0.25, kBins, eval::IouKind::kBev);
    for (const auto& cr : report.classes) {
      for (const auto& bin : cr.bins) {
        const auto brute =
            ref::ap_bruteforce(preds, truths, 0.25, cr.class_id, bin.bin.lo,
                               bin.bin.hi, eval::IouKind::kBev);
        CHECK(bin.tp == brute.tp);
        CHECK(bin.fp == brute.fp);
        CHECK(bin.fn == brute.fn);
        CHECK(bin.ap == doctest::Approx(brute.ap).epsilon(1e-12));
      }
      const auto overall = ref::ap_bruteforce(
          preds, truths, 0.25, cr.class_id, 0.0, 80.0, eval::IouKind::kBev);
      CHECK(cr.overall.ap == doctest::Approx(overall.ap).epsilon(1e-12));
    }
  }
}

TEST_CASE("format_report mentions class names and mAP") {
  std::vector<io::BoxRecord> truths = {make_record("f0", 1, 10, 0, 1.0)};
  const auto report =
      eval::evaluate_ap(truths, truths, 0.25, kBins, eval::IouKind::kBev);
  const auto text = eval::format_report(report, {{1, "vehicle"}});
  CHECK(text.find("vehicle") != std::string::npos);
  CHECK(text.find("mAP") != std::string::npos);
}
