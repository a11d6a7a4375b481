// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "fusebox/boxfit.hpp"
#include "fusebox/errors.hpp"
#include "fusebox/geometry.hpp"
#include "fusebox/rng.hpp"
#include "test_util.hpp"

using namespace fusebox;
using test::rect_boundary_distance;
using test::sample_lshape;
using test::yaw_error_mod90;

TEST_CASE("fit: dense axis-aligned 4x2 perimeter") {
  Rng rng(1);
  const auto sample = sample_lshape(rng, 4.0, 2.0, 0.0, 0.0, 0.0, 0.05, 0.0,
                                    /*all_four_sides=*/true);
  const auto fit = boxfit::fit_bev_rectangle(sample.points);
  REQUIRE_FALSE(fit.degenerate);
  CHECK(yaw_error_mod90(fit.box.yaw, 0.0) < 1e-9);
  CHECK(fit.box.length == doctest::Approx(4.0).epsilon(0.005));
  CHECK(fit.box.width == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("fit: same rectangle rotated 30 degrees") {
  Rng rng(2);
  const double yaw = 30.0 * std::numbers::pi / 180.0;
  const auto sample = sample_lshape(rng, 4.0, 2.0, 5.0, -2.0, yaw, 0.05, 0.0,
                                    /*all_four_sides=*/true);
  const auto fit = boxfit::fit_bev_rectangle(sample.points);
  REQUIRE_FALSE(fit.degenerate);
  CHECK(yaw_error_mod90(fit.box.yaw, yaw) < 1.0 * std::numbers::pi / 180.0 + 1e-12);
  CHECK(fit.box.length == doctest::Approx(4.0).epsilon(0.02));
  CHECK(fit.box.width == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("fit: two adjacent sides put fitted edges on the samples") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const auto sample = sample_lshape(rng, rng.uniform(3.5, 5.0),
                                      rng.uniform(1.6, 2.2), rng.uniform(-20, 20),
                                      rng.uniform(-20, 20), yaw, 0.1, 0.0);
    const auto fit = boxfit::fit_bev_rectangle(sample.points);
    REQUIRE_FALSE(fit.degenerate);
    for (const auto& p : sample.points) {
      CHECK(rect_boundary_distance(fit.box, p.x, p.y) < 0.05);
    }
  }
}

TEST_CASE("fit: every input point lies inside the fitted rectangle") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto sample = sample_lshape(
        rng, rng.uniform(1.0, 6.0), rng.uniform(0.5, 2.5), rng.uniform(-30, 30),
        rng.uniform(-30, 30), rng.uniform(-3, 3), 0.15, 0.05);
    const auto fit = boxfit::fit_bev_rectangle(sample.points);
    REQUIRE_FALSE(fit.degenerate);
    const double c = std::cos(fit.box.yaw);
    const double s = std::sin(fit.box.yaw);
    for (const auto& p : sample.points) {
      const double lx = c * (p.x - fit.box.cx) + s * (p.y - fit.box.cy);
      const double ly = -s * (p.x - fit.box.cx) + c * (p.y - fit.box.cy);
      CHECK(std::abs(lx) <= fit.box.length / 2.0 + 1e-9);
      CHECK(std::abs(ly) <= fit.box.width / 2.0 + 1e-9);
    }
  }
}

TEST_CASE("fit: translation and rotation equivariance") {
  Rng rng(5);
  const auto sample =
      sample_lshape(rng, 4.4, 1.9, 2.0, 1.0, 0.35, 0.1, 0.02);
  const auto base = boxfit::fit_bev_rectangle(sample.points);
  REQUIRE_FALSE(base.degenerate);

  const geom::Point3 shift{5.25, -3.5, 0.0};
  std::vector<geom::Point3> shifted;
  for (const auto& p : sample.points) shifted.push_back(p + shift);
  const auto moved = boxfit::fit_bev_rectangle(shifted);
  CHECK(moved.box.cx == doctest::Approx(base.box.cx + shift.x).epsilon(1e-6));
  CHECK(moved.box.cy == doctest::Approx(base.box.cy + shift.y).epsilon(1e-6));
  CHECK(moved.box.length == doctest::Approx(base.box.length).epsilon(1e-9));
  CHECK(moved.box.width == doctest::Approx(base.box.width).epsilon(1e-9));
  CHECK(yaw_error_mod90(moved.box.yaw, base.box.yaw) < 1e-9);

  for (const double theta : {0.2, -0.9, 1.4}) {
    std::vector<geom::Point3> rotated;
    for (const auto& p : sample.points)
      rotated.push_back(test::rotate_z(p, theta));
    const auto rot = boxfit::fit_bev_rectangle(rotated);
    // fitted yaw moves with the applied rotation, modulo the 90-degree
    // heading ambiguity and the 1-degree grid
    CHECK(yaw_error_mod90(rot.box.yaw, base.box.yaw + theta) <
          1.5 * std::numbers::pi / 180.0);
  }
}

TEST_CASE("fit: degenerate inputs fall back") {
  CHECK(boxfit::fit_bev_rectangle({}).degenerate);

  const std::vector<geom::Point3> two = {{0, 0, 0}, {1, 0, 0}};
  CHECK(boxfit::fit_bev_rectangle(two).degenerate);

  std::vector<geom::Point3> line;
  for (int i = 0; i < 30; ++i) line.push_back({0.1 * i, 0.2 * i, 0.0});
  const auto fit = boxfit::fit_bev_rectangle(line);
  CHECK(fit.degenerate);
  // centroid preserved for the caller's fallback box
  CHECK(fit.box.cx == doctest::Approx(0.1 * 29 / 2.0));
}

TEST_CASE("apply_size_prior: above-minimum boxes pass through") {
  const auto priors = boxfit::SizePriorTable::defaults();
  const geom::BevBox box{10.0, 5.0, 4.5, 1.8, 0.3};
  const auto out = boxfit::apply_size_prior(box, 1, priors);
  CHECK(out.cx == box.cx);
  CHECK(out.cy == box.cy);
  CHECK(out.length == box.length);
  CHECK(out.width == box.width);
}

TEST_CASE("apply_size_prior: tiny vehicle grows to prior, near edge fixed") {
  const auto priors = boxfit::SizePriorTable::defaults();
  const geom::Point3 sensor{0.0, 0.0, 0.0};
  const geom::BevBox small{12.0, 4.0, 1.0, 0.5, 0.4};
  const auto grown = boxfit::apply_size_prior(small, 1, priors, sensor);
  CHECK(grown.length == doctest::Approx(4.6));
  CHECK(grown.width == doctest::Approx(1.9));
  CHECK(grown.yaw == small.yaw);

  // oracle: rebuild the four edge midpoints, find the one nearest the
  // sensor, and require it to reappear among the grown box's midpoints
  CHECK(test::anchored_edge_displacement(small, grown, sensor) < 1e-6);
}

TEST_CASE("apply_size_prior: pedestrian fit grows with the same anchoring") {
  const auto priors = boxfit::SizePriorTable::defaults();
  const geom::BevBox tiny{8.0, -6.0, 0.2, 0.1, -1.2};
  const auto grown = boxfit::apply_size_prior(tiny, 2, priors);
  CHECK(grown.length == doctest::Approx(0.7));
  CHECK(grown.width == doctest::Approx(0.7));
  CHECK(test::anchored_edge_displacement(tiny, grown, {0, 0, 0}) < 1e-6);
}

TEST_CASE("apply_size_prior: idempotent and never shrinking") {
  Rng rng(6);
  const auto priors = boxfit::SizePriorTable::defaults();
  for (int trial = 0; trial < 100; ++trial) {
    const int class_id = static_cast<int>(rng.uniform_int(1, 3));
    const geom::BevBox box{rng.uniform(-30, 30), rng.uniform(-30, 30),
                           rng.uniform(0.05, 6.0), rng.uniform(0.05, 2.5),
                           rng.uniform(-3.0, 3.0)};
    const auto once = boxfit::apply_size_prior(box, class_id, priors);
    CHECK(once.length >= box.length - 1e-12);
    CHECK(once.width >= box.width - 1e-12);
    const auto twice = boxfit::apply_size_prior(once, class_id, priors);
    CHECK(twice.cx == doctest::Approx(once.cx).epsilon(1e-12));
    CHECK(twice.cy == doctest::Approx(once.cy).epsilon(1e-12));
    CHECK(twice.length == once.length);
    CHECK(twice.width == once.width);
  }
}

TEST_CASE("apply_size_prior: unknown class is a configuration error") {
  const auto priors = boxfit::SizePriorTable::defaults();
  CHECK_THROWS_AS(
      boxfit::apply_size_prior(geom::BevBox{0, 0, 1, 1, 0}, 99, priors),
      ConfigError);
}

TEST_CASE("lift_to_3d: extent, min-height rule, single point") {
  const auto priors = boxfit::SizePriorTable::defaults();
  const geom::BevBox bev{3.0, 4.0, 0.7, 0.7, 0.0};

  std::vector<geom::Point3> ped;
  for (double z = 0.0; z <= 1.7001; z += 0.1) ped.push_back({3.0, 4.0, z});
  auto box = boxfit::lift_to_3d(bev, ped, 2, priors);
  CHECK(box.height == doctest::Approx(1.7));
  CHECK(box.center.z == doctest::Approx(0.85));

  // 0.2 m extent with vehicle min height 1.0: top preserved at max z
  const std::vector<geom::Point3> flat = {{0, 0, 1.0}, {0, 0, 1.2}};
  box = boxfit::lift_to_3d(geom::BevBox{0, 0, 4.6, 1.9, 0}, flat, 1, priors);
  CHECK(box.height == doctest::Approx(1.0));
  CHECK(box.z_top() == doctest::Approx(1.2));

  const std::vector<geom::Point3> one = {{1, 1, 0.5}};
  box = boxfit::lift_to_3d(geom::BevBox{1, 1, 1.8, 0.6, 0}, one, 3, priors);
  CHECK(box.height == doctest::Approx(1.0));  // cyclist min height
  CHECK(box.z_top() == doctest::Approx(0.5));
}

TEST_CASE("size prior file parsing") {
  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "fusebox_priors.txt";
  {
    std::ofstream out(path, std::ios::trunc);
    out << "# class_id min_l min_w min_h prior_l prior_w prior_h\n";
    out << "1 3.0 1.4 1.0 4.6 1.9 1.7\n";
    out << "7 0.5 0.5 0.5 1.0 1.0 1.0\n";
  }
  const auto priors = boxfit::SizePriorTable::load(path);
  CHECK(priors.at(1).prior_length == 4.6);
  CHECK(priors.at(7).min_height == 0.5);
  CHECK_THROWS_AS(priors.at(2), ConfigError);  // file replaces the defaults

  {
    std::ofstream out(path, std::ios::trunc);
    out << "1 3.0 1.4\n";
  }
  CHECK_THROWS_AS(boxfit::SizePriorTable::load(path), IoError);
  fs::remove(path);
}

TEST_CASE("generate_initial_boxes: empty input, synthetic car, unanchored") {
  const auto priors = boxfit::SizePriorTable::defaults();
  boxfit::BoxGenParams params;
  CHECK(boxfit::generate_initial_boxes({}, params, priors).empty());

  // one synthetic car instance: sparse real + dense pseudo surface samples
  Rng rng(8);
  geom::Box3D truth;
  truth.center = {14.0, 5.0, 0.85};
  truth.length = 4.6;
  truth.width = 1.9;
  truth.height = 1.7;
  truth.yaw = 0.4;
  truth.class_id = 1;

  fusion::InstanceCloud cloud;
  cloud.key = {"cam0", 1};
  cloud.class_id = 1;
  const double c = std::cos(truth.yaw);
  const double s = std::sin(truth.yaw);
  auto emit = [&](double lx, double ly, double lz, bool real) {
    geom::Point3 p{truth.center.x + c * lx - s * ly,
                   truth.center.y + s * lx + c * ly, truth.center.z + lz};
    fusion::LabeledPoint lp{p, 1, cloud.key,
                            real ? fusion::PointOrigin::kReal
                                 : fusion::PointOrigin::kPseudo};
    (real ? cloud.real : cloud.pseudo).push_back(lp);
  };
  // two visible faces (toward the sensor): local -x face and -y face
  for (int i = 0; i < 400; ++i) {
    const double along = rng.uniform(-2.3, 2.3);
    const double up = rng.uniform(-0.85, 0.85);
    emit(along, -0.95, up, false);
    emit(-2.3, rng.uniform(-0.95, 0.95) * 0.5, up, false);
    if (i % 16 == 0) {
      emit(along, -0.95, up, true);
      emit(-2.3, rng.uniform(-0.95, 0.95) * 0.5, up, true);
    }
  }

  boxfit::BoxGenStats stats;
  const auto boxes = boxfit::generate_initial_boxes(
      std::vector{cloud}, params, priors, &stats);
  REQUIRE(boxes.size() == 1);
  CHECK(stats.instances == 1);
  CHECK(boxes[0].score == 1.0);
  CHECK(boxes[0].class_id == 1);
  CHECK(geom::bev_iou(boxes[0].bev(), truth.bev()) >= 0.7);

  // unanchored instance (no real points) is absent by default
  fusion::InstanceCloud orphan = cloud;
  orphan.real.clear();
  orphan.key = {"cam0", 2};
  const auto kept = boxfit::generate_initial_boxes(
      std::vector{cloud, orphan}, params, priors, &stats);
  CHECK(kept.size() == 1);
  CHECK(stats.unanchored == 1);

  params.keep_unanchored = true;
  const auto with_orphan = boxfit::generate_initial_boxes(
      std::vector{cloud, orphan}, params, priors, &stats);
  CHECK(with_orphan.size() == 2);
}

TEST_CASE("generate_initial_boxes: degenerate instance takes min class size") {
  const auto priors = boxfit::SizePriorTable::defaults();
  boxfit::BoxGenParams params;
  params.enable_global_filter = false;

  fusion::InstanceCloud cloud;
  cloud.key = {"cam0", 1};
  cloud.class_id = 2;
  for (int i = 0; i < 2; ++i) {
    cloud.real.push_back({{5.0, 0.1 * i, 0.0}, 2, cloud.key,
                          fusion::PointOrigin::kReal});
  }
  boxfit::BoxGenStats stats;
  const auto boxes =
      boxfit::generate_initial_boxes(std::vector{cloud}, params, priors, &stats);
  REQUIRE(boxes.size() == 1);
  CHECK(boxes[0].score == 0.5);
  CHECK(stats.fallback_boxes == 1);
  CHECK(boxes[0].length == doctest::Approx(0.4));  // pedestrian minimum
  CHECK(boxes[0].width == doctest::Approx(0.4));
  CHECK(boxes[0].center.x == doctest::Approx(5.0));
}
