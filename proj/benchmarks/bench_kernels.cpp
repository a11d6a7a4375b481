// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0
//
// Parallel kernels vs their serial reference implementations. The reference
// versions are the same brute-force oracles the tests pin correctness
// against, so the speedup columns also document what the k-d tree and
// OpenMP buy.

#include <benchmark/benchmark.h>

#include <vector>

#include "fusebox/boxfit.hpp"
#include "fusebox/evolution.hpp"
#include "fusebox/filtering.hpp"
#include "fusebox/geometry.hpp"
#include "fusebox/reference.hpp"
#include "fusebox/rng.hpp"

using namespace fusebox;

namespace {

std::vector<geom::Point3> cloud(std::size_t n, double span, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<geom::Point3> pts(n);
  for (auto& p : pts)
    p = {20.0 + rng.uniform(-span, span), rng.uniform(-span, span),
         rng.uniform(-span, span)};
  return pts;
}

std::vector<geom::Box3D> scattered_boxes(int count) {
  Rng rng(5);
  std::vector<geom::Box3D> boxes;
  for (int i = 0; i < count; ++i) {
    geom::Box3D b;
    b.center = {20.0 + rng.uniform(-25.0, 25.0), rng.uniform(-25.0, 25.0), 0.0};
    b.length = 4.5;
    b.width = 2.0;
    b.height = 2.0;
    b.yaw = rng.uniform(-3.0, 3.0);
    boxes.push_back(b);
  }
  return boxes;
}

void BM_LocalRadiusFilter(benchmark::State& state) {
  const auto real = cloud(static_cast<std::size_t>(state.range(0)) / 8, 4.0, 1);
  const auto pseudo = cloud(static_cast<std::size_t>(state.range(0)), 4.0, 2);
  for (auto _ : state) {
    auto kept = filter::local_radius_keep_indices(real, pseudo, 0.01);
    benchmark::DoNotOptimize(kept);
  }
}
BENCHMARK(BM_LocalRadiusFilter)->Arg(2000)->Arg(20000);

void BM_LocalRadiusFilterReference(benchmark::State& state) {
  const auto real = cloud(static_cast<std::size_t>(state.range(0)) / 8, 4.0, 1);
  const auto pseudo = cloud(static_cast<std::size_t>(state.range(0)), 4.0, 2);
  for (auto _ : state) {
    auto kept = ref::local_radius_keep_bruteforce(real, pseudo, 0.01);
    benchmark::DoNotOptimize(kept);
  }
}
BENCHMARK(BM_LocalRadiusFilterReference)->Arg(2000)->Arg(20000);

void BM_StatisticalFilter(benchmark::State& state) {
  const auto pts = cloud(static_cast<std::size_t>(state.range(0)), 5.0, 3);
  for (auto _ : state) {
    auto kept = filter::statistical_keep_indices(pts, 16, 1.0);
    benchmark::DoNotOptimize(kept);
  }
}
BENCHMARK(BM_StatisticalFilter)->Arg(1000)->Arg(8000);

void BM_StatisticalFilterReference(benchmark::State& state) {
  const auto pts = cloud(static_cast<std::size_t>(state.range(0)), 5.0, 3);
  for (auto _ : state) {
    auto kept = ref::statistical_keep_bruteforce(pts, 16, 1.0);
    benchmark::DoNotOptimize(kept);
  }
}
BENCHMARK(BM_StatisticalFilterReference)->Arg(1000)->Arg(8000);

void BM_FitBevRectangle(benchmark::State& state) {
  const auto pts = cloud(static_cast<std::size_t>(state.range(0)), 2.0, 4);
  for (auto _ : state) {
    auto fit = boxfit::fit_bev_rectangle(pts);
    benchmark::DoNotOptimize(fit);
  }
}
BENCHMARK(BM_FitBevRectangle)->Arg(500)->Arg(5000);

void BM_FitBevRectangleReference(benchmark::State& state) {
  const auto pts = cloud(static_cast<std::size_t>(state.range(0)), 2.0, 4);
  for (auto _ : state) {
    auto fit = ref::fit_bev_rectangle_serial(pts);
    benchmark::DoNotOptimize(fit);
  }
}
BENCHMARK(BM_FitBevRectangleReference)->Arg(500)->Arg(5000);

void BM_Densify(benchmark::State& state) {
  const auto real = cloud(5000, 30.0, 6);
  const auto pool = cloud(static_cast<std::size_t>(state.range(0)), 30.0, 7);
  const auto boxes = scattered_boxes(12);
  for (auto _ : state) {
    auto dense = evolve::densify(real, pool, boxes);
    benchmark::DoNotOptimize(dense);
  }
}
BENCHMARK(BM_Densify)->Arg(20000)->Arg(100000);

void BM_DensifyReference(benchmark::State& state) {
  const auto real = cloud(5000, 30.0, 6);
  const auto pool = cloud(static_cast<std::size_t>(state.range(0)), 30.0, 7);
  const auto boxes = scattered_boxes(12);
  for (auto _ : state) {
    auto dense = ref::densify_bruteforce(real, pool, boxes);
    benchmark::DoNotOptimize(dense);
  }
}
BENCHMARK(BM_DensifyReference)->Arg(20000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
