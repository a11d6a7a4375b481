// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusebox/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>

#include "fusebox/errors.hpp"

namespace fusebox::evolve {

void EvolutionParams::validate() const {
  if (!(psi > 0.0)) throw ConfigError("evolution: psi must be > 0");
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0))
    throw ConfigError("evolution: iou_threshold must be in [0,1]");
  if (window < 3) throw ConfigError("evolution: window must be >= 3");
  if (max_update_rounds < 0)
    throw ConfigError("evolution: max_update_rounds must be >= 0");
}

std::optional<double> loss_statistic(const io::LossTrace& trace, int epoch,
                                     int window) {
  // need losses for every epoch in [epoch - window, epoch]
  std::vector<double> losses(static_cast<std::size_t>(window) + 1);
  for (int e = epoch - window; e <= epoch; ++e) {
    const auto it = std::find_if(
        trace.entries.begin(), trace.entries.end(),
        [e](const io::LossTrace::Entry& entry) { return entry.epoch == e; });
    if (it == trace.entries.end()) return std::nullopt;
    losses[static_cast<std::size_t>(e - (epoch - window))] = it->loss;
  }
  double mean = 0.0;
  for (int i = 1; i <= window; ++i)
    mean += losses[static_cast<std::size_t>(i)] -
            losses[static_cast<std::size_t>(i - 1)];
  mean /= static_cast<double>(window);
  double var = 0.0;
  for (int i = 1; i <= window; ++i) {
    const double d = losses[static_cast<std::size_t>(i)] -
                     losses[static_cast<std::size_t>(i - 1)] - mean;
    var += d * d;
  }
  return var / static_cast<double>(window);
}

double convergence_threshold(double psi, int phase, int epoch,
                             DecayKind decay) {
  const double p = static_cast<double>(phase);
  if (decay == DecayKind::kEuler) return psi * p * std::exp(-p);
  return psi * p * std::pow(static_cast<double>(epoch), -p);
}

bool convergence_check(double t_e, double t_prev, double psi, int phase,
                       int epoch, DecayKind decay) {
  return std::abs(t_e - t_prev) <=
         convergence_threshold(psi, phase, epoch, decay);
}

std::vector<geom::Point3> densify(std::span<const geom::Point3> real,
                                  std::span<const geom::Point3> pseudo_pool,
                                  std::span<const geom::Box3D> boxes) {
  std::vector<geom::Point3> dense(real.begin(), real.end());
  if (boxes.empty() || pseudo_pool.empty()) return dense;

  // same containment rule as geom::points_in_box, with the box frames
  // precomputed once
  struct BoxFrame {
    double cx, cy, cz, c, s, hl, hw, hh;
  };
  constexpr double kTol = 1e-9;
  std::vector<BoxFrame> frames;
  frames.reserve(boxes.size());
  for (const geom::Box3D& box : boxes) {
    frames.push_back({box.center.x, box.center.y, box.center.z,
                      std::cos(box.yaw), std::sin(box.yaw),
                      box.length * 0.5 + kTol, box.width * 0.5 + kTol,
                      box.height * 0.5 + kTol});
  }

  std::vector<char> inside(pseudo_pool.size(), 0);
  const std::int64_t n = static_cast<std::int64_t>(pseudo_pool.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const geom::Point3& p = pseudo_pool[static_cast<std::size_t>(i)];
    for (const BoxFrame& f : frames) {
      const double dx = p.x - f.cx;
      const double dy = p.y - f.cy;
      const double dz = p.z - f.cz;
      const double lx = f.c * dx + f.s * dy;
      const double ly = -f.s * dx + f.c * dy;
      if (std::abs(lx) <= f.hl && std::abs(ly) <= f.hw && std::abs(dz) <= f.hh) {
        inside[static_cast<std::size_t>(i)] = 1;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < pseudo_pool.size(); ++i)
    if (inside[i]) dense.push_back(pseudo_pool[i]);
  return dense;
}

std::vector<geom::Box3D> merge_boxes(std::span<const geom::Box3D> old_boxes,
                                     std::span<const geom::Box3D> new_boxes,
                                     double v, MergeRule rule,
                                     MergeStats* stats) {
  std::vector<geom::Box3D> result;
  std::vector<char> reserved(old_boxes.size(), 0);

  // per new box: best same-class IoU over the old set and its argmax index
  std::vector<double> i_max(new_boxes.size(), 0.0);
  std::vector<std::size_t> idx(new_boxes.size(), 0);
  const std::int64_t n = static_cast<std::int64_t>(new_boxes.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const geom::Box3D& nb = new_boxes[static_cast<std::size_t>(i)];
    double best = 0.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < old_boxes.size(); ++j) {
      const double iou = old_boxes[j].class_id == nb.class_id
                             ? geom::iou3d(nb, old_boxes[j])
                             : 0.0;
      if (iou > best) {  // ties resolve to the lowest j
        best = iou;
        best_j = j;
      }
    }
    i_max[static_cast<std::size_t>(i)] = best;
    idx[static_cast<std::size_t>(i)] = best_j;
  }

  MergeStats ms;
  for (std::size_t i = 0; i < new_boxes.size(); ++i) {
    if (old_boxes.empty() || i_max[i] < v) {
      result.push_back(new_boxes[i]);
      ++ms.added;
    } else {
      reserved[idx[i]] = 1;
    }
  }

  if (rule == MergeRule::kAlgorithm) {
    for (std::size_t j = 0; j < old_boxes.size(); ++j) {
      if (reserved[j]) {
        result.push_back(old_boxes[j]);
        ++ms.reserved;
      }
    }
  } else {
    // prose variant: keep old boxes that no new box overlaps at IoU >= v
    for (std::size_t j = 0; j < old_boxes.size(); ++j) {
      bool overlapped = false;
      for (std::size_t i = 0; i < new_boxes.size(); ++i) {
        if (old_boxes[j].class_id != new_boxes[i].class_id) continue;
        if (geom::iou3d(new_boxes[i], old_boxes[j]) >= v) {
          overlapped = true;
          break;
        }
      }
      if (!overlapped) {
        result.push_back(old_boxes[j]);
        ++ms.reserved;
      }
    }
  }
  ms.dropped = old_boxes.size() - ms.reserved;
  if (stats) *stats = ms;
  return result;
}

StubDetector::StubDetector(std::filesystem::path dir) : dir_(std::move(dir)) {
  const auto trace_path = dir_ / "loss.csv";
  if (!std::filesystem::exists(trace_path))
    throw IoError(trace_path.string() + ": missing detector loss trace");
  trace_ = io::load_loss_trace(trace_path);
}

std::vector<geom::Box3D> StubDetector::test(const std::string& frame_id,
                                            int phase,
                                            std::span<const geom::Point3>) {
  std::ostringstream name;
  name << "phase_" << phase;
  const auto path = dir_ / name.str() / (frame_id + ".boxes");
  if (!std::filesystem::exists(path))
    throw IoError(path.string() + ": missing detection file for phase " +
                  std::to_string(phase));
  std::vector<geom::Box3D> boxes;
  for (auto& rec : io::read_boxes(path)) boxes.push_back(std::move(rec.box));
  return boxes;
}

double StubDetector::loss(int epoch) {
  const auto it = std::find_if(
      trace_.entries.begin(), trace_.entries.end(),
      [epoch](const io::LossTrace::Entry& e) { return e.epoch == epoch; });
  if (it == trace_.entries.end()) {
    std::ostringstream os;
    os << dir_.string() << "/loss.csv: no loss recorded for epoch " << epoch;
    throw IoError(os.str());
  }
  return it->loss;
}

int StubDetector::max_epoch() const {
  return trace_.entries.empty() ? 0 : trace_.entries.back().epoch;
}

std::string PhaseLogEntry::to_line() const {
  std::ostringstream os;
  os << "epoch=" << epoch << " phase=" << phase << " added=" << stats.added
     << " reserved=" << stats.reserved << " dropped=" << stats.dropped;
  return os.str();
}

EvolutionResult run_evolution(
    std::vector<EvolutionFrame> frames, Detector& detector,
    const EvolutionParams& params, int max_epochs,
    const std::function<void(const PhaseLogEntry&)>& on_phase) {
  params.validate();
  EvolutionResult result;
  io::LossTrace trace;
  int phase = 1;
  std::optional<double> t_prev;

  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    trace.entries.push_back({epoch, detector.loss(epoch)});
    const std::optional<double> t_e =
        loss_statistic(trace, epoch, params.window);
    if (t_e && t_prev && phase <= params.max_update_rounds &&
        convergence_check(*t_e, *t_prev, params.psi, phase, epoch,
                          params.decay)) {
      MergeStats total;
      for (EvolutionFrame& frame : frames) {
        const auto dense = densify(frame.real, frame.pseudo_pool, frame.boxes);
        const auto detections = detector.test(frame.frame_id, phase, dense);
        MergeStats ms;
        frame.boxes = merge_boxes(frame.boxes, detections,
                                  params.iou_threshold, params.merge_rule, &ms);
        total.added += ms.added;
        total.reserved += ms.reserved;
        total.dropped += ms.dropped;
      }
      const PhaseLogEntry entry{epoch, phase, total};
      if (on_phase) on_phase(entry);
      result.log.push_back(entry);
      ++phase;
    }
    t_prev = t_e;
  }

  result.frames = std::move(frames);
  result.final_phase = phase;
  return result;
}

}  // namespace fusebox::evolve
