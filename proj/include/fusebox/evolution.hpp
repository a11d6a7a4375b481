// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fusebox/frame_io.hpp"
#include "fusebox/geometry.hpp"

namespace fusebox::evolve {

/// How to read the decay term in the stopping rule psi * p * e^-p.
enum class DecayKind {
  kEuler,  // e is Euler's number (default)
  kEpoch,  // e is the epoch index: psi * p * epoch^-p
};

/// Which boxes survive a merge.
enum class MergeRule {
  kAlgorithm,  // reserve the argmax-matched old boxes, drop unmatched ones
  kProse,      // discard overlapped old boxes, keep the rest
};

struct EvolutionParams {
  double psi = 0.1;            // exponential decay factor
  double iou_threshold = 0.2;  // v: new boxes below this are added
  int window = 5;              // W: epochs in the loss-difference variance
  int max_update_rounds = 1;   // phase cap; p stops growing past this
  DecayKind decay = DecayKind::kEuler;
  MergeRule merge_rule = MergeRule::kAlgorithm;

  void validate() const;
};

/// t_e: the population variance of the loss differences
/// { loss(i) - loss(i-1) : i in (e-W, e] }. Empty until every epoch in
/// [e-W, e] is present in the trace.
std::optional<double> loss_statistic(const io::LossTrace& trace, int epoch,
                                     int window);

/// The stopping threshold psi * p * e^-p (or psi * p * epoch^-p).
double convergence_threshold(double psi, int phase, int epoch, DecayKind decay);

/// True iff |t_e - t_prev| <= the threshold for the current phase.
bool convergence_check(double t_e, double t_prev, double psi, int phase,
                       int epoch, DecayKind decay);

/// Dense set: all real points plus every pool point inside at least one box.
/// Each pool point appears at most once. Real points come first, then pool
/// points in input order.
std::vector<geom::Point3> densify(std::span<const geom::Point3> real,
                                  std::span<const geom::Point3> pseudo_pool,
                                  std::span<const geom::Box3D> boxes);

struct MergeStats {
  std::size_t added = 0;
  std::size_t reserved = 0;
  std::size_t dropped = 0;
};

/// Merges new detections into the previous pseudo-box set by 3D IoU
/// (cross-class IoU counts as 0). A new box whose best same-class IoU
/// against the old set is below v is added; otherwise its argmax old box
/// (ties: lowest old index) is reserved. Under the algorithm rule, old boxes
/// matched by no new box are dropped; under the prose rule, old boxes are
/// dropped only when some new box overlaps them at IoU >= v. Result order:
/// added boxes first (new order), then reserved boxes (old order).
std::vector<geom::Box3D> merge_boxes(std::span<const geom::Box3D> old_boxes,
                                     std::span<const geom::Box3D> new_boxes,
                                     double v,
                                     MergeRule rule = MergeRule::kAlgorithm,
                                     MergeStats* stats = nullptr);

/// The detector contract: deterministic detections for a (frame, phase) and
/// a training-loss value per epoch. The shipped stub replays files.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<geom::Box3D> test(const std::string& frame_id, int phase,
                                        std::span<const geom::Point3> dense) = 0;
  virtual double loss(int epoch) = 0;
  /// Largest epoch the detector can report a loss for.
  virtual int max_epoch() const = 0;
};

/// File-backed stub: losses from a loss-trace CSV, detections from
/// <dir>/phase_<p>/<frame_id>.boxes. Throws IoError when a replay file is
/// missing.
class StubDetector : public Detector {
 public:
  explicit StubDetector(std::filesystem::path dir);

  std::vector<geom::Box3D> test(const std::string& frame_id, int phase,
                                std::span<const geom::Point3> dense) override;
  double loss(int epoch) override;
  int max_epoch() const override;

 private:
  std::filesystem::path dir_;
  io::LossTrace trace_;
};

struct EvolutionFrame {
  std::string frame_id;
  std::vector<geom::Point3> real;         // C_r
  std::vector<geom::Point3> pseudo_pool;  // C_d from fusion
  std::vector<geom::Box3D> boxes;         // L^(p-1), updated in place
};

struct PhaseLogEntry {
  int epoch = 0;
  int phase = 0;  // the phase whose boxes were just refined
  MergeStats stats;

  std::string to_line() const;
};

struct EvolutionResult {
  std::vector<EvolutionFrame> frames;
  std::vector<PhaseLogEntry> log;
  int final_phase = 1;
};

/// Runs the dynamic self-evolution loop: per epoch, ingest the loss; once
/// the stopping rule fires, densify each frame, query the detector, merge,
/// and advance the phase. Stops after max_epochs. Fully deterministic given
/// the trace and stub files. `on_phase` fires as each trigger completes, so
/// callers can flush the phase log before a later detector failure.
EvolutionResult run_evolution(
    std::vector<EvolutionFrame> frames, Detector& detector,
    const EvolutionParams& params, int max_epochs,
    const std::function<void(const PhaseLogEntry&)>& on_phase = {});

}  // namespace fusebox::evolve
