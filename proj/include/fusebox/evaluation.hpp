// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "fusebox/frame_io.hpp"
#include "fusebox/geometry.hpp"

namespace fusebox::eval {

enum class IouKind { kBev, k3D };

/// Area under the precision/recall curve: exact all-point interpolation, or
/// the fixed-recall-grid protocols (11-point Pascal style, 40-point KITTI
/// style).
enum class ApInterpolation { kAllPoint, kElevenPoint, kFortyPoint };

struct RangeBin {
  double lo = 0.0;
  double hi = 0.0;
};

/// Consecutive bins from edge values, e.g. {0,30,50,80} -> [0,30) [30,50)
/// [50,80).
std::vector<RangeBin> bins_from_edges(std::span<const double> edges);

struct BinStats {
  RangeBin bin;
  double ap = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t truths = 0;
};

struct ClassReport {
  int class_id = 0;
  std::vector<BinStats> bins;
  BinStats overall;  // the full [first_edge, last_edge) range
};

struct EvalReport {
  std::vector<ClassReport> classes;  // ascending class id
  double mean_ap = 0.0;              // mean of overall AP over classes with truths
};

/// Score-ranked greedy detection evaluation. Predictions sort by descending
/// score (ties keep input order) and match at most one unmatched truth of
/// the same class and frame at IoU >= iou_thresh. Boxes land in the range
/// bin of their own BEV center range.
EvalReport evaluate_ap(std::span<const io::BoxRecord> predictions,
                       std::span<const io::BoxRecord> truths,
                       double iou_thresh, std::span<const RangeBin> bins,
                       IouKind kind,
                       ApInterpolation interp = ApInterpolation::kAllPoint);

/// BEV range of a box center.
double center_range(const geom::Box3D& box);

/// Human-readable report lines.
std::string format_report(const EvalReport& report,
                          const std::map<int, std::string>& class_names);

}  // namespace fusebox::eval
