// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusebox/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "fusebox/errors.hpp"

namespace fusebox::eval {

namespace {

double box_iou(const geom::Box3D& a, const geom::Box3D& b, IouKind kind) {
  return kind == IouKind::kBev ? geom::bev_iou(a.bev(), b.bev())
                               : geom::iou3d(a, b);
}

bool in_bin(const geom::Box3D& box, const RangeBin& bin) {
  const double r = center_range(box);
  return r >= bin.lo && r < bin.hi;
}

// AP plus operating-point counts for one (class, bin) slice.
BinStats evaluate_slice(std::span<const io::BoxRecord> preds,
                        std::span<const io::BoxRecord> truths,
                        double iou_thresh, const RangeBin& bin, int class_id,
                        IouKind kind, ApInterpolation interp) {
  std::vector<std::size_t> pred_idx;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].box.class_id == class_id && in_bin(preds[i].box, bin))
      pred_idx.push_back(i);
  }
  std::vector<std::size_t> truth_idx;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i].box.class_id == class_id && in_bin(truths[i].box, bin))
      truth_idx.push_back(i);
  }

  // descending score; equal scores keep input order
  std::stable_sort(pred_idx.begin(), pred_idx.end(),
                   [&preds](std::size_t a, std::size_t b) {
                     return preds[a].box.score > preds[b].box.score;
                   });

  std::vector<char> truth_used(truth_idx.size(), 0);
  std::vector<char> is_tp(pred_idx.size(), 0);
  for (std::size_t r = 0; r < pred_idx.size(); ++r) {
    const io::BoxRecord& pred = preds[pred_idx[r]];
    double best = 0.0;
    std::size_t best_t = truth_idx.size();
    for (std::size_t t = 0; t < truth_idx.size(); ++t) {
      if (truth_used[t]) continue;
      const io::BoxRecord& truth = truths[truth_idx[t]];
      if (truth.frame_id != pred.frame_id) continue;
      const double iou = box_iou(pred.box, truth.box, kind);
      if (iou > best) {  // ties resolve to the lowest truth index
        best = iou;
        best_t = t;
      }
    }
    if (best >= iou_thresh && best > 0.0 && best_t < truth_idx.size()) {
      truth_used[best_t] = 1;
      is_tp[r] = 1;
    }
  }

  BinStats stats;
  stats.bin = bin;
  stats.truths = truth_idx.size();
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::vector<double> recall(pred_idx.size());
  std::vector<double> precision(pred_idx.size());
  for (std::size_t r = 0; r < pred_idx.size(); ++r) {
    if (is_tp[r])
      ++tp;
    else
      ++fp;
    recall[r] = stats.truths == 0
                    ? 0.0
                    : static_cast<double>(tp) / static_cast<double>(stats.truths);
    precision[r] = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  stats.tp = tp;
  stats.fp = fp;
  stats.fn = stats.truths - tp;

  if (stats.truths == 0 || pred_idx.empty()) {
    stats.ap = 0.0;
    return stats;
  }

  // precision envelope: max precision at recall >= r
  std::vector<double> envelope(precision);
  for (std::size_t r = envelope.size() - 1; r-- > 0;)
    envelope[r] = std::max(envelope[r], envelope[r + 1]);

  if (interp == ApInterpolation::kAllPoint) {
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t r = 0; r < pred_idx.size(); ++r) {
      ap += (recall[r] - prev_recall) * envelope[r];
      prev_recall = recall[r];
    }
    stats.ap = ap;
    return stats;
  }

  // fixed recall grid: Pascal uses {0, 0.1, ..., 1}, KITTI R40 skips 0
  const int samples = interp == ApInterpolation::kElevenPoint ? 11 : 40;
  const double first =
      interp == ApInterpolation::kElevenPoint ? 0.0 : 1.0 / 40.0;
  const double step = interp == ApInterpolation::kElevenPoint
                          ? 0.1
                          : 1.0 / 40.0;
  double acc = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double r = first + step * i;
    double p_at_r = 0.0;
    for (std::size_t k = 0; k < pred_idx.size(); ++k) {
      if (recall[k] >= r - 1e-12) {
        p_at_r = envelope[k];
        break;
      }
    }
    acc += p_at_r;
  }
  stats.ap = acc / samples;
  return stats;
}

}  // namespace

double center_range(const geom::Box3D& box) {
  return std::sqrt(box.center.x * box.center.x + box.center.y * box.center.y);
}

std::vector<RangeBin> bins_from_edges(std::span<const double> edges) {
  if (edges.size() < 2) throw ConfigError("range bins need at least 2 edges");
  std::vector<RangeBin> bins;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (!(edges[i] < edges[i + 1]))
      throw ConfigError("range bin edges must be strictly increasing");
    bins.push_back(RangeBin{edges[i], edges[i + 1]});
  }
  return bins;
}

EvalReport evaluate_ap(std::span<const io::BoxRecord> predictions,
                       std::span<const io::BoxRecord> truths,
                       double iou_thresh, std::span<const RangeBin> bins,
                       IouKind kind, ApInterpolation interp) {
  std::set<int> class_ids;
  for (const auto& t : truths) class_ids.insert(t.box.class_id);
  for (const auto& p : predictions) class_ids.insert(p.box.class_id);

  EvalReport report;
  double ap_sum = 0.0;
  std::size_t ap_count = 0;
  for (int class_id : class_ids) {
    ClassReport cr;
    cr.class_id = class_id;
    for (const RangeBin& bin : bins) {
      cr.bins.push_back(evaluate_slice(predictions, truths, iou_thresh, bin,
                                       class_id, kind, interp));
    }
    const RangeBin full{bins.empty() ? 0.0 : bins.front().lo,
                        bins.empty() ? 0.0 : bins.back().hi};
    cr.overall = evaluate_slice(predictions, truths, iou_thresh, full,
                                class_id, kind, interp);
    if (cr.overall.truths > 0) {
      ap_sum += cr.overall.ap;
      ++ap_count;
    }
    report.classes.push_back(std::move(cr));
  }
  report.mean_ap = ap_count == 0 ? 0.0 : ap_sum / static_cast<double>(ap_count);
  return report;
}

std::string format_report(const EvalReport& report,
                          const std::map<int, std::string>& class_names) {
  std::ostringstream os;
  for (const ClassReport& cr : report.classes) {
    std::string name = "class " + std::to_string(cr.class_id);
    if (const auto it = class_names.find(cr.class_id); it != class_names.end())
      name += " (" + it->second + ")";
    for (const BinStats& b : cr.bins) {
      os << name << " [" << b.bin.lo << "," << b.bin.hi << ") AP=" << b.ap
         << " TP=" << b.tp << " FP=" << b.fp << " FN=" << b.fn << "\n";
    }
    os << name << " overall AP=" << cr.overall.ap << " TP=" << cr.overall.tp
       << " FP=" << cr.overall.fp << " FN=" << cr.overall.fn << "\n";
  }
  os << "mAP " << report.mean_ap << "\n";
  return os.str();
}

}  // namespace fusebox::eval
