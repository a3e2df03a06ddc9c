#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ribkit/centerline.hpp"
#include "ribkit/refine.hpp"
#include "ribkit/volume.hpp"

namespace ribkit {

inline constexpr int kRibLabels = 24;

struct RibInstanceScore {
  int rib_label = 0;  // 1..24
  int rib_type = 0;   // 1..12
  bool gt_present = false;
  std::size_t gt_voxels = 0;
  std::size_t pred_voxels = 0;
  std::size_t overlap = 0;
  std::optional<double> recall;  // set only when gt_present
  std::optional<double> dice;
};

struct GroupAccuracy {
  std::size_t correct = 0;
  std::size_t present = 0;

  std::optional<double> percent() const {
    if (present == 0) return std::nullopt;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(present);
  }
};

// All / First / Intermediate (types 2..11) / Twelfth.
struct LabelAccuracy {
  GroupAccuracy all;
  GroupAccuracy first;
  GroupAccuracy intermediate;
  GroupAccuracy twelfth;
};

struct MetricsReport {
  std::string case_id;
  bool cut_mode = false;
  std::vector<RibInstanceScore> per_rib;  // labels 1..24 in order
  LabelAccuracy accuracy;
  std::optional<double> dice_avg;
  std::optional<double> dice_min;
  std::size_t hallucinated_labels = 0;  // labels predicted but absent in gt
};

struct LabelCounts {
  std::array<std::size_t, kRibLabels + 1> gt{};
  std::array<std::size_t, kRibLabels + 1> pred{};
  std::array<std::size_t, kRibLabels + 1> overlap{};
};

inline LabelCounts count_labels(const LabelVolume& pred, const LabelVolume& gt) {
  require_same_geometry(pred, gt, "metrics");
  LabelCounts c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = gt[i], p = pred[i];
    if (g > kRibLabels || p > kRibLabels)
      throw InvalidArgument("metrics: label outside {0..24} at voxel " + std::to_string(i));
    ++c.gt[g];
    ++c.pred[p];
    if (g == p) ++c.overlap[g];
  }
  return c;
}

inline std::vector<RibInstanceScore> rib_scores(const LabelCounts& c) {
  std::vector<RibInstanceScore> out;
  out.reserve(kRibLabels);
  for (int l = 1; l <= kRibLabels; ++l) {
    RibInstanceScore s;
    s.rib_label = l;
    s.rib_type = rib_type_of(l);
    s.gt_voxels = c.gt[l];
    s.pred_voxels = c.pred[l];
    s.overlap = c.overlap[l];
    s.gt_present = s.gt_voxels > 0;
    if (s.gt_present) {
      s.recall = static_cast<double>(s.overlap) / static_cast<double>(s.gt_voxels);
      s.dice = 2.0 * static_cast<double>(s.overlap) /
               static_cast<double>(s.gt_voxels + s.pred_voxels);
    }
    out.push_back(s);
  }
  return out;
}

inline std::vector<RibInstanceScore> rib_scores(const LabelVolume& pred,
                                                const LabelVolume& gt) {
  return rib_scores(count_labels(pred, gt));
}

// |pred_i ∩ gt_i| / |gt_i|; nullopt when the rib is absent from gt.
inline std::optional<double> rib_recall(const LabelVolume& pred, const LabelVolume& gt,
                                        int rib) {
  if (rib < 1 || rib > kRibLabels)
    throw InvalidArgument("rib label must be in 1..24, got " + std::to_string(rib));
  return rib_scores(pred, gt)[static_cast<std::size_t>(rib - 1)].recall;
}

// A rib is correct iff its recall is strictly above the threshold.
inline LabelAccuracy label_accuracy(const std::vector<RibInstanceScore>& scores,
                                    double threshold = 0.7) {
  LabelAccuracy acc;
  for (const auto& s : scores) {
    if (!s.gt_present) continue;
    const bool ok = *s.recall > threshold;
    GroupAccuracy& group = s.rib_type == 1    ? acc.first
                           : s.rib_type == 12 ? acc.twelfth
                                              : acc.intermediate;
    for (GroupAccuracy* g : {&acc.all, &group}) {
      ++g->present;
      if (ok) ++g->correct;
    }
  }
  return acc;
}

struct DiceSummary {
  std::vector<std::optional<double>> per_rib;  // labels 1..24
  std::optional<double> avg;
  std::optional<double> min;
};

inline DiceSummary dice_summary(const std::vector<RibInstanceScore>& scores) {
  DiceSummary d;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : scores) {
    d.per_rib.push_back(s.dice);
    if (!s.dice) continue;
    sum += *s.dice;
    ++n;
    d.min = d.min ? std::min(*d.min, *s.dice) : *s.dice;
  }
  if (n) d.avg = sum / static_cast<double>(n);
  return d;
}

inline DiceSummary label_dice(const LabelVolume& pred, const LabelVolume& gt) {
  return dice_summary(rib_scores(pred, gt));
}

// Scores one case. With a centerline, both volumes are first cut around the
// spine (the corrected evaluation mode).
inline MetricsReport evaluate_case(const LabelVolume& pred, const LabelVolume& gt,
                                   const std::optional<Centerline>& line = {},
                                   double cut_radius_mm = 30.0,
                                   std::string case_id = {}) {
  require_same_geometry(pred, gt, "evaluate_case");
  MetricsReport r;
  r.case_id = std::move(case_id);
  LabelCounts counts;
  if (line) {
    r.cut_mode = true;
    counts = count_labels(spine_cut(pred, *line, cut_radius_mm),
                          spine_cut(gt, *line, cut_radius_mm));
  } else {
    counts = count_labels(pred, gt);
  }
  r.per_rib = rib_scores(counts);
  r.accuracy = label_accuracy(r.per_rib);
  const DiceSummary d = dice_summary(r.per_rib);
  r.dice_avg = d.avg;
  r.dice_min = d.min;
  for (int l = 1; l <= kRibLabels; ++l)
    if (counts.pred[l] > 0 && counts.gt[l] == 0) ++r.hallucinated_labels;
  return r;
}

// Dataset-level summary. Micro pools rib instances over all cases; macro
// averages the per-case percentages. Dice values are means of the per-case
// values.
struct DatasetSummary {
  std::size_t cases = 0;
  LabelAccuracy micro;
  struct Macro {
    std::optional<double> all, first, intermediate, twelfth;
  } macro;
  std::optional<double> dice_avg;
  std::optional<double> dice_min;
};

inline DatasetSummary summarize(const std::vector<MetricsReport>& reports) {
  DatasetSummary s;
  s.cases = reports.size();
  auto pool = [](GroupAccuracy& into, const GroupAccuracy& g) {
    into.correct += g.correct;
    into.present += g.present;
  };
  auto mean_of = [&](auto pick) -> std::optional<double> {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : reports)
      if (auto v = pick(r)) {
        sum += *v;
        ++n;
      }
    if (!n) return std::nullopt;
    return sum / static_cast<double>(n);
  };
  for (const auto& r : reports) {
    pool(s.micro.all, r.accuracy.all);
    pool(s.micro.first, r.accuracy.first);
    pool(s.micro.intermediate, r.accuracy.intermediate);
    pool(s.micro.twelfth, r.accuracy.twelfth);
  }
  s.macro.all = mean_of([](const MetricsReport& r) { return r.accuracy.all.percent(); });
  s.macro.first = mean_of([](const MetricsReport& r) { return r.accuracy.first.percent(); });
  s.macro.intermediate =
      mean_of([](const MetricsReport& r) { return r.accuracy.intermediate.percent(); });
  s.macro.twelfth = mean_of([](const MetricsReport& r) { return r.accuracy.twelfth.percent(); });
  s.dice_avg = mean_of([](const MetricsReport& r) { return r.dice_avg; });
  s.dice_min = mean_of([](const MetricsReport& r) { return r.dice_min; });
  return s;
}

}  // namespace ribkit
