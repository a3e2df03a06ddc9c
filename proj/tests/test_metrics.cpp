#include <gtest/gtest.h>

#include <set>

#include "ribkit/metrics.hpp"
#include "ribkit/refine.hpp"
#include "ribkit/rng.hpp"

using namespace ribkit;

namespace {

// 24 ribs of ten voxels each laid out along x.
LabelVolume strip() {
  LabelVolume l(Dims{240, 1, 1}, Spacing{});
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = static_cast<std::uint8_t>(i / 10 + 1);
  return l;
}

std::set<std::size_t> voxels_of(const LabelVolume& l, int label) {
  std::set<std::size_t> s;
  for (std::size_t i = 0; i < l.size(); ++i)
    if (l[i] == label) s.insert(i);
  return s;
}

}  // namespace

TEST(Metrics, IdentityIsPerfect) {
  const LabelVolume gt = strip();
  const MetricsReport r = evaluate_case(gt, gt);
  EXPECT_EQ(*r.accuracy.all.percent(), 100.0);
  EXPECT_EQ(*r.accuracy.first.percent(), 100.0);
  EXPECT_EQ(*r.accuracy.intermediate.percent(), 100.0);
  EXPECT_EQ(*r.accuracy.twelfth.percent(), 100.0);
  EXPECT_EQ(*r.dice_avg, 1.0);
  EXPECT_EQ(*r.dice_min, 1.0);
  EXPECT_EQ(r.hallucinated_labels, 0u);
}

TEST(Metrics, OneMissedIntermediateRib) {
  const LabelVolume gt = strip();
  LabelVolume pred = gt;
  for (std::size_t i = 40; i < 50; ++i) pred[i] = 0;  // label 5
  const MetricsReport r = evaluate_case(pred, gt);
  EXPECT_EQ(r.accuracy.all.present, 24u);
  EXPECT_EQ(r.accuracy.all.correct, 23u);
  EXPECT_NEAR(*r.accuracy.all.percent(), 95.83, 0.005);
  EXPECT_NEAR(*r.accuracy.intermediate.percent(), 95.0, 1e-12);
  EXPECT_EQ(*r.accuracy.first.percent(), 100.0);
  EXPECT_EQ(*r.dice_min, 0.0);
  EXPECT_NEAR(*r.dice_avg, 23.0 / 24.0, 1e-12);
}

TEST(Metrics, RecallThresholdIsStrict) {
  LabelVolume gt(Dims{10, 1, 1}, Spacing{});
  for (auto& v : gt.data()) v = 3;
  LabelVolume pred = gt;
  for (std::size_t i = 0; i < 3; ++i) pred[i] = 0;
  EXPECT_DOUBLE_EQ(*rib_recall(pred, gt, 3), 0.7);
  EXPECT_EQ(evaluate_case(pred, gt).accuracy.all.correct, 0u);
  pred[2] = 3;
  EXPECT_EQ(evaluate_case(pred, gt).accuracy.all.correct, 1u);
}

TEST(Metrics, DiceHalfOverlap) {
  LabelVolume gt(Dims{4, 1, 1}, Spacing{});
  gt.data() = {7, 7, 0, 0};
  LabelVolume pred(Dims{4, 1, 1}, Spacing{});
  pred.data() = {0, 7, 7, 0};
  const DiceSummary d = label_dice(pred, gt);
  EXPECT_DOUBLE_EQ(*d.per_rib[6], 0.5);
  EXPECT_DOUBLE_EQ(*d.avg, 0.5);
  EXPECT_FALSE(d.per_rib[0].has_value());
}

TEST(Metrics, RibAbsentFromGroundTruthIsSkipped) {
  LabelVolume gt(Dims{4, 1, 1}, Spacing{});
  gt.data() = {1, 1, 0, 0};
  LabelVolume pred = gt;
  pred[3] = 12;
  const MetricsReport r = evaluate_case(pred, gt);
  EXPECT_EQ(r.accuracy.all.present, 1u);
  EXPECT_FALSE(r.accuracy.twelfth.percent().has_value());
  EXPECT_EQ(r.hallucinated_labels, 1u);
  EXPECT_FALSE(rib_recall(pred, gt, 12).has_value());
  EXPECT_THROW(rib_recall(pred, gt, 25), InvalidArgument);
}

TEST(Metrics, MatchesVoxelSetOracle) {
  Rng rng(71);
  for (int trial = 0; trial < 30; ++trial) {
    LabelVolume gt(Dims{9, 8, 7}, Spacing{});
    LabelVolume pred(Dims{9, 8, 7}, Spacing{});
    for (auto& v : gt.data()) v = static_cast<std::uint8_t>(rng.below(5) ? rng.between(1, 24) : 0);
    for (std::size_t i = 0; i < gt.size(); ++i)
      pred[i] = rng.uniform() < 0.6 ? gt[i] : static_cast<std::uint8_t>(rng.between(0, 24));
    const auto scores = rib_scores(pred, gt);
    std::size_t present = 0, correct = 0;
    for (int l = 1; l <= 24; ++l) {
      const auto g = voxels_of(gt, l), p = voxels_of(pred, l);
      std::size_t inter = 0;
      for (auto v : g) inter += p.count(v);
      const auto& s = scores[static_cast<std::size_t>(l - 1)];
      ASSERT_EQ(s.gt_present, !g.empty());
      if (g.empty()) continue;
      const double recall = double(inter) / double(g.size());
      EXPECT_NEAR(*s.recall, recall, 1e-12);
      EXPECT_NEAR(*s.dice, 2.0 * double(inter) / double(g.size() + p.size()), 1e-12);
      ++present;
      correct += recall > 0.7;
    }
    const LabelAccuracy acc = label_accuracy(scores);
    EXPECT_EQ(acc.all.present, present);
    EXPECT_EQ(acc.all.correct, correct);
    EXPECT_EQ(acc.first.present + acc.intermediate.present + acc.twelfth.present, present);
  }
}

TEST(Metrics, RejectsMismatchedGeometryAndLabels) {
  LabelVolume a(Dims{2, 2, 2}, Spacing{});
  LabelVolume b(Dims{2, 2, 3}, Spacing{});
  EXPECT_THROW(evaluate_case(a, b), InvalidArgument);
  LabelVolume c(Dims{2, 2, 2}, Spacing{});
  c[0] = 30;
  EXPECT_THROW(evaluate_case(c, a), InvalidArgument);
}

TEST(Metrics, CutModeIgnoresVoxelsNearSpine) {
  LabelVolume gt(Dims{20, 1, 2}, Spacing::isotropic(2.0));
  for (std::size_t i = 0; i < 20; ++i) gt(i, 0, 0) = gt(i, 0, 1) = 4;
  LabelVolume pred = gt;
  for (std::size_t i = 0; i < 14; ++i) pred(i, 0, 0) = pred(i, 0, 1) = 5;
  const Centerline line({{0.0, 0.0, 0.0}, {0.0, 0.0, 10.0}});
  EXPECT_EQ(evaluate_case(pred, gt).accuracy.all.correct, 0u);
  const MetricsReport cut = evaluate_case(pred, gt, line, 30.0);
  EXPECT_TRUE(cut.cut_mode);
  EXPECT_EQ(cut.accuracy.all.present, 1u);
  EXPECT_EQ(cut.accuracy.all.correct, 1u);
}

TEST(Summarize, MicroPoolsAndMacroAverages) {
  const LabelVolume gt = strip();
  LabelVolume pred = gt;
  for (std::size_t i = 0; i < 10; ++i) pred[i] = 0;  // label 1
  const std::vector<MetricsReport> reports{evaluate_case(gt, gt), evaluate_case(pred, gt)};
  const DatasetSummary s = summarize(reports);
  EXPECT_EQ(s.cases, 2u);
  EXPECT_EQ(s.micro.all.present, 48u);
  EXPECT_EQ(s.micro.all.correct, 47u);
  EXPECT_NEAR(*s.macro.all, (100.0 + 100.0 * 23 / 24) / 2, 1e-12);
  EXPECT_NEAR(*s.macro.first, 75.0, 1e-12);
  EXPECT_NEAR(*s.dice_min, 0.5, 1e-12);
  EXPECT_FALSE(summarize({}).macro.all.has_value());
}
