#include <gtest/gtest.h>

#include <cmath>

#include "ribkit/infer.hpp"
#include "ribkit/rng.hpp"

using namespace ribkit;

namespace {

HeadOutput random_logits(Rng& rng, Dims d, Spacing s) {
  HeadOutput h{Volume(d, s), {}};
  for (auto& v : h.binary.data()) v = static_cast<float>(rng.uniform(-6.0, 6.0));
  for (int k = 0; k < kRibTypes; ++k) {
    Volume c(d, s);
    for (auto& v : c.data()) v = static_cast<float>(rng.uniform(-4.0, 4.0));
    h.classes.push_back(std::move(c));
  }
  return h;
}

// Binary logit equal to the window index, uniform classes.
class WindowIndexPredictor final : public Predictor {
 public:
  HeadOutput predict(const Volume& patch, const PatchInfo& info) override {
    HeadOutput out{Volume(patch.dims(), patch.spacing(), static_cast<float>(info.index)), {}};
    out.classes.assign(kRibTypes, Volume(patch.dims(), patch.spacing(), 0.0f));
    return out;
  }
};

class WrongChannelsPredictor final : public Predictor {
 public:
  HeadOutput predict(const Volume& patch, const PatchInfo&) override {
    HeadOutput out{Volume(patch.dims(), patch.spacing(), 0.0f), {}};
    out.classes.assign(kRibTypes - 1, Volume(patch.dims(), patch.spacing(), 0.0f));
    return out;
  }
};

double sigmoid_ref(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST(PlanPatches, Examples) {
  EXPECT_EQ(plan_patches(160, 2.0).windows, (std::vector<PatchWindow>{{0, 160}}));
  EXPECT_EQ(plan_patches(240, 2.0).windows, (std::vector<PatchWindow>{{0, 160}, {80, 240}}));
  EXPECT_EQ(plan_patches(100, 2.0).windows, (std::vector<PatchWindow>{{0, 100}}));
  EXPECT_EQ(plan_patches(400, 2.0).windows,
            (std::vector<PatchWindow>{{0, 160}, {80, 240}, {160, 320}, {240, 400}}));
  EXPECT_EQ(plan_patches(250, 2.0).windows,
            (std::vector<PatchWindow>{{0, 160}, {80, 240}, {90, 250}}));
  EXPECT_THROW(plan_patches(0, 2.0), InvalidArgument);
  EXPECT_THROW(plan_patches(10, 0.0), InvalidArgument);
}

TEST(PlanPatches, CoversEverySliceWithFullWindows) {
  for (std::size_t nz = 1; nz < 700; nz += 7) {
    const PatchPlan p = plan_patches(nz, 1.7);
    std::vector<int> cover(nz, 0);
    for (const auto& w : p.windows) {
      ASSERT_LE(w.end, nz);
      EXPECT_EQ(w.end - w.begin, std::min(nz, p.patch_voxels));
      for (std::size_t z = w.begin; z < w.end; ++z) ++cover[z];
    }
    for (int c : cover) EXPECT_GE(c, 1);
  }
}

TEST(Inference, OracleReproducesLabels) {
  Rng rng(81);
  LabelVolume labels(Dims{6, 5, 250}, Spacing::isotropic(2.0));
  for (auto& v : labels.data()) v = static_cast<std::uint8_t>(rng.below(3) ? 0 : rng.between(1, 24));
  const Volume vol(labels.dims(), labels.spacing(), 0.0f);
  OraclePredictor oracle(labels);
  const HeadOutput probs = run_inference(vol, oracle, plan_patches(250, 2.0));
  DecodeConfig cfg;
  // Midline past the volume: every voxel decodes to the left side.
  const LabelVolume out = decode(probs.binary, probs.classes, cfg, 1e9);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    EXPECT_EQ(out[i], l ? rib_type_of(l) + 12 : 0) << i;
  }
}

TEST(Inference, FieldPredictorMatchesGlobalSoftmax) {
  Rng rng(82);
  const Dims d{3, 4, 250};
  const Spacing s = Spacing::isotropic(2.0);
  const HeadOutput logits = random_logits(rng, d, s);
  FieldPredictor field(logits);
  const HeadOutput p = run_inference(Volume(d, s, 0.0f), field, plan_patches(d.nz, s.dz));
  for (std::size_t i = 0; i < p.binary.size(); ++i) {
    EXPECT_NEAR(p.binary[i], sigmoid_ref(logits.binary[i]), 1e-6);
    double sum = 0.0;
    for (int k = 0; k < kRibTypes; ++k) sum += std::exp(double(logits.classes[k][i]));
    for (int k = 0; k < kRibTypes; ++k)
      EXPECT_NEAR(p.classes[k][i], std::exp(double(logits.classes[k][i])) / sum, 1e-6);
  }
}

TEST(Inference, OverlapsAreAveraged) {
  const Dims d{2, 2, 240};
  const Spacing s = Spacing::isotropic(2.0);
  WindowIndexPredictor pred;
  const HeadOutput p = run_inference(Volume(d, s, 0.0f), pred, plan_patches(d.nz, s.dz));
  EXPECT_NEAR(p.binary(0, 0, 10), 0.5, 1e-7);
  EXPECT_NEAR(p.binary(0, 0, 100), (0.5 + sigmoid_ref(1.0)) / 2, 1e-6);
  EXPECT_NEAR(p.binary(1, 1, 200), sigmoid_ref(1.0), 1e-6);
  EXPECT_NEAR(p.classes[4](1, 0, 100), 1.0 / 12, 1e-7);
}

TEST(Inference, ConstantPredictor) {
  ConstantPredictor c(0.3);
  const Dims d{2, 2, 5};
  const HeadOutput p = run_inference(Volume(d, Spacing{}, 0.0f), c, plan_patches(5, 1.0));
  for (float v : p.binary.data()) EXPECT_NEAR(v, 0.3, 1e-6);
  EXPECT_THROW(ConstantPredictor(1.0), InvalidArgument);
  const LabelVolume none = decode(p.binary, p.classes, DecodeConfig{0.35, {}}, 0.0);
  for (auto v : none.data()) EXPECT_EQ(v, 0);
  const LabelVolume all = decode(p.binary, p.classes, DecodeConfig{0.25, {}}, 0.0);
  for (auto v : all.data()) EXPECT_EQ(v, 1);  // uniform classes tie to type 1, right side
}

TEST(Inference, MalformedPredictorOutputNamesPatch) {
  WrongChannelsPredictor bad;
  try {
    run_inference(Volume(Dims{2, 2, 240}, Spacing::isotropic(2.0), 0.0f), bad,
                  plan_patches(240, 2.0));
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("patch 0"), std::string::npos);
    EXPECT_EQ(e.exit_code(), 4);
  }
}

TEST(Decode, Examples) {
  const Spacing s = Spacing::isotropic(1.0);
  Volume bin(Dims{2, 1, 1}, s, 0.9f);
  std::vector<Volume> cls(kRibTypes, Volume(Dims{2, 1, 1}, s, 0.0f));
  cls[4][0] = cls[4][1] = 0.8f;
  // x = 0 is left of the midline at 0.5; x = 1 is right.
  const LabelVolume out = decode(bin, cls, {}, 0.5);
  EXPECT_EQ(out[0], 17);
  EXPECT_EQ(out[1], 5);

  cls[4][0] = 0.0f;
  cls[2][0] = cls[6][0] = 0.4f;
  EXPECT_EQ(decode(bin, cls, {}, 0.5)[0], 15);  // tie between 3 and 7 goes to 3

  bin[1] = 0.25f;
  EXPECT_EQ(decode(bin, cls, {}, 0.5)[1], 0);  // strictly above threshold
  EXPECT_THROW(decode(bin, cls, DecodeConfig{1.0, {}}, 0.5), InvalidArgument);
  cls.pop_back();
  EXPECT_THROW(decode(bin, cls, {}, 0.5), InvalidArgument);
}
