#pragma once

// Sliding-window inference along the vertical axis against a two-head
// predictor (1 binary channel + 12 rib-type channels).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ribkit/error.hpp"
#include "ribkit/losses.hpp"
#include "ribkit/parallel.hpp"
#include "ribkit/sides.hpp"
#include "ribkit/volume.hpp"

namespace ribkit {

// Raw head outputs (logits) or, after run_inference, probabilities.
struct HeadOutput {
  Volume binary;
  std::vector<Volume> classes;  // kRibTypes channels
};

struct PatchInfo {
  std::size_t index = 0;
  std::size_t z_begin = 0;
  std::size_t z_end = 0;  // exclusive
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  // Returns logits with the same spatial dims as `patch`.
  virtual HeadOutput predict(const Volume& patch, const PatchInfo& info) = 0;
};

struct PatchWindow {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  friend bool operator==(const PatchWindow&, const PatchWindow&) = default;
};

struct PatchPlan {
  std::vector<PatchWindow> windows;
  std::size_t patch_voxels = 0;
  std::size_t stride = 0;
};

// Windows of round(patch_mm / spacing_z) slices, half-overlapping. The last
// window is shifted back to end at nz instead of being shrunk.
inline PatchPlan plan_patches(std::size_t nz, double spacing_z, double patch_mm = 320.0) {
  if (nz == 0) throw InvalidArgument("plan_patches: nz must be >= 1");
  if (!(spacing_z > 0.0) || !(patch_mm > 0.0))
    throw InvalidArgument("plan_patches: spacing and patch size must be positive");
  PatchPlan plan;
  plan.patch_voxels = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(patch_mm / spacing_z + 0.5)));
  plan.stride = std::max<std::size_t>(1, plan.patch_voxels / 2);
  if (nz <= plan.patch_voxels) {
    plan.windows.push_back({0, nz});
    return plan;
  }
  for (std::size_t off = 0;; off += plan.stride) {
    if (off + plan.patch_voxels >= nz) {
      plan.windows.push_back({nz - plan.patch_voxels, nz});
      break;
    }
    plan.windows.push_back({off, off + plan.patch_voxels});
  }
  return plan;
}

namespace detail {

inline Volume slab(const Volume& vol, std::size_t z0, std::size_t z1) {
  const Dims d = vol.dims();
  const std::size_t plane = d.nx * d.ny;
  std::vector<float> data(vol.data().begin() + static_cast<std::ptrdiff_t>(z0 * plane),
                          vol.data().begin() + static_cast<std::ptrdiff_t>(z1 * plane));
  return Volume({d.nx, d.ny, z1 - z0}, vol.spacing(), std::move(data));
}

inline void check_output(const HeadOutput& out, const Dims& expected, std::size_t patch) {
  auto fail = [&](const std::string& why) {
    std::ostringstream os;
    os << "predictor output for patch " << patch << ": " << why;
    throw ProtocolError(os.str());
  };
  if (out.binary.dims() != expected)
    fail("binary head dims " + to_string(out.binary.dims()) + ", expected " +
         to_string(expected));
  if (out.classes.size() != kRibTypes)
    fail("classification head has " + std::to_string(out.classes.size()) +
         " channels, expected 12");
  for (const auto& c : out.classes)
    if (c.dims() != expected)
      fail("classification head dims " + to_string(c.dims()) + ", expected " +
           to_string(expected));
}

}  // namespace detail

// Runs the predictor over every window, converts logits with sigmoid (binary)
// and softmax (classes), and averages overlapping windows. Windows are merged
// in plan order, so the result is bit-identical for any thread count.
inline HeadOutput run_inference(const Volume& vol, Predictor& predictor,
                                const PatchPlan& plan) {
  const Dims d = vol.dims();
  const std::size_t plane = d.nx * d.ny;
  HeadOutput acc{Volume(d, vol.spacing(), 0.0f), {}};
  acc.classes.assign(kRibTypes, Volume(d, vol.spacing(), 0.0f));
  std::vector<std::uint32_t> coverage(d.nz, 0);

  for (std::size_t w = 0; w < plan.windows.size(); ++w) {
    const PatchWindow win = plan.windows[w];
    if (win.end > d.nz || win.begin >= win.end)
      throw InvalidArgument("patch plan window " + std::to_string(w) +
                            " does not fit the volume");
    const Volume patch = detail::slab(vol, win.begin, win.end);
    const HeadOutput out = predictor.predict(patch, {w, win.begin, win.end});
    detail::check_output(out, patch.dims(), w);

    parallel_for(win.end - win.begin, [&](std::size_t kz) {
      std::array<double, kRibTypes> p{};
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t src = kz * plane + i;
        const std::size_t dst = (win.begin + kz) * plane + i;
        acc.binary[dst] += static_cast<float>(losses::sigmoid(out.binary[src]));
        double mx = out.classes[0][src];
        for (int k = 1; k < kRibTypes; ++k) mx = std::max<double>(mx, out.classes[k][src]);
        double sum = 0.0;
        for (int k = 0; k < kRibTypes; ++k) {
          p[k] = std::exp(static_cast<double>(out.classes[k][src]) - mx);
          sum += p[k];
        }
        for (int k = 0; k < kRibTypes; ++k)
          acc.classes[k][dst] += static_cast<float>(p[k] / sum);
      }
    });
    for (std::size_t z = win.begin; z < win.end; ++z) ++coverage[z];
  }

  for (std::size_t z = 0; z < d.nz; ++z)
    if (coverage[z] == 0)
      throw InvalidArgument("patch plan leaves slice " + std::to_string(z) + " uncovered");
  parallel_for(d.nz, [&](std::size_t z) {
    if (coverage[z] == 1) return;
    const float n = static_cast<float>(coverage[z]);
    for (std::size_t i = z * plane; i < (z + 1) * plane; ++i) {
      acc.binary[i] /= n;
      for (auto& c : acc.classes) c[i] /= n;
    }
  });
  return acc;
}

struct DecodeConfig {
  double binary_threshold = 0.25;
  LabelConvention convention{};

  void validate() const {
    if (!(binary_threshold > 0.0 && binary_threshold < 1.0))
      throw InvalidArgument("binary threshold must lie in (0, 1)");
  }
};

// Foreground where the binary probability exceeds the threshold; the rib type
// is the arg-max class channel (lowest type on ties); the side follows the
// voxel's x position relative to the midline.
inline LabelVolume decode(const Volume& binary_prob, const std::vector<Volume>& class_prob,
                          const DecodeConfig& cfg, double midline_x) {
  cfg.validate();
  if (class_prob.size() != kRibTypes)
    throw InvalidArgument("decode expects 12 class channels");
  for (const auto& c : class_prob) require_same_geometry(binary_prob, c, "decode");
  const Dims d = binary_prob.dims();
  LabelVolume out(d, binary_prob.spacing(), std::uint8_t{0});
  const double dx = binary_prob.spacing().dx;
  parallel_for(d.nz, [&](std::size_t z) {
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t i = binary_prob.index(x, y, z);
        if (!(binary_prob[i] > cfg.binary_threshold)) continue;
        int best = 0;
        for (int k = 1; k < kRibTypes; ++k)
          if (class_prob[k][i] > class_prob[best][i]) best = k;
        const Side side = side_of(static_cast<double>(x) * dx, midline_x);
        out[i] = static_cast<std::uint8_t>(cfg.convention.label(side, best + 1));
      }
  });
  return out;
}

// ---- reference predictors -----------------------------------------------------

// Emits logits that reproduce a given label volume: +20 / -20 binary logits
// and a +20 one-hot class logit on rib voxels.
class OraclePredictor final : public Predictor {
 public:
  static constexpr float kLogit = 20.0f;

  explicit OraclePredictor(LabelVolume labels) : labels_(std::move(labels)) {
    validate_labels(labels_);
  }

  HeadOutput predict(const Volume& patch, const PatchInfo& info) override {
    const Dims& d = patch.dims();
    if (d.nx != labels_.dims().nx || d.ny != labels_.dims().ny ||
        info.z_end > labels_.dims().nz)
      throw InvalidArgument("oracle predictor: label volume does not match the input");
    HeadOutput out{Volume(d, patch.spacing(), -kLogit), {}};
    out.classes.assign(kRibTypes, Volume(d, patch.spacing(), 0.0f));
    const std::size_t offset = info.z_begin * d.nx * d.ny;
    for (std::size_t i = 0; i < patch.size(); ++i) {
      const int label = labels_[offset + i];
      if (!label) continue;
      out.binary[i] = kLogit;
      out.classes[static_cast<std::size_t>(rib_type_of(label) - 1)][i] = kLogit;
    }
    return out;
  }

 private:
  LabelVolume labels_;
};

// Serves slices of fixed whole-volume logit fields.
class FieldPredictor final : public Predictor {
 public:
  explicit FieldPredictor(HeadOutput logits) : logits_(std::move(logits)) {}

  HeadOutput predict(const Volume& patch, const PatchInfo& info) override {
    (void)patch;
    HeadOutput out{detail::slab(logits_.binary, info.z_begin, info.z_end), {}};
    for (const auto& c : logits_.classes)
      out.classes.push_back(detail::slab(c, info.z_begin, info.z_end));
    return out;
  }

 private:
  HeadOutput logits_;
};

// Same logits everywhere: binary probability `p` and uniform classes.
class ConstantPredictor final : public Predictor {
 public:
  explicit ConstantPredictor(double p) {
    if (!(p > 0.0 && p < 1.0))
      throw InvalidArgument("constant predictor probability must lie in (0, 1)");
    logit_ = static_cast<float>(std::log(p / (1.0 - p)));
  }

  HeadOutput predict(const Volume& patch, const PatchInfo&) override {
    HeadOutput out{Volume(patch.dims(), patch.spacing(), logit_), {}};
    out.classes.assign(kRibTypes, Volume(patch.dims(), patch.spacing(), 0.0f));
    return out;
  }

 private:
  float logit_ = 0.0f;
};

}  // namespace ribkit
