#pragma once

// Central finite-difference verification of the analytic loss gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ribkit/losses.hpp"
#include "ribkit/rng.hpp"

namespace ribkit::losses {

struct GradcheckOptions {
  std::size_t size = 4;  // cube edge in voxels
  int trials = 20;
  std::uint64_t seed = 0;
  double step = 1e-4;
  double tolerance = 1e-3;
  LossConfig config{};
  // Test fixture: scales the analytic gradient of the named loss by 1.1.
  std::string break_gradient;
};

struct LossCheck {
  std::string name;
  double max_rel_error = 0.0;
  int worst_trial = -1;
  std::size_t worst_element = 0;
  int channels = 1;  // elements per voxel for coordinate reporting
  bool passed = true;
};

struct GradcheckReport {
  std::vector<LossCheck> losses;
  std::size_t size = 0;
  bool passed() const {
    return std::all_of(losses.begin(), losses.end(),
                       [](const LossCheck& c) { return c.passed; });
  }
};

// Relative error with a 1e-8 floor on the magnitude, so that two exact
// zeros compare as equal.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

struct RandomFields {
  BinaryField binary;
  ClassField classes;
  std::vector<double> binary_logits;
  std::vector<double> class_logits;
};

// Probabilities stay in [0.05, 0.95]; rib voxels whose expected type lands
// within 0.05 of the target are redrawn, keeping the SoftArgMax term away
// from its kink.
inline RandomFields random_fields(std::size_t voxels, Rng& rng) {
  RandomFields r;
  r.binary.p.resize(voxels);
  r.binary.t.resize(voxels);
  r.binary_logits.resize(voxels);
  r.class_logits.resize(voxels * kRibTypes);
  r.classes.t.assign(voxels, 0);
  bool any_rib = false;
  for (std::size_t v = 0; v < voxels; ++v) {
    r.binary_logits[v] = rng.uniform(-2.9, 2.9);
    r.binary.p[v] = sigmoid(r.binary_logits[v]);
    r.binary.t[v] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    if (v + 1 == voxels && !any_rib) r.binary.t[v] = 1.0;
    any_rib = any_rib || r.binary.t[v] == 1.0;
    const int target = rng.between(1, kRibTypes);
    for (;;) {
      for (int k = 0; k < kRibTypes; ++k)
        r.class_logits[v * kRibTypes + k] = rng.uniform(-2.0, 2.0);
      std::vector<double> local(r.class_logits.begin() + v * kRibTypes,
                                r.class_logits.begin() + (v + 1) * kRibTypes);
      const auto p = softmax12(local);
      double e = 0.0;
      for (int k = 0; k < kRibTypes; ++k) e += (k + 1) * p[k];
      if (std::abs(e - target) >= 0.05) break;
    }
    if (r.binary.t[v] == 1.0) r.classes.t[v] = target;
  }
  r.classes.p = softmax12(r.class_logits);
  return r;
}

namespace detail {

using ValueFn = std::function<double(const std::vector<double>&)>;

inline void check_gradient(LossCheck& check, int trial, std::vector<double> x,
                           std::vector<double> analytic, const ValueFn& value,
                           const GradcheckOptions& opt) {
  if (check.name == opt.break_gradient)
    for (auto& g : analytic) g *= 1.1;
  for (std::size_t e = 0; e < x.size(); ++e) {
    const double x0 = x[e];
    x[e] = x0 + opt.step;
    const double up = value(x);
    x[e] = x0 - opt.step;
    const double down = value(x);
    x[e] = x0;
    const double numeric = (up - down) / (2.0 * opt.step);
    const double err = relative_error(analytic[e], numeric);
    if (check.worst_trial < 0 || err > check.max_rel_error) {
      check.max_rel_error = err;
      check.worst_trial = trial;
      check.worst_element = e;
    }
  }
  check.passed = check.max_rel_error < opt.tolerance;
}

}  // namespace detail

inline GradcheckReport run_gradcheck(const GradcheckOptions& opt) {
  opt.config.validate();
  const std::size_t voxels = opt.size * opt.size * opt.size;
  GradcheckReport report;
  report.size = opt.size;
  report.losses = {{"dice"}, {"focal"}, {"bce"}, {"ce"}, {"softargmax"},
                   {"hierarchical"}, {"hierarchical_logits"}};
  for (auto& l : report.losses)
    if (l.name == "ce" || l.name == "softargmax") l.channels = kRibTypes;
  auto& dice = report.losses[0];
  auto& focal = report.losses[1];
  auto& bce = report.losses[2];
  auto& ce = report.losses[3];
  auto& sam = report.losses[4];
  auto& hier = report.losses[5];
  auto& hier_logits = report.losses[6];
  hier.channels = 1 + kRibTypes;
  hier_logits.channels = 1 + kRibTypes;

  const LossConfig& cfg = opt.config;
  Rng rng(opt.seed);
  for (int trial = 0; trial < opt.trials; ++trial) {
    const RandomFields r = random_fields(voxels, rng);
    const BinaryField& bf = r.binary;
    const ClassField& cf = r.classes;

    auto with_p = [&](const std::vector<double>& p) { return BinaryField{p, bf.t}; };
    auto with_c = [&](const std::vector<double>& p) { return ClassField{p, cf.t}; };

    detail::check_gradient(dice, trial, bf.p, dice_loss_grad(bf, cfg.dice_epsilon).grad,
                           [&](const auto& p) { return dice_loss(with_p(p), cfg.dice_epsilon); },
                           opt);
    detail::check_gradient(focal, trial, bf.p, focal_loss_grad(bf, cfg.focal_gamma).grad,
                           [&](const auto& p) { return focal_loss(with_p(p), cfg.focal_gamma); },
                           opt);
    detail::check_gradient(bce, trial, bf.p, bce_loss_grad(bf).grad,
                           [&](const auto& p) { return bce_loss(with_p(p)); }, opt);
    detail::check_gradient(ce, trial, cf.p, ce_loss_grad(cf, bf.t).grad,
                           [&](const auto& p) { return ce_loss(with_c(p), bf.t); }, opt);
    detail::check_gradient(
        sam, trial, cf.p, softargmax_loss_grad(cf, bf.t, cfg.sam_normalizer).grad,
        [&](const auto& p) { return softargmax_loss(with_c(p), bf.t, cfg.sam_normalizer); },
        opt);

    // Combined loss over [binary probs | class probs], interleaved per voxel.
    auto pack = [&](const std::vector<double>& a, const std::vector<double>& b) {
      std::vector<double> x(voxels * (1 + kRibTypes));
      for (std::size_t v = 0; v < voxels; ++v) {
        x[v * (1 + kRibTypes)] = a[v];
        for (int k = 0; k < kRibTypes; ++k)
          x[v * (1 + kRibTypes) + 1 + k] = b[v * kRibTypes + k];
      }
      return x;
    };
    auto unpack = [&](const std::vector<double>& x, std::vector<double>& a,
                      std::vector<double>& b) {
      a.resize(voxels);
      b.resize(voxels * kRibTypes);
      for (std::size_t v = 0; v < voxels; ++v) {
        a[v] = x[v * (1 + kRibTypes)];
        for (int k = 0; k < kRibTypes; ++k)
          b[v * kRibTypes + k] = x[v * (1 + kRibTypes) + 1 + k];
      }
    };

    const HierarchicalGradient hg = hierarchical_loss_grad(bf, cf, cfg);
    detail::check_gradient(
        hier, trial, pack(bf.p, cf.p), pack(hg.grad_binary, hg.grad_class),
        [&](const std::vector<double>& x) {
          std::vector<double> a, b;
          unpack(x, a, b);
          return hierarchical_loss(with_p(a), with_c(b), cfg);
        },
        opt);

    const HierarchicalGradient lg =
        hierarchical_loss_logits(r.binary_logits, r.class_logits, bf.t, cf.t, cfg);
    detail::check_gradient(
        hier_logits, trial, pack(r.binary_logits, r.class_logits),
        pack(lg.grad_binary, lg.grad_class),
        [&](const std::vector<double>& x) {
          std::vector<double> a, b;
          unpack(x, a, b);
          return hierarchical_loss_logits(a, b, bf.t, cf.t, cfg).value;
        },
        opt);
  }
  return report;
}

// "voxel (x,y,z) channel c" for the worst element of a check.
inline std::string describe_worst(const LossCheck& c, std::size_t size) {
  const std::size_t voxel = c.worst_element / static_cast<std::size_t>(c.channels);
  const std::size_t channel = c.worst_element % static_cast<std::size_t>(c.channels);
  std::ostringstream os;
  os << "trial " << c.worst_trial << " voxel (" << voxel % size << ","
     << (voxel / size) % size << "," << voxel / (size * size) << ") channel "
     << channel;
  return os.str();
}

}  // namespace ribkit::losses
