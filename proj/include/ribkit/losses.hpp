#pragma once

// Reference implementations of the hierarchical rib loss:
//   (Dice + Focal + BCE)[binary] + alpha * (CE + SoftArgMax)[class, rib voxels]
// Every term comes with its analytic gradient. Classification terms average
// over the voxels whose binary target is 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ribkit/error.hpp"
#include "ribkit/log.hpp"
#include "ribkit/volume.hpp"

namespace ribkit::losses {

inline constexpr double kProbClamp = 1e-7;

struct BinaryField {
  std::vector<double> p;  // predicted rib probability
  std::vector<double> t;  // target, 0 or 1

  std::size_t voxels() const { return p.size(); }

  void validate() const {
    if (p.size() != t.size())
      throw InvalidArgument("binary field: probability and target sizes differ");
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!(p[i] >= 0.0 && p[i] <= 1.0))
        throw InvalidArgument("binary field: probability outside [0,1] at " +
                              std::to_string(i));
      if (t[i] != 0.0 && t[i] != 1.0)
        throw InvalidArgument("binary field: target not in {0,1} at " +
                              std::to_string(i));
    }
  }
};

// 12 probabilities per voxel, voxel-major; target type 1..12 on rib voxels.
struct ClassField {
  std::vector<double> p;
  std::vector<int> t;

  std::size_t voxels() const { return t.size(); }
  double prob(std::size_t voxel, int type) const {
    return p[voxel * kRibTypes + static_cast<std::size_t>(type - 1)];
  }

  void validate(const std::vector<double>& rib_mask) const {
    if (p.size() != t.size() * kRibTypes || rib_mask.size() != t.size())
      throw InvalidArgument("class field: shape mismatch");
    for (std::size_t v = 0; v < t.size(); ++v) {
      double sum = 0.0;
      for (int k = 1; k <= kRibTypes; ++k) sum += prob(v, k);
      if (std::abs(sum - 1.0) > 1e-5)
        throw InvalidArgument("class field: probabilities at voxel " +
                              std::to_string(v) + " sum to " + std::to_string(sum));
      if (rib_mask[v] == 1.0 && (t[v] < 1 || t[v] > kRibTypes))
        throw InvalidArgument("class field: rib voxel " + std::to_string(v) +
                              " has no type in 1..12");
    }
  }
};

struct LossConfig {
  double alpha = 0.05;
  double focal_gamma = 2.0;
  double dice_epsilon = 1e-5;
  double sam_normalizer = kRibTypes - 1;  // largest possible type distance

  void validate() const {
    if (!(alpha > 0.0) || !(focal_gamma >= 0.0) || !(dice_epsilon > 0.0) ||
        !(sam_normalizer > 0.0))
      throw InvalidArgument("loss config: need alpha > 0, gamma >= 0, epsilon > 0");
  }
};

struct Gradient {
  double value = 0.0;
  std::vector<double> grad;
};

namespace detail {

inline void check_binary(const BinaryField& f) {
  if (f.p.size() != f.t.size())
    throw InvalidArgument("binary field: probability and target sizes differ");
}

inline void check_class(const ClassField& c, const std::vector<double>& mask) {
  if (c.p.size() != c.t.size() * kRibTypes || mask.size() != c.t.size())
    throw InvalidArgument("class field: shape mismatch");
}

inline double clamp_prob(double p) {
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}
inline bool clamped(double p) { return p < kProbClamp || p > 1.0 - kProbClamp; }

inline std::size_t rib_count(const std::vector<double>& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1.0));
}

inline void warn_empty_mask(const char* which) {
  log::warn(std::string(which) + ": no rib voxels in target; loss defined as 0");
}

}  // namespace detail

// ---- binary head ------------------------------------------------------------

inline Gradient dice_loss_grad(const BinaryField& f, double eps = 1e-5) {
  detail::check_binary(f);
  double inter = 0.0, sum_p = 0.0, sum_t = 0.0;
  for (std::size_t i = 0; i < f.voxels(); ++i) {
    inter += f.p[i] * f.t[i];
    sum_p += f.p[i];
    sum_t += f.t[i];
  }
  const double num = 2.0 * inter + eps;
  const double den = sum_p + sum_t + eps;
  Gradient g{1.0 - num / den, std::vector<double>(f.voxels())};
  for (std::size_t i = 0; i < f.voxels(); ++i)
    g.grad[i] = -(2.0 * f.t[i] * den - num) / (den * den);
  return g;
}
inline double dice_loss(const BinaryField& f, double eps = 1e-5) {
  return dice_loss_grad(f, eps).value;
}

inline Gradient focal_loss_grad(const BinaryField& f, double gamma = 2.0) {
  detail::check_binary(f);
  const std::size_t n = f.voxels();
  Gradient g{0.0, std::vector<double>(n, 0.0)};
  if (n == 0) return g;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = detail::clamp_prob(f.p[i]);
    const bool pos = f.t[i] == 1.0;
    const double pt = pos ? p : 1.0 - p;
    const double q = 1.0 - pt;
    const double log_pt = std::log(pt);
    const double w = gamma == 0.0 ? 1.0 : std::pow(q, gamma);
    g.value += -w * log_pt;
    if (detail::clamped(f.p[i])) continue;
    // d/dpt of -(1-pt)^g log pt
    double d = -w / pt;
    if (gamma != 0.0) d += gamma * std::pow(q, gamma - 1.0) * log_pt;
    g.grad[i] = (pos ? d : -d) * inv_n;
  }
  g.value *= inv_n;
  return g;
}
inline double focal_loss(const BinaryField& f, double gamma = 2.0) {
  return focal_loss_grad(f, gamma).value;
}

inline Gradient bce_loss_grad(const BinaryField& f) {
  detail::check_binary(f);
  const std::size_t n = f.voxels();
  Gradient g{0.0, std::vector<double>(n, 0.0)};
  if (n == 0) return g;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = detail::clamp_prob(f.p[i]);
    const double t = f.t[i];
    g.value += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    if (!detail::clamped(f.p[i]))
      g.grad[i] = (-t / p + (1.0 - t) / (1.0 - p)) * inv_n;
  }
  g.value *= inv_n;
  return g;
}
inline double bce_loss(const BinaryField& f) { return bce_loss_grad(f).value; }

// ---- classification head (rib voxels only) --------------------------------

inline Gradient ce_loss_grad(const ClassField& c, const std::vector<double>& rib_mask) {
  detail::check_class(c, rib_mask);
  Gradient g{0.0, std::vector<double>(c.p.size(), 0.0)};
  const std::size_t m = detail::rib_count(rib_mask);
  if (m == 0) {
    detail::warn_empty_mask("ce_loss");
    return g;
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t v = 0; v < c.voxels(); ++v) {
    if (rib_mask[v] != 1.0) continue;
    const std::size_t k = v * kRibTypes + static_cast<std::size_t>(c.t[v] - 1);
    const double p = detail::clamp_prob(c.p[k]);
    g.value += -std::log(p);
    if (!detail::clamped(c.p[k])) g.grad[k] = -inv_m / p;
  }
  g.value *= inv_m;
  return g;
}
inline double ce_loss(const ClassField& c, const std::vector<double>& rib_mask) {
  return ce_loss_grad(c, rib_mask).value;
}

// |E[type] - target| / 11 averaged over rib voxels, E[type] = sum_k k p_k.
inline Gradient softargmax_loss_grad(const ClassField& c,
                                     const std::vector<double>& rib_mask,
                                     double normalizer = kRibTypes - 1) {
  detail::check_class(c, rib_mask);
  Gradient g{0.0, std::vector<double>(c.p.size(), 0.0)};
  const std::size_t m = detail::rib_count(rib_mask);
  if (m == 0) {
    detail::warn_empty_mask("softargmax_loss");
    return g;
  }
  const double scale = 1.0 / (static_cast<double>(m) * normalizer);
  for (std::size_t v = 0; v < c.voxels(); ++v) {
    if (rib_mask[v] != 1.0) continue;
    double expected = 0.0;
    for (int k = 1; k <= kRibTypes; ++k) expected += k * c.prob(v, k);
    const double diff = expected - c.t[v];
    g.value += std::abs(diff);
    const double sign = diff > 0.0 ? 1.0 : diff < 0.0 ? -1.0 : 0.0;
    for (int k = 1; k <= kRibTypes; ++k)
      g.grad[v * kRibTypes + static_cast<std::size_t>(k - 1)] = sign * k * scale;
  }
  g.value *= scale;
  return g;
}
inline double softargmax_loss(const ClassField& c, const std::vector<double>& rib_mask,
                              double normalizer = kRibTypes - 1) {
  return softargmax_loss_grad(c, rib_mask, normalizer).value;
}

// ---- combined ---------------------------------------------------------------

struct HierarchicalGradient {
  double value = 0.0;
  std::vector<double> grad_binary;  // per voxel
  std::vector<double> grad_class;   // per voxel and type
};

inline HierarchicalGradient hierarchical_loss_grad(const BinaryField& f,
                                                   const ClassField& c,
                                                   const LossConfig& cfg = {}) {
  cfg.validate();
  detail::check_binary(f);
  if (c.voxels() != f.voxels())
    throw InvalidArgument("hierarchical loss: binary and class fields differ in size");
  const Gradient dice = dice_loss_grad(f, cfg.dice_epsilon);
  const Gradient focal = focal_loss_grad(f, cfg.focal_gamma);
  const Gradient bce = bce_loss_grad(f);
  const Gradient ce = ce_loss_grad(c, f.t);
  const Gradient sam = softargmax_loss_grad(c, f.t, cfg.sam_normalizer);

  HierarchicalGradient out;
  out.value = dice.value + focal.value + bce.value + cfg.alpha * (ce.value + sam.value);
  out.grad_binary.resize(f.voxels());
  for (std::size_t i = 0; i < f.voxels(); ++i)
    out.grad_binary[i] = dice.grad[i] + focal.grad[i] + bce.grad[i];
  out.grad_class.resize(c.p.size());
  for (std::size_t k = 0; k < c.p.size(); ++k)
    out.grad_class[k] = cfg.alpha * (ce.grad[k] + sam.grad[k]);
  return out;
}
inline double hierarchical_loss(const BinaryField& f, const ClassField& c,
                                const LossConfig& cfg = {}) {
  return hierarchical_loss_grad(f, c, cfg).value;
}

// ---- logit-space entry point ---------------------------------------------------

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Softmax over consecutive groups of kRibTypes values.
inline std::vector<double> softmax12(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  for (std::size_t base = 0; base + kRibTypes <= logits.size(); base += kRibTypes) {
    const double mx = *std::max_element(logits.begin() + base,
                                        logits.begin() + base + kRibTypes);
    double sum = 0.0;
    for (int k = 0; k < kRibTypes; ++k) {
      p[base + k] = std::exp(logits[base + k] - mx);
      sum += p[base + k];
    }
    for (int k = 0; k < kRibTypes; ++k) p[base + k] /= sum;
  }
  return p;
}

// Loss and gradients with respect to the raw head outputs: one binary logit
// per voxel (sigmoid) and 12 class logits per voxel (softmax).
inline HierarchicalGradient hierarchical_loss_logits(
    const std::vector<double>& binary_logits, const std::vector<double>& class_logits,
    const std::vector<double>& target_bin, const std::vector<int>& target_cls,
    const LossConfig& cfg = {}) {
  BinaryField f;
  f.p.resize(binary_logits.size());
  for (std::size_t i = 0; i < binary_logits.size(); ++i) f.p[i] = sigmoid(binary_logits[i]);
  f.t = target_bin;
  ClassField c{softmax12(class_logits), target_cls};

  HierarchicalGradient g = hierarchical_loss_grad(f, c, cfg);
  for (std::size_t i = 0; i < f.p.size(); ++i)
    g.grad_binary[i] *= f.p[i] * (1.0 - f.p[i]);
  for (std::size_t base = 0; base < c.p.size(); base += kRibTypes) {
    double dot = 0.0;
    for (int k = 0; k < kRibTypes; ++k) dot += g.grad_class[base + k] * c.p[base + k];
    for (int k = 0; k < kRibTypes; ++k)
      g.grad_class[base + k] = c.p[base + k] * (g.grad_class[base + k] - dot);
  }
  return g;
}

}  // namespace ribkit::losses
