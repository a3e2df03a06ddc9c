#pragma once

// Geometric mask refinement: re-assigns consecutive rib types to the
// height-ordered connected components of each side, plus the spine-proximity
// cut used for the corrected evaluation mode.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ribkit/centerline.hpp"
#include "ribkit/components.hpp"
#include "ribkit/error.hpp"
#include "ribkit/log.hpp"
#include "ribkit/sides.hpp"
#include "ribkit/volume.hpp"

namespace ribkit {

struct RefineConfig {
  double probable_fraction = 1.0 / 3.0;
  std::vector<int> protected_top_types{1, 2, 3, 4};
  Connectivity connectivity = Connectivity::twentysix;
  std::size_t min_voxels = 64;
  LabelConvention convention{};

  void validate() const {
    if (!(probable_fraction > 0.0 && probable_fraction < 1.0))
      throw InvalidArgument("probable_fraction must lie in (0, 1)");
  }
};

struct SideMasks {
  LabelVolume left;
  LabelVolume right;
  std::vector<std::string> warnings;
};

// Midline from the centerline when one is given, else the volume x-center.
inline double default_midline(const Dims& dims, const Spacing& spacing,
                              const std::optional<Centerline>& line = {}) {
  if (line) return line->mean_x();
  return static_cast<double>(dims.nx - 1) * spacing.dx / 2.0;
}

namespace detail {

inline Side component_side(const Component& c, double midline_x,
                           std::vector<std::string>* warnings) {
  if (c.centroid.x == midline_x && warnings) {
    std::ostringstream os;
    os << "component " << c.id << " centroid lies on the midline x=" << midline_x
       << " mm; assigned to right";
    warnings->push_back(os.str());
  }
  return side_of(c.centroid.x, midline_x);
}

}  // namespace detail

// Splits the foreground into sides by component centroid; components are
// never split.
inline SideMasks split_sides(const LabelVolume& labels, double midline_x,
                             Connectivity conn = Connectivity::twentysix) {
  SideMasks out{LabelVolume(labels.dims(), labels.spacing(), std::uint8_t{0}),
                LabelVolume(labels.dims(), labels.spacing(), std::uint8_t{0}),
                {}};
  const ComponentSet cs = label_components(binarize(labels), conn);
  for (const auto& c : cs.components) {
    LabelVolume& dst =
        detail::component_side(c, midline_x, &out.warnings) == Side::left
            ? out.left
            : out.right;
    for (std::size_t v : c.voxels) dst[v] = 1;
  }
  for (const auto& w : out.warnings) log::warn(w);
  return out;
}

// Superior first: centroid z descending, then larger voxel_count, then
// smaller id. Returns indices into cs.components.
inline std::vector<std::size_t> sort_by_height(const ComponentSet& cs) {
  std::vector<std::size_t> order(cs.components.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Component& ca = cs.components[a];
    const Component& cb = cs.components[b];
    if (ca.centroid.z != cb.centroid.z) return ca.centroid.z > cb.centroid.z;
    if (ca.voxel_count != cb.voxel_count) return ca.voxel_count > cb.voxel_count;
    return ca.id < cb.id;
  });
  return order;
}

inline double median_volume(const ComponentSet& cs) {
  std::vector<std::size_t> v;
  v.reserve(cs.components.size());
  for (const auto& c : cs.components) v.push_back(c.voxel_count);
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? static_cast<double>(v[m])
                      : (static_cast<double>(v[m - 1]) + static_cast<double>(v[m])) / 2.0;
}

// Ribs each component may hold: volume over median, rounded half-up, at
// least 1. Aligned with cs.components.
inline std::vector<int> component_capacities(const ComponentSet& cs) {
  const double median = median_volume(cs);
  std::vector<int> caps;
  caps.reserve(cs.components.size());
  for (const auto& c : cs.components) {
    const double ratio = static_cast<double>(c.voxel_count) / median;
    caps.push_back(std::max(1, static_cast<int>(std::floor(ratio + 0.5))));
  }
  return caps;
}

// Types covering strictly more than `fraction` of the component's voxels.
// `types` holds rib types 0..12 (0 = none).
inline std::vector<int> probable_types(const Component& c,
                                       const LabelVolume& types,
                                       double fraction) {
  std::array<std::size_t, kRibTypes + 1> counts{};
  for (std::size_t v : c.voxels) {
    const int t = types[v];
    if (t > kRibTypes)
      throw InvalidArgument("type volume holds " + std::to_string(t) +
                            " outside {0..12}");
    ++counts[t];
  }
  const double bar = fraction * static_cast<double>(c.voxel_count);
  std::vector<int> out;
  for (int t = 1; t <= kRibTypes; ++t)
    if (static_cast<double>(counts[t]) > bar) out.push_back(t);
  return out;
}

struct ComponentAssignment {
  int start = 1;
  int score = 0;
  std::vector<int> capacity;
  std::vector<std::vector<int>> probables;
  std::vector<std::vector<int>> types;  // block per component; consecutive from choose_sequence

  int total_capacity() const {
    return std::accumulate(capacity.begin(), capacity.end(), 0);
  }
};

// Chooses the consecutive type sequence that covers the most probable types.
// Components are given superior-first. Ties prefer the start whose matched
// blocks sit closest to their smallest probable type, then the smaller start.
// Starts range over first_type..12 - total + 1.
inline ComponentAssignment choose_sequence(
    const std::vector<int>& capacities,
    const std::vector<std::vector<int>>& probables,
    const std::string& side_name = "", int first_type = 1) {
  if (capacities.size() != probables.size())
    throw InvalidArgument("choose_sequence: capacities and probables differ in length");
  for (int c : capacities)
    if (c < 1) throw InvalidArgument("choose_sequence: capacity must be >= 1");
  const int total = std::accumulate(capacities.begin(), capacities.end(), 0);
  if (total > kRibTypes) {
    std::ostringstream os;
    os << "refusing to assign " << total << " ribs to "
       << (side_name.empty() ? std::string("a side") : side_name + " side")
       << " (more than " << kRibTypes << ")";
    throw RefusalError(os.str());
  }
  if (first_type < 1 || first_type + total - 1 > kRibTypes) {
    std::ostringstream os;
    os << "no room for " << total << " ribs from type " << first_type << " on "
       << (side_name.empty() ? std::string("a side") : side_name + " side");
    throw RefusalError(os.str());
  }

  ComponentAssignment best;
  best.start = first_type;
  best.capacity = capacities;
  best.probables = probables;
  best.score = -1;
  long best_distance = 0;

  for (int s = first_type; s + total - 1 <= kRibTypes; ++s) {
    int score = 0;
    long distance = 0;
    int block = s;
    for (std::size_t j = 0; j < capacities.size(); ++j) {
      const int lo = block, hi = block + capacities[j] - 1;
      int matched = 0;
      for (int t : probables[j])
        if (t >= lo && t <= hi) ++matched;
      if (matched) {
        score += matched;
        distance += std::abs(lo - *std::min_element(probables[j].begin(),
                                                    probables[j].end()));
      }
      block = hi + 1;
    }
    if (score > best.score || (score == best.score && distance < best_distance)) {
      best.score = score;
      best.start = s;
      best_distance = distance;
    }
  }

  if (capacities.empty()) best.score = 0;
  int block = best.start;
  best.types.reserve(capacities.size());
  for (int cap : capacities) {
    std::vector<int> t(cap);
    std::iota(t.begin(), t.end(), block);
    best.types.push_back(std::move(t));
    block += cap;
  }
  return best;
}

struct SideReport {
  Side side = Side::right;
  std::size_t components = 0;     // after small-component filtration
  std::size_t removed_small = 0;
  std::size_t protected_count = 0;
  bool kept_numbering = false;  // remaining components already consistent
  std::optional<ComponentAssignment> assignment;  // remaining components
};

struct RefineResult {
  LabelVolume labels;
  std::vector<SideReport> sides;
  std::vector<std::string> warnings;
};

namespace detail {

// Relabels one multi-rib component. Voxels whose prior type falls in the
// block keep it; the rest take the block type whose prior-voxel centroid is
// nearest in z. Without any in-block voxels the component is cut into
// equal-count vertical slabs, top slab first.
// True when every component holds one rib with one probable type and those
// types strictly increase from `first_type` downward.
inline bool consistent_numbering(const std::vector<int>& caps,
                                 const std::vector<std::vector<int>>& probs, int first_type) {
  int previous = first_type - 1;
  for (std::size_t j = 0; j < caps.size(); ++j) {
    if (caps[j] != 1 || probs[j].size() != 1 || probs[j].front() <= previous) return false;
    previous = probs[j].front();
  }
  return true;
}

inline void relabel_merged(const Component& c, const std::vector<int>& block,
                           const LabelVolume& types, const Spacing& spacing,
                           const Dims& dims, std::vector<int>& out_type) {
  const std::size_t plane = dims.nx * dims.ny;
  auto z_of = [&](std::size_t v) {
    return static_cast<double>(v / plane) * spacing.dz;
  };
  std::vector<double> zsum(block.size(), 0.0);
  std::vector<std::size_t> count(block.size(), 0);
  for (std::size_t v : c.voxels) {
    const int t = types[v];
    if (t >= block.front() && t <= block.back()) {
      zsum[t - block.front()] += z_of(v);
      ++count[t - block.front()];
    }
  }
  const bool any = std::any_of(count.begin(), count.end(),
                               [](std::size_t n) { return n > 0; });
  if (!any) {
    std::vector<std::size_t> order(c.voxels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return c.voxels[a] / plane > c.voxels[b] / plane;
    });
    const std::size_t n = order.size();
    for (std::size_t r = 0; r < n; ++r)
      out_type[order[r]] = block[r * block.size() / n];
    return;
  }
  for (std::size_t r = 0; r < c.voxels.size(); ++r) {
    const int t = types[c.voxels[r]];
    if (t >= block.front() && t <= block.back()) {
      out_type[r] = t;
      continue;
    }
    const double z = z_of(c.voxels[r]);
    int choice = 0;
    double best = 0.0;
    for (std::size_t k = 0; k < block.size(); ++k) {
      if (!count[k]) continue;
      const double dist = std::abs(z - zsum[k] / static_cast<double>(count[k]));
      if (!choice || dist < best) {
        best = dist;
        choice = block[k];
      }
    }
    out_type[r] = choice;
  }
}

}  // namespace detail

inline RefineResult refine(const LabelVolume& pred, const RefineConfig& cfg,
                           double midline_x) {
  cfg.validate();
  validate_labels(pred);
  RefineResult result{pred, {}, {}};

  const ComponentSet all = label_components(binarize(pred), cfg.connectivity);
  if (all.components.empty()) {
    result.warnings.push_back("empty prediction; returned unchanged");
    log::warn(result.warnings.back());
    return result;
  }

  LabelVolume types(pred.dims(), pred.spacing(), std::uint8_t{0});
  for (std::size_t i = 0; i < pred.size(); ++i)
    types[i] = static_cast<std::uint8_t>(rib_type_of(pred[i]));

  std::array<ComponentSet, 2> groups{ComponentSet{{}, all.dims, all.spacing},
                                     ComponentSet{{}, all.dims, all.spacing}};
  std::array<SideReport, 2> reports{};
  reports[0].side = Side::right;
  reports[1].side = Side::left;
  for (const auto& c : all.components) {
    const Side s = detail::component_side(c, midline_x, &result.warnings);
    const int g = s == Side::right ? 0 : 1;
    if (c.voxel_count < cfg.min_voxels) {
      for (std::size_t v : c.voxels) result.labels[v] = 0;
      ++reports[g].removed_small;
      continue;
    }
    groups[g].components.push_back(c);
  }

  for (int g = 0; g < 2; ++g) {
    const ComponentSet& cs = groups[g];
    SideReport& report = reports[g];
    report.components = cs.components.size();
    if (cs.components.empty()) continue;

    const auto order = sort_by_height(cs);
    const auto caps = component_capacities(cs);
    const int side_total = std::accumulate(caps.begin(), caps.end(), 0);
    if (side_total > kRibTypes)
      throw RefusalError("refusing to assign " + std::to_string(side_total) + " ribs to " +
                         to_string(report.side) + " side (more than " +
                         std::to_string(kRibTypes) + ")");

    std::vector<std::vector<int>> probs;
    probs.reserve(order.size());
    for (std::size_t idx : order)
      probs.push_back(probable_types(cs.components[idx], types, cfg.probable_fraction));

    // Topmost run already labeled as one of the first ribs stays untouched.
    std::size_t first = 0;
    auto is_protected = [&](const std::vector<int>& p) {
      return !p.empty() && std::all_of(p.begin(), p.end(), [&](int t) {
        return std::find(cfg.protected_top_types.begin(),
                         cfg.protected_top_types.end(),
                         t) != cfg.protected_top_types.end();
      });
    };
    while (first < order.size() && is_protected(probs[first])) ++first;
    report.protected_count = first;
    if (first == order.size()) continue;

    std::vector<int> rest_caps;
    std::vector<std::vector<int>> rest_probs;
    for (std::size_t r = first; r < order.size(); ++r) {
      rest_caps.push_back(caps[order[r]]);
      rest_probs.push_back(probs[r]);
    }
    // The remaining sequence continues below the protected ribs.
    int anchor = 1;
    for (std::size_t r = 0; r < first; ++r) anchor = std::max(anchor, probs[r].back() + 1);
    const int rest_total = std::accumulate(rest_caps.begin(), rest_caps.end(), 0);
    // An already consistent numbering may skip missing ribs; each component
    // takes its own probable type instead of a consecutive block.
    if (detail::consistent_numbering(rest_caps, rest_probs, anchor)) {
      ComponentAssignment kept;
      kept.start = rest_probs.front().front();
      kept.capacity = rest_caps;
      kept.probables = rest_probs;
      kept.types = rest_probs;
      kept.score = static_cast<int>(rest_probs.size());
      for (std::size_t r = first; r < order.size(); ++r)
        for (std::size_t v : cs.components[order[r]].voxels)
          result.labels[v] = static_cast<std::uint8_t>(
              cfg.convention.label(report.side, rest_probs[r - first].front()));
      report.kept_numbering = true;
      report.assignment = std::move(kept);
      continue;
    }
    if (anchor + rest_total - 1 > kRibTypes) {
      result.warnings.push_back(std::string(to_string(report.side)) + " side: " +
                                std::to_string(rest_total) + " ribs do not fit below type " +
                                std::to_string(anchor - 1) + "; side left unchanged");
      continue;
    }
    ComponentAssignment assignment =
        choose_sequence(rest_caps, rest_probs, to_string(report.side), anchor);

    for (std::size_t r = first; r < order.size(); ++r) {
      const Component& c = cs.components[order[r]];
      const std::vector<int>& block = assignment.types[r - first];
      std::vector<int> new_type(c.voxels.size(), block.front());
      if (block.size() > 1)
        detail::relabel_merged(c, block, types, pred.spacing(), pred.dims(), new_type);
      for (std::size_t k = 0; k < c.voxels.size(); ++k)
        result.labels[c.voxels[k]] = static_cast<std::uint8_t>(
            cfg.convention.label(report.side, new_type[k]));
    }
    report.assignment = std::move(assignment);
  }

  result.sides.assign(reports.begin(), reports.end());
  for (const auto& w : result.warnings) log::warn(w);
  return result;
}

// Zeroes every labeled voxel closer than radius_mm, in-plane, to the
// centerline position at the voxel's height.
inline LabelVolume spine_cut(const LabelVolume& labels, const Centerline& line,
                             double radius_mm = 30.0) {
  LabelVolume out = labels;
  const Dims d = labels.dims();
  const Spacing& s = labels.spacing();
  const double r2 = radius_mm * radius_mm;
  for (std::size_t k = 0; k < d.nz; ++k) {
    const Point3 c = line.at(static_cast<double>(k) * s.dz);
    for (std::size_t j = 0; j < d.ny; ++j) {
      const double dy = static_cast<double>(j) * s.dy - c.y;
      for (std::size_t i = 0; i < d.nx; ++i) {
        std::uint8_t& v = out(i, j, k);
        if (!v) continue;
        const double dx = static_cast<double>(i) * s.dx - c.x;
        if (dx * dx + dy * dy < r2) v = 0;
      }
    }
  }
  return out;
}

}  // namespace ribkit
