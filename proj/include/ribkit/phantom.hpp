#pragma once

// Synthetic ribcage phantoms with exact labels, plus label corruptions that
// mimic common prediction failures (shifted numbering, fused neighbours,
// fractures, missing ribs, ragged boundaries).
//
// Geometry uses only + - * / and sqrt (no trig), so outputs are identical on
// every IEEE-754 platform. Each rib is a tube swept along an elliptical arc in
// the axial plane, starting beside the spine and drooping anteriorly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ribkit/centerline.hpp"
#include "ribkit/components.hpp"
#include "ribkit/error.hpp"
#include "ribkit/rng.hpp"
#include "ribkit/sides.hpp"
#include "ribkit/volume.hpp"

namespace ribkit::phantom {

// ---- corruptions ----------------------------------------------------------------

struct LabelShift {
  int first_type = 1;
  int last_type = 1;
  int delta = 0;
};
struct MergeAdjacent {
  int upper_type = 1;  // bridges types k and k+1 on both sides
};
struct BreakRib {
  int label = 1;
  double gap_mm = 8.0;
  double position = 0.5;  // fraction along the rib, from its outer end
};
struct DropRib {
  int label = 1;
};
struct BoundaryNoise {
  double rate = 0.01;
};

using Corruption = std::variant<LabelShift, MergeAdjacent, BreakRib, DropRib, BoundaryNoise>;

inline std::string to_string(const Corruption& c) {
  std::ostringstream os;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, LabelShift>)
          os << "shift:" << v.first_type << "-" << v.last_type << ":" << (v.delta >= 0 ? "+" : "")
             << v.delta;
        else if constexpr (std::is_same_v<T, MergeAdjacent>)
          os << "merge:" << v.upper_type;
        else if constexpr (std::is_same_v<T, BreakRib>)
          os << "break:" << v.label << ":" << v.gap_mm << ":" << v.position;
        else if constexpr (std::is_same_v<T, DropRib>)
          os << "drop:" << v.label;
        else
          os << "noise:" << v.rate;
      },
      c);
  return os.str();
}

// Parses "shift:8-11:+1", "merge:5", "break:7[:gap_mm[:position]]", "drop:24",
// "noise:0.02".
inline Corruption parse_corruption(const std::string& spec) {
  auto bad = [&](const std::string& why) {
    return UsageError("bad corruption spec '" + spec + "': " + why);
  };
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : spec) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      throw bad("'" + s + "' is not an integer");
    }
    if (used != s.size()) throw bad("'" + s + "' is not an integer");
    return v;
  };
  auto to_double = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw bad("'" + s + "' is not a number");
    }
    if (used != s.size()) throw bad("'" + s + "' is not a number");
    return v;
  };
  const std::string& kind = parts[0];
  if (kind == "shift") {
    if (parts.size() != 3) throw bad("expected shift:FIRST-LAST:DELTA");
    const auto dash = parts[1].find('-');
    if (dash == std::string::npos) throw bad("expected a type range FIRST-LAST");
    LabelShift s{to_int(parts[1].substr(0, dash)), to_int(parts[1].substr(dash + 1)),
                 to_int(parts[2])};
    if (s.first_type < 1 || s.last_type > kRibTypes || s.first_type > s.last_type)
      throw bad("type range must lie within 1..12");
    return s;
  }
  if (kind == "merge") {
    if (parts.size() != 2) throw bad("expected merge:TYPE");
    MergeAdjacent m{to_int(parts[1])};
    if (m.upper_type < 1 || m.upper_type >= kRibTypes) throw bad("type must be in 1..11");
    return m;
  }
  if (kind == "break") {
    if (parts.size() < 2 || parts.size() > 4) throw bad("expected break:LABEL[:GAP_MM[:POSITION]]");
    BreakRib b{to_int(parts[1])};
    if (parts.size() > 2) b.gap_mm = to_double(parts[2]);
    if (parts.size() > 3) b.position = to_double(parts[3]);
    if (b.label < 1 || b.label > kMaxLabel) throw bad("label must be in 1..24");
    if (!(b.gap_mm >= 0.0) || !(b.position > 0.0 && b.position < 1.0))
      throw bad("gap must be >= 0 and position in (0, 1)");
    return b;
  }
  if (kind == "drop") {
    if (parts.size() != 2) throw bad("expected drop:LABEL");
    DropRib d{to_int(parts[1])};
    if (d.label < 1 || d.label > kMaxLabel) throw bad("label must be in 1..24");
    return d;
  }
  if (kind == "noise") {
    if (parts.size() != 2) throw bad("expected noise:RATE");
    BoundaryNoise n{to_double(parts[1])};
    if (!(n.rate >= 0.0 && n.rate <= 1.0)) throw bad("rate must be in [0, 1]");
    return n;
  }
  throw bad("unknown kind '" + kind + "'");
}

namespace detail {

inline bool has_label(const LabelVolume& labels, int label) {
  return std::find(labels.data().begin(), labels.data().end(), label) != labels.data().end();
}

inline void require_label(const LabelVolume& labels, int label) {
  if (!has_label(labels, label))
    throw InvalidArgument("corruption target label " + std::to_string(label) +
                          " is not present");
}

inline void apply(LabelVolume& labels, const LabelShift& s, Rng&) {
  bool any = false;
  for (auto& v : labels.data()) {
    if (!v) continue;
    const int type = rib_type_of(v);
    if (type < s.first_type || type > s.last_type) continue;
    any = true;
    const int base = v - type;
    v = static_cast<std::uint8_t>(base + std::clamp(type + s.delta, 1, kRibTypes));
  }
  if (!any)
    throw InvalidArgument("label shift: no voxels with types " + std::to_string(s.first_type) +
                          ".." + std::to_string(s.last_type));
}

inline void bridge(LabelVolume& labels, int upper, int lower) {
  const Dims d = labels.dims();
  const double cx = static_cast<double>(d.nx - 1) / 2.0;
  // Most lateral voxel of the upper rib, then the nearest voxel of the lower.
  std::size_t from = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == upper) {
      const double lateral = std::abs(static_cast<double>(labels.coords(i).x) - cx);
      if (lateral > best) {
        best = lateral;
        from = i;
      }
    }
  const Index3 a = labels.coords(from);
  std::size_t to = 0;
  double nearest = std::numeric_limits<double>::infinity();
  const Spacing& s = labels.spacing();
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == lower) {
      const Index3 b = labels.coords(i);
      const double ddx = (static_cast<double>(b.x) - static_cast<double>(a.x)) * s.dx;
      const double ddy = (static_cast<double>(b.y) - static_cast<double>(a.y)) * s.dy;
      const double ddz = (static_cast<double>(b.z) - static_cast<double>(a.z)) * s.dz;
      const double dist = ddx * ddx + ddy * ddy + ddz * ddz;
      if (dist < nearest) {
        nearest = dist;
        to = i;
      }
    }
  const Index3 b = labels.coords(to);
  const long steps = std::max({std::labs(static_cast<long>(b.x) - static_cast<long>(a.x)),
                               std::labs(static_cast<long>(b.y) - static_cast<long>(a.y)),
                               std::labs(static_cast<long>(b.z) - static_cast<long>(a.z)), 1L});
  for (long k = 0; k <= steps; ++k) {
    auto lerp = [&](std::size_t p, std::size_t q) {
      const double t = static_cast<double>(k) / static_cast<double>(steps);
      return static_cast<std::size_t>(std::floor(
          static_cast<double>(p) + (static_cast<double>(q) - static_cast<double>(p)) * t + 0.5));
    };
    std::uint8_t& v = labels(lerp(a.x, b.x), lerp(a.y, b.y), lerp(a.z, b.z));
    if (!v) v = static_cast<std::uint8_t>(upper);
  }
}

inline void apply(LabelVolume& labels, const MergeAdjacent& m, Rng&) {
  bool any = false;
  for (int offset : {0, kRibTypes}) {
    const int upper = m.upper_type + offset, lower = upper + 1;
    if (!has_label(labels, upper) || !has_label(labels, lower)) continue;
    bridge(labels, upper, lower);
    any = true;
  }
  if (!any)
    throw InvalidArgument("merge: rib types " + std::to_string(m.upper_type) + " and " +
                          std::to_string(m.upper_type + 1) + " are not both present on any side");
}

inline void apply(LabelVolume& labels, const BreakRib& b, Rng&) {
  require_label(labels, b.label);
  const Spacing& s = labels.spacing();
  std::vector<std::size_t> voxels;
  double cx = 0, cy = 0, cz = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == b.label) {
      voxels.push_back(i);
      const Point3 p = labels.position(i);
      cx += p.x;
      cy += p.y;
      cz += p.z;
    }
  const double n = static_cast<double>(voxels.size());
  cx /= n;
  cy /= n;
  cz /= n;
  // One end of the rib: the voxel farthest from its centroid.
  std::size_t start = voxels.front();
  double far = -1.0;
  for (std::size_t i : voxels) {
    const Point3 p = labels.position(i);
    const double d2 = (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy) + (p.z - cz) * (p.z - cz);
    if (d2 > far) {
      far = d2;
      start = i;
    }
  }
  // Hop distance from that end within the rib.
  constexpr std::uint32_t unset = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> hops(labels.size(), unset);
  std::vector<std::size_t> queue{start};
  hops[start] = 0;
  const auto offsets = neighbor_offsets(Connectivity::twentysix);
  const Dims d = labels.dims();
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const std::size_t v = queue[head];
    const Index3 p = labels.coords(v);
    for (const auto& o : offsets) {
      const long x = static_cast<long>(p.x) + o[0], y = static_cast<long>(p.y) + o[1],
                 z = static_cast<long>(p.z) + o[2];
      if (x < 0 || y < 0 || z < 0 || x >= static_cast<long>(d.nx) ||
          y >= static_cast<long>(d.ny) || z >= static_cast<long>(d.nz))
        continue;
      const std::size_t q = labels.index(x, y, z);
      if (labels[q] == b.label && hops[q] == unset) {
        hops[q] = hops[v] + 1;
        queue.push_back(q);
      }
    }
  }
  std::uint32_t length = 0;
  for (std::size_t i : voxels)
    if (hops[i] != unset) length = std::max(length, hops[i]);
  const double min_spacing = std::min({s.dx, s.dy, s.dz});
  const auto half = static_cast<std::uint32_t>(std::floor(b.gap_mm / (2.0 * min_spacing)));
  if (length < 2 * half + 2)
    throw InvalidArgument("break: rib " + std::to_string(b.label) + " is too short for a " +
                          std::to_string(b.gap_mm) + " mm gap");
  auto center = static_cast<std::uint32_t>(std::floor(b.position * length + 0.5));
  center = std::clamp(center, half + 1, length - half - 1);
  for (std::size_t i : voxels)
    if (hops[i] != unset && hops[i] + half >= center && hops[i] <= center + half) labels[i] = 0;
}

inline void apply(LabelVolume& labels, const DropRib& r, Rng&) {
  require_label(labels, r.label);
  for (auto& v : labels.data())
    if (v == r.label) v = 0;
}

inline void apply(LabelVolume& labels, const BoundaryNoise& n, Rng& rng) {
  const Dims d = labels.dims();
  const LabelVolume before = labels;
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        if (!before(x, y, z)) continue;
        const bool surface =
            x == 0 || y == 0 || z == 0 || x + 1 == d.nx || y + 1 == d.ny || z + 1 == d.nz ||
            !before(x - 1, y, z) || !before(x + 1, y, z) || !before(x, y - 1, z) ||
            !before(x, y + 1, z) || !before(x, y, z - 1) || !before(x, y, z + 1);
        if (surface && rng.uniform() < n.rate) labels(x, y, z) = 0;
      }
}

}  // namespace detail

// Applies one corruption; dims and spacing are unchanged.
inline LabelVolume corrupt(const LabelVolume& labels, const Corruption& c, std::uint64_t seed = 0) {
  LabelVolume out = labels;
  Rng rng(seed);
  std::visit([&](const auto& v) { detail::apply(out, v, rng); }, c);
  return out;
}

// ---- generator --------------------------------------------------------------------

struct PhantomConfig {
  int rib_pairs = 12;
  Dims dims{160, 160, 200};
  double spacing_mm = 2.0;
  double rib_radius_mm = 4.0;
  double rib_gap_mm = 18.0;      // clear vertical gap between consecutive ribs
  double spine_radius_mm = 9.0;
  double rib_head_mm = 14.0;     // lateral offset of each rib head from the midline
  double droop_mm = 16.0;        // anterior end sits this much below the head
  double scale = 1.0;            // ribcage size multiplier
  std::vector<Corruption> corruptions;
  std::uint64_t seed = 0;

  void validate() const {
    if (rib_pairs < 1 || rib_pairs > 13)
      throw InvalidArgument("rib_pairs must be in 1..13, got " + std::to_string(rib_pairs));
    if (!(rib_radius_mm > 0) || !(rib_gap_mm > 0) || !(spine_radius_mm > 0) ||
        !(rib_head_mm > 0) || !(droop_mm >= 0) || !(scale > 0) || !(spacing_mm > 0))
      throw InvalidArgument("phantom sizes must be positive");
  }
};

struct Phantom {
  Volume intensity;  // HU
  LabelVolume labels;
  Centerline centerline;
  std::vector<LabelVolume> variants;  // one per configured corruption
};

inline constexpr float kBoneHU = 700.0f;
inline constexpr float kSoftTissueHU = 40.0f;
inline constexpr float kAirHU = -1000.0f;

namespace detail {

struct RibShape {
  double a, b;       // lateral and antero-posterior semi-axes, mm
  double u_end;      // end of the half-angle-tangent parameter
};

// Middle ribs are the widest; the floating ribs are short.
inline RibShape rib_shape(int type, double scale) {
  const double k = (type - 7) / 6.0;
  const double w = std::max(0.0, 1.0 - k * k);
  double u_end = 2.5;
  if (type == 11) u_end = 1.5;
  if (type == 12) u_end = 1.0;
  if (type >= 13) u_end = 0.8;
  return {scale * (60.0 + 45.0 * w), scale * (55.0 + 25.0 * w), u_end};
}

inline double segment_distance2(const Point3& p, const Point3& a, const Point3& b) {
  const double vx = b.x - a.x, vy = b.y - a.y, vz = b.z - a.z;
  const double wx = p.x - a.x, wy = p.y - a.y, wz = p.z - a.z;
  const double vv = vx * vx + vy * vy + vz * vz;
  double t = vv > 0.0 ? (wx * vx + wy * vy + wz * vz) / vv : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = wx - t * vx, dy = wy - t * vy, dz = wz - t * vz;
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace detail

inline Phantom generate(const PhantomConfig& cfg) {
  cfg.validate();
  const Spacing sp = Spacing::isotropic(cfg.spacing_mm);
  const Dims d = cfg.dims;
  const double x_ext = static_cast<double>(d.nx - 1) * sp.dx;
  const double y_ext = static_cast<double>(d.ny - 1) * sp.dy;
  const double z_ext = static_cast<double>(d.nz - 1) * sp.dz;
  const double cx = x_ext / 2.0;
  const double cy = 0.68 * y_ext;
  const double pitch = cfg.rib_gap_mm + 2.0 * cfg.rib_radius_mm;
  const double z_top = z_ext - 0.095 * z_ext;
  const LabelConvention convention{};

  LabelVolume labels(d, sp, std::uint8_t{0});
  auto refuse = [](const std::string& why) { return RefusalError("phantom: " + why); };

  const double r = cfg.rib_radius_mm;
  const double r2 = r * r;
  for (int pair = 1; pair <= cfg.rib_pairs; ++pair) {
    const int type = std::min(pair, kRibTypes);  // a 13th rib reuses type 12
    const detail::RibShape shape = detail::rib_shape(pair, cfg.scale);
    const double head = cfg.rib_head_mm / shape.a;
    if (head >= 1.0) throw refuse("rib head offset exceeds the ribcage width");
    const double u0 = (1.0 - std::sqrt(1.0 - head * head)) / head;
    if (shape.u_end <= u0) throw refuse("rib " + std::to_string(pair) + " has no length");
    const double z_head = z_top - (pair - 1) * pitch;

    for (Side side : {Side::right, Side::left}) {
      const double sign = side == Side::right ? 1.0 : -1.0;
      const auto label = static_cast<std::uint8_t>(convention.label(side, type));
      constexpr int samples = 256;
      std::vector<Point3> path(samples + 1);
      for (int k = 0; k <= samples; ++k) {
        const double f = static_cast<double>(k) / samples;
        const double u = u0 + (shape.u_end - u0) * f;
        const double c = (1.0 - u * u) / (1.0 + u * u);
        const double s = 2.0 * u / (1.0 + u * u);
        path[k] = {cx + sign * shape.a * s, cy - shape.b * (1.0 - c), z_head - cfg.droop_mm * f};
      }
      for (int k = 0; k < samples; ++k) {
        const Point3& a = path[k];
        const Point3& b = path[k + 1];
        auto range = [&](double lo, double hi, double step, std::size_t n, const char* axis) {
          const double first = std::ceil((lo - r) / step);
          const double last = std::floor((hi + r) / step);
          if (first < 0 || last > static_cast<double>(n - 1))
            throw refuse(std::string("rib leaves the volume along ") + axis);
          return std::pair<std::size_t, std::size_t>(static_cast<std::size_t>(first),
                                                     static_cast<std::size_t>(last));
        };
        const auto [x0, x1] = range(std::min(a.x, b.x), std::max(a.x, b.x), sp.dx, d.nx, "x");
        const auto [y0, y1] = range(std::min(a.y, b.y), std::max(a.y, b.y), sp.dy, d.ny, "y");
        const auto [z0, z1] = range(std::min(a.z, b.z), std::max(a.z, b.z), sp.dz, d.nz, "z");
        for (std::size_t z = z0; z <= z1; ++z)
          for (std::size_t y = y0; y <= y1; ++y)
            for (std::size_t x = x0; x <= x1; ++x) {
              const Point3 p{static_cast<double>(x) * sp.dx, static_cast<double>(y) * sp.dy,
                             static_cast<double>(z) * sp.dz};
              if (detail::segment_distance2(p, a, b) > r2) continue;
              std::uint8_t& v = labels(x, y, z);
              if (v && v != label) throw refuse("ribs overlap; increase the gap");
              v = label;
            }
      }
    }
  }

  // Distinct ribs must not touch, even diagonally.
  const auto offsets = neighbor_offsets(Connectivity::twentysix);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    const Index3 p = labels.coords(i);
    for (const auto& o : offsets) {
      const long x = static_cast<long>(p.x) + o[0], y = static_cast<long>(p.y) + o[1],
                 z = static_cast<long>(p.z) + o[2];
      if (x < 0 || y < 0 || z < 0 || x >= static_cast<long>(d.nx) ||
          y >= static_cast<long>(d.ny) || z >= static_cast<long>(d.nz))
        continue;
      const std::uint8_t n = labels(x, y, z);
      if (n && n != labels[i]) throw refuse("ribs touch; increase the gap");
    }
  }

  // Intensities: air, an elliptical soft-tissue body, bone for spine and ribs.
  Volume intensity(d, sp, kAirHU);
  Rng rng(cfg.seed);
  const double body_cy = cy - cfg.scale * 70.0;
  const double body_a = cfg.scale * 120.0 + 15.0, body_b = cfg.scale * 100.0 + 25.0;
  const double spine2 = cfg.spine_radius_mm * cfg.spine_radius_mm;
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const double px = static_cast<double>(x) * sp.dx, py = static_cast<double>(y) * sp.dy;
        const double ex = (px - cx) / body_a, ey = (py - body_cy) / body_b;
        const double sx = px - cx, sy = py - cy;
        float v = kAirHU;
        if (ex * ex + ey * ey <= 1.0) v = kSoftTissueHU;
        if (sx * sx + sy * sy <= spine2 || labels(x, y, z)) v = kBoneHU;
        const auto noise = static_cast<int>(rng.below(41)) - 20;
        intensity(x, y, z) = v + static_cast<float>(noise);
      }

  std::vector<Point3> line;
  for (int k = 0; k <= 4; ++k) line.push_back({cx, cy, z_ext * k / 4.0});

  Phantom out{std::move(intensity), std::move(labels), Centerline(std::move(line)), {}};
  for (std::size_t i = 0; i < cfg.corruptions.size(); ++i)
    out.variants.push_back(corrupt(out.labels, cfg.corruptions[i], cfg.seed + 1 + i));
  return out;
}

}  // namespace ribkit::phantom
