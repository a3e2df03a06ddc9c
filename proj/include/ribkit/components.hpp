#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ribkit/error.hpp"
#include "ribkit/volume.hpp"

namespace ribkit {

enum class Connectivity { six = 6, eighteen = 18, twentysix = 26 };

inline Connectivity connectivity_from_int(int n) {
  switch (n) {
    case 6: return Connectivity::six;
    case 18: return Connectivity::eighteen;
    case 26: return Connectivity::twentysix;
  }
  throw InvalidArgument("connectivity must be 6, 18 or 26, got " +
                        std::to_string(n));
}

struct BoundingBox {
  Index3 lo;
  Index3 hi;  // inclusive
};

struct Component {
  int id = 0;
  std::size_t voxel_count = 0;
  Point3 centroid;                   // millimeters
  BoundingBox bbox;
  std::vector<std::size_t> voxels;   // linear indices, ascending
};

struct ComponentSet {
  std::vector<Component> components;  // ids 0..n-1, descending voxel_count
  Dims dims;
  Spacing spacing;

  std::size_t foreground_count() const {
    std::size_t n = 0;
    for (const auto& c : components) n += c.voxel_count;
    return n;
  }
};

// Offsets of the half-neighborhood plus its mirror, by connectivity class.
inline std::vector<std::array<int, 3>> neighbor_offsets(Connectivity conn) {
  std::vector<std::array<int, 3>> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int order = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (order == 0) continue;
        if (conn == Connectivity::six && order > 1) continue;
        if (conn == Connectivity::eighteen && order > 2) continue;
        out.push_back({dx, dy, dz});
      }
  return out;
}

// Labels the connected components of a {0,1} mask. Components are returned
// in descending voxel_count order; equal sizes are ordered by their first
// voxel in scan order, so the result does not depend on traversal details.
inline ComponentSet label_components(
    const LabelVolume& mask, Connectivity conn = Connectivity::twentysix) {
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] > 1)
      throw InvalidArgument("label_components expects a binary mask; voxel " +
                            std::to_string(i) + " has value " +
                            std::to_string(mask[i]));

  const Dims d = mask.dims();
  const auto offsets = neighbor_offsets(conn);
  constexpr std::uint32_t unvisited = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> owner(mask.size(), unvisited);

  std::vector<Component> found;
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < mask.size(); ++seed) {
    if (!mask[seed] || owner[seed] != unvisited) continue;
    const auto cid = static_cast<std::uint32_t>(found.size());
    Component c;
    owner[seed] = cid;
    stack.assign(1, seed);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      c.voxels.push_back(v);
      const Index3 p = mask.coords(v);
      for (const auto& o : offsets) {
        const long x = static_cast<long>(p.x) + o[0];
        const long y = static_cast<long>(p.y) + o[1];
        const long z = static_cast<long>(p.z) + o[2];
        if (x < 0 || y < 0 || z < 0 || x >= static_cast<long>(d.nx) ||
            y >= static_cast<long>(d.ny) || z >= static_cast<long>(d.nz))
          continue;
        const std::size_t n = mask.index(x, y, z);
        if (mask[n] && owner[n] == unvisited) {
          owner[n] = cid;
          stack.push_back(n);
        }
      }
    }
    std::sort(c.voxels.begin(), c.voxels.end());
    c.voxel_count = c.voxels.size();

    double sx = 0, sy = 0, sz = 0;
    BoundingBox box{mask.coords(c.voxels.front()), mask.coords(c.voxels.front())};
    for (std::size_t v : c.voxels) {
      const Index3 q = mask.coords(v);
      sx += static_cast<double>(q.x);
      sy += static_cast<double>(q.y);
      sz += static_cast<double>(q.z);
      box.lo = {std::min(box.lo.x, q.x), std::min(box.lo.y, q.y),
                std::min(box.lo.z, q.z)};
      box.hi = {std::max(box.hi.x, q.x), std::max(box.hi.y, q.y),
                std::max(box.hi.z, q.z)};
    }
    const double n = static_cast<double>(c.voxel_count);
    c.centroid = {sx / n * mask.spacing().dx, sy / n * mask.spacing().dy,
                  sz / n * mask.spacing().dz};
    c.bbox = box;
    found.push_back(std::move(c));
  }

  // Discovery order is scan order of each component's first voxel; a stable
  // sort by size keeps that as the tie-break.
  std::stable_sort(found.begin(), found.end(),
                   [](const Component& a, const Component& b) {
                     return a.voxel_count > b.voxel_count;
                   });
  for (std::size_t i = 0; i < found.size(); ++i)
    found[i].id = static_cast<int>(i);

  return {std::move(found), d, mask.spacing()};
}

// Binary mask holding the components with at least min_voxels voxels.
inline LabelVolume filter_small(const ComponentSet& cs, std::size_t min_voxels) {
  LabelVolume out(cs.dims, cs.spacing, std::uint8_t{0});
  for (const auto& c : cs.components)
    if (c.voxel_count >= min_voxels)
      for (std::size_t v : c.voxels) out[v] = 1;
  return out;
}

inline LabelVolume binarize(const LabelVolume& labels) {
  LabelVolume out = labels;
  for (auto& v : out.data()) v = v != 0 ? 1 : 0;
  return out;
}

}  // namespace ribkit
