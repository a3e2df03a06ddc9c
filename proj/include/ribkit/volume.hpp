#pragma once

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
#include "ribkit/parallel.hpp"

namespace ribkit {

inline constexpr std::uint8_t kMaxLabel = 24;
inline constexpr int kRibTypes = 12;

// Millimeters per voxel along x, y, z.
struct Spacing {
  double dx = 1.0;
  double dy = 1.0;
  double dz = 1.0;

  Spacing() = default;
  Spacing(double x, double y, double z) : dx(x), dy(y), dz(z) { validate(); }

  static Spacing isotropic(double s) { return {s, s, s}; }

  double operator[](int axis) const {
    return axis == 0 ? dx : axis == 1 ? dy : dz;
  }

  void validate() const {
    for (double v : {dx, dy, dz})
      if (!(v > 0.0) || !std::isfinite(v)) {
        std::ostringstream os;
        os << "spacing must be positive and finite, got (" << dx << ", " << dy
           << ", " << dz << ")";
        throw InvalidArgument(os.str());
      }
  }

  friend bool operator==(const Spacing&, const Spacing&) = default;
};

struct Dims {
  std::size_t nx = 1;
  std::size_t ny = 1;
  std::size_t nz = 1;

  std::size_t size() const { return nx * ny * nz; }
  std::size_t operator[](int axis) const {
    return axis == 0 ? nx : axis == 1 ? ny : nz;
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(const Dims& d) {
  std::ostringstream os;
  os << d.nx << "x" << d.ny << "x" << d.nz;
  return os.str();
}

struct Index3 {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t z = 0;
};

// Physical position in millimeters. Voxel (i, j, k) is centered at
// (i * dx, j * dy, k * dz); the third axis is vertical, larger z is superior.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// Dense 3D grid, x fastest. Dims are fixed at construction.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(Dims dims, Spacing spacing, T fill = T{})
      : dims_(dims), spacing_(spacing) {
    check_dims(dims_);
    spacing_.validate();
    data_.assign(dims_.size(), fill);
  }

  Grid(Dims dims, Spacing spacing, std::vector<T> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    check_dims(dims_);
    spacing_.validate();
    if (data_.size() != dims_.size()) {
      std::ostringstream os;
      os << "data length " << data_.size() << " does not match dims "
         << to_string(dims_);
      throw InvalidArgument(os.str());
    }
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims_.nx * (y + dims_.ny * z);
  }
  Index3 coords(std::size_t i) const {
    return {i % dims_.nx, (i / dims_.nx) % dims_.ny, i / (dims_.nx * dims_.ny)};
  }
  Point3 position(std::size_t i) const {
    const Index3 c = coords(i);
    return {static_cast<double>(c.x) * spacing_.dx,
            static_cast<double>(c.y) * spacing_.dy,
            static_cast<double>(c.z) * spacing_.dz};
  }

  T& operator()(std::size_t x, std::size_t y, std::size_t z) {
    return data_[index(x, y, z)];
  }
  const T& operator()(std::size_t x, std::size_t y, std::size_t z) const {
    return data_[index(x, y, z)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_geometry(const Grid<T>& other) const {
    return dims_ == other.dims_ && spacing_ == other.spacing_;
  }
  template <typename U>
  bool same_geometry(const Grid<U>& other) const {
    return dims_ == other.dims() && spacing_ == other.spacing();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static void check_dims(const Dims& d) {
    if (d.nx == 0 || d.ny == 0 || d.nz == 0)
      throw InvalidArgument("volume dims must all be >= 1, got " +
                            to_string(d));
  }

  Dims dims_{};
  Spacing spacing_{};
  std::vector<T> data_ = std::vector<T>(1);
};

using Volume = Grid<float>;
using LabelVolume = Grid<std::uint8_t>;

template <typename A, typename B>
void require_same_geometry(const Grid<A>& a, const Grid<B>& b,
                           const char* what) {
  if (!a.same_geometry(b)) {
    std::ostringstream os;
    os << what << ": geometry mismatch (" << to_string(a.dims()) << " vs "
       << to_string(b.dims()) << ")";
    throw InvalidArgument(os.str());
  }
}

inline void validate_labels(const LabelVolume& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > kMaxLabel)
      throw InvalidArgument("label " + std::to_string(labels[i]) +
                            " outside {0..24} at voxel " + std::to_string(i));
}

// Rib type 1..12 of a side-encoded label 1..24; 0 for background.
inline int rib_type_of(int label) {
  return label == 0 ? 0 : (label - 1) % kRibTypes + 1;
}

// Bone window, in HU.
struct WindowConfig {
  double lo = -450.0;
  double hi = 1050.0;

  void validate() const {
    if (!(lo < hi))
      throw UsageError("window lower bound must be below upper bound");
  }
};

inline Volume normalize_bone_window(const Volume& vol, WindowConfig w = {}) {
  w.validate();
  Volume out = vol;
  const double width = w.hi - w.lo;
  for (auto& v : out.data())
    v = static_cast<float>(std::clamp((v - w.lo) / width, 0.0, 1.0));
  return out;
}

namespace detail {

inline std::size_t resampled_extent(std::size_t n, double from, double to) {
  const double ratio = static_cast<double>(n) * from / to;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(ratio + 0.5)));
}

inline Dims resampled_dims(const Dims& d, const Spacing& from,
                           const Spacing& to) {
  return {resampled_extent(d.nx, from.dx, to.dx),
          resampled_extent(d.ny, from.dy, to.dy),
          resampled_extent(d.nz, from.dz, to.dz)};
}

// Source coordinate (in input voxel units) of output voxel j, clamped.
inline double source_coord(std::size_t j, double ratio, std::size_t n) {
  const double u = static_cast<double>(j) * ratio;
  return std::clamp(u, 0.0, static_cast<double>(n - 1));
}

}  // namespace detail

// Trilinear resampling onto a new spacing. Output voxel centers map into the
// input grid by physical position; samples past the last input center clamp
// to the edge.
inline Volume resample_linear(const Volume& vol, const Spacing& target) {
  target.validate();
  const Dims in = vol.dims();
  const Spacing& s = vol.spacing();
  const Dims out_dims = detail::resampled_dims(in, s, target);
  Volume out(out_dims, target);

  const std::array<double, 3> ratio{target.dx / s.dx, target.dy / s.dy,
                                    target.dz / s.dz};

  struct Tap {
    std::size_t i0, i1;
    double w;
  };
  auto taps = [&](int axis, std::size_t n_out) {
    std::vector<Tap> t(n_out);
    const std::size_t n = in[axis];
    for (std::size_t j = 0; j < n_out; ++j) {
      const double u = detail::source_coord(j, ratio[axis], n);
      const auto i0 = static_cast<std::size_t>(std::floor(u));
      const std::size_t i1 = std::min(i0 + 1, n - 1);
      t[j] = {i0, i1, u - static_cast<double>(i0)};
    }
    return t;
  };
  const auto tx = taps(0, out_dims.nx);
  const auto ty = taps(1, out_dims.ny);
  const auto tz = taps(2, out_dims.nz);

  parallel_for(out_dims.nz, [&](std::size_t k) {
    const Tap& z = tz[k];
    for (std::size_t j = 0; j < out_dims.ny; ++j) {
      const Tap& y = ty[j];
      for (std::size_t i = 0; i < out_dims.nx; ++i) {
        const Tap& x = tx[i];
        auto lerp_x = [&](std::size_t yy, std::size_t zz) {
          const double a = vol(x.i0, yy, zz);
          const double b = vol(x.i1, yy, zz);
          return x.w == 0.0 ? a : a + (b - a) * x.w;
        };
        auto lerp_y = [&](std::size_t zz) {
          const double a = lerp_x(y.i0, zz);
          if (y.w == 0.0) return a;
          return a + (lerp_x(y.i1, zz) - a) * y.w;
        };
        const double a = lerp_y(z.i0);
        const double v = z.w == 0.0 ? a : a + (lerp_y(z.i1) - a) * z.w;
        out(i, j, k) = static_cast<float>(v);
      }
    }
  });
  return out;
}

// Nearest-neighbor resampling for label maps; never blends labels.
// Exact half-way samples round up.
inline LabelVolume resample_nearest(const LabelVolume& labels,
                                    const Spacing& target) {
  target.validate();
  const Dims in = labels.dims();
  const Spacing& s = labels.spacing();
  const Dims out_dims = detail::resampled_dims(in, s, target);
  LabelVolume out(out_dims, target);

  auto nearest = [&](int axis, std::size_t n_out, double ratio) {
    std::vector<std::size_t> idx(n_out);
    for (std::size_t j = 0; j < n_out; ++j)
      idx[j] = static_cast<std::size_t>(
          std::floor(detail::source_coord(j, ratio, in[axis]) + 0.5));
    return idx;
  };
  const auto ix = nearest(0, out_dims.nx, target.dx / s.dx);
  const auto iy = nearest(1, out_dims.ny, target.dy / s.dy);
  const auto iz = nearest(2, out_dims.nz, target.dz / s.dz);

  for (std::size_t k = 0; k < out_dims.nz; ++k)
    for (std::size_t j = 0; j < out_dims.ny; ++j)
      for (std::size_t i = 0; i < out_dims.nx; ++i)
        out(i, j, k) = labels(ix[i], iy[j], iz[k]);
  return out;
}

}  // namespace ribkit
