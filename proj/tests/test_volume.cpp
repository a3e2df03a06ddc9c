#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ribkit/rng.hpp"
#include "ribkit/volume.hpp"

using namespace ribkit;

namespace {

// Scalar trilinear interpolation at a physical point, edge-clamped.
double trilinear_at(const Volume& v, double px, double py, double pz) {
  const Spacing& s = v.spacing();
  const Dims d = v.dims();
  const double u[3] = {std::clamp(px / s.dx, 0.0, double(d.nx - 1)),
                       std::clamp(py / s.dy, 0.0, double(d.ny - 1)),
                       std::clamp(pz / s.dz, 0.0, double(d.nz - 1))};
  const std::size_t n[3] = {d.nx, d.ny, d.nz};
  std::size_t lo[3], hi[3];
  double w[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = static_cast<std::size_t>(u[a]);
    hi[a] = std::min(lo[a] + 1, n[a] - 1);
    w[a] = u[a] - double(lo[a]);
  }
  double acc = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    double weight = 1.0;
    std::size_t idx[3];
    for (int a = 0; a < 3; ++a) {
      const bool up = (corner >> a) & 1;
      idx[a] = up ? hi[a] : lo[a];
      weight *= up ? w[a] : 1.0 - w[a];
    }
    acc += weight * v(idx[0], idx[1], idx[2]);
  }
  return acc;
}

Volume random_volume(Rng& rng, Dims d, Spacing s) {
  Volume v(d, s);
  for (auto& x : v.data()) x = static_cast<float>(rng.uniform(-1000.0, 1500.0));
  return v;
}

std::size_t dim(Rng& rng, int hi) { return static_cast<std::size_t>(rng.between(1, hi)); }

}  // namespace

TEST(Spacing, RejectsNonPositiveAndNonFinite) {
  EXPECT_THROW(Spacing(0.0, 1.0, 1.0), InvalidArgument);
  EXPECT_THROW(Spacing(1.0, -2.0, 1.0), InvalidArgument);
  EXPECT_THROW(Spacing(1.0, 1.0, std::nan("")), InvalidArgument);
  EXPECT_THROW(Spacing(1.0, 1.0, INFINITY), InvalidArgument);
  EXPECT_NO_THROW(Spacing(0.5, 1.0, 2.5));
}

TEST(Grid, RejectsEmptyDimsAndWrongDataLength) {
  EXPECT_THROW(Volume(Dims{0, 2, 2}, Spacing{}), InvalidArgument);
  EXPECT_THROW(Volume(Dims{2, 2, 2}, Spacing{}, std::vector<float>(7)), InvalidArgument);
}

TEST(Grid, IndexingIsXFastest) {
  Volume v(Dims{3, 4, 5}, Spacing{1.0, 2.0, 3.0});
  EXPECT_EQ(v.index(1, 0, 0), 1u);
  EXPECT_EQ(v.index(0, 1, 0), 3u);
  EXPECT_EQ(v.index(0, 0, 1), 12u);
  const Index3 c = v.coords(v.index(2, 3, 4));
  EXPECT_EQ(c.x, 2u);
  EXPECT_EQ(c.y, 3u);
  EXPECT_EQ(c.z, 4u);
  const Point3 p = v.position(v.index(2, 3, 4));
  EXPECT_DOUBLE_EQ(p.x, 2.0);
  EXPECT_DOUBLE_EQ(p.y, 6.0);
  EXPECT_DOUBLE_EQ(p.z, 12.0);
}

TEST(Labels, ValidationRejectsOutOfDomain) {
  LabelVolume l(Dims{2, 2, 2}, Spacing{}, std::uint8_t{24});
  EXPECT_NO_THROW(validate_labels(l));
  l[3] = 25;
  EXPECT_THROW(validate_labels(l), InvalidArgument);
}

TEST(Labels, RibTypeOfFoldsSides) {
  EXPECT_EQ(rib_type_of(0), 0);
  EXPECT_EQ(rib_type_of(1), 1);
  EXPECT_EQ(rib_type_of(12), 12);
  EXPECT_EQ(rib_type_of(13), 1);
  EXPECT_EQ(rib_type_of(24), 12);
}

TEST(Window, PinnedValues) {
  Volume v(Dims{5, 1, 1}, Spacing{});
  v.data() = {-450.f, 1050.f, 300.f, -2000.f, 5000.f};
  const Volume n = normalize_bone_window(v);
  EXPECT_EQ(n[0], 0.0f);
  EXPECT_EQ(n[1], 1.0f);
  EXPECT_FLOAT_EQ(n[2], 0.5f);
  EXPECT_EQ(n[3], 0.0f);
  EXPECT_EQ(n[4], 1.0f);
}

TEST(Window, InvertedBoundsAreAUsageError) {
  Volume v(Dims{1, 1, 1}, Spacing{});
  EXPECT_THROW(normalize_bone_window(v, WindowConfig{1050, -450}), UsageError);
  EXPECT_THROW(normalize_bone_window(v, WindowConfig{10, 10}), UsageError);
}

TEST(Window, MonotoneAndBounded) {
  Rng rng(3);
  Volume v(Dims{1000, 1, 1}, Spacing{});
  for (auto& x : v.data()) x = static_cast<float>(rng.uniform(-3000.0, 3000.0));
  std::sort(v.data().begin(), v.data().end());
  const Volume n = normalize_bone_window(v);
  for (std::size_t i = 0; i < n.size(); ++i) {
    EXPECT_GE(n[i], 0.0f);
    EXPECT_LE(n[i], 1.0f);
    if (i) {
      EXPECT_LE(n[i - 1], n[i]);
    }
  }
}

TEST(ResampleLinear, IdentitySpacingIsExact) {
  Rng rng(1);
  const Volume v = random_volume(rng, Dims{7, 5, 6}, Spacing::isotropic(2.0));
  const Volume r = resample_linear(v, Spacing::isotropic(2.0));
  EXPECT_EQ(r.dims(), v.dims());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(r[i], v[i], 1e-6);
}

TEST(ResampleLinear, ConstantStaysConstant) {
  Volume v(Dims{9, 4, 7}, Spacing{0.7, 1.3, 2.9}, 42.5f);
  for (double t : {0.5, 1.0, 2.0, 3.7}) {
    const Volume r = resample_linear(v, Spacing::isotropic(t));
    for (float x : r.data()) EXPECT_EQ(x, 42.5f);
  }
}

TEST(ResampleLinear, RampDownsampledMatchesAnalyticRamp) {
  Volume v(Dims{4, 4, 4}, Spacing::isotropic(1.0));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(v.coords(i).x * 10);
  const Volume r = resample_linear(v, Spacing::isotropic(2.0));
  ASSERT_EQ(r.dims(), (Dims{2, 2, 2}));
  for (std::size_t i = 0; i < r.size(); ++i)
    EXPECT_NEAR(r[i], 10.0 * r.position(i).x, 1e-6);
}

TEST(ResampleLinear, DimsRoundHalfUp) {
  EXPECT_EQ(detail::resampled_extent(5, 1.0, 2.0), 3u);   // 2.5 -> 3
  EXPECT_EQ(detail::resampled_extent(7, 1.0, 3.0), 2u);   // 2.33 -> 2
  EXPECT_EQ(detail::resampled_extent(1, 1.0, 10.0), 1u);  // floor at 1
  EXPECT_EQ(detail::resampled_extent(100, 0.8, 2.0), 40u);
}

TEST(ResampleLinear, MatchesScalarOracleOnRandomVolumes) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Dims d{dim(rng, 9), dim(rng, 9), dim(rng, 9)};
    const Spacing s{rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0)};
    const Volume v = random_volume(rng, d, s);
    const Spacing t{rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0)};
    const Volume r = resample_linear(v, t);
    EXPECT_EQ(r.spacing(), t);
    for (std::size_t i = 0; i < r.size(); ++i) {
      const Point3 p = r.position(i);
      EXPECT_NEAR(r[i], trilinear_at(v, p.x, p.y, p.z), 1e-3) << "trial " << trial;
    }
  }
}

TEST(ResampleLinear, ConvexAndIdempotent) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Volume v = random_volume(rng, Dims{8, 6, 10}, Spacing{0.9, 1.1, 1.7});
    const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
    const Spacing t = Spacing::isotropic(rng.uniform(0.8, 2.5));
    const Volume r = resample_linear(v, t);
    for (float x : r.data()) {
      EXPECT_GE(x, *lo);
      EXPECT_LE(x, *hi);
    }
    const Volume rr = resample_linear(r, t);
    ASSERT_EQ(rr.dims(), r.dims());
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(rr[i], r[i], 1e-5);
  }
}

TEST(ResampleLinear, RejectsBadTarget) {
  Volume v(Dims{2, 2, 2}, Spacing{});
  Spacing bad;
  bad.dz = 0.0;
  EXPECT_THROW(resample_linear(v, bad), InvalidArgument);
}

TEST(ResampleNearest, IdentityAndSingleLabel) {
  LabelVolume l(Dims{4, 3, 2}, Spacing::isotropic(1.5));
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = static_cast<std::uint8_t>(i % 25);
  EXPECT_EQ(resample_nearest(l, Spacing::isotropic(1.5)), l);
  LabelVolume one(Dims{5, 5, 5}, Spacing{}, std::uint8_t{7});
  const LabelVolume fine = resample_nearest(one, Spacing::isotropic(0.7));
  for (auto v : fine.data()) EXPECT_EQ(v, 7);
}

TEST(ResampleNearest, CheckerboardMatchesNearestCenterLookup) {
  LabelVolume l(Dims{4, 4, 1}, Spacing::isotropic(1.0));
  for (std::size_t i = 0; i < l.size(); ++i) {
    const Index3 c = l.coords(i);
    l[i] = static_cast<std::uint8_t>((c.x + c.y) % 2 ? 2 : 1);
  }
  const LabelVolume r = resample_nearest(l, Spacing::isotropic(2.0));
  ASSERT_EQ(r.dims(), (Dims{2, 2, 1}));
  for (std::size_t i = 0; i < r.size(); ++i) {
    const Point3 p = r.position(i);
    // Brute force: the input voxel whose center is closest, ties to the larger index.
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t k = 0; k < l.size(); ++k) {
      const Point3 q = l.position(k);
      const double d2 = (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y);
      if (d2 <= best_d) {
        best_d = d2;
        best = k;
      }
    }
    EXPECT_EQ(r[i], l[best]);
  }
}

TEST(ResampleNearest, NeverInventsLabels) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    LabelVolume l(Dims{dim(rng, 8), dim(rng, 8), dim(rng, 8)},
                  Spacing{rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)});
    std::set<int> in;
    for (auto& v : l.data()) {
      v = static_cast<std::uint8_t>(rng.between(0, 24));
      in.insert(v);
    }
    const LabelVolume r = resample_nearest(l, Spacing::isotropic(rng.uniform(0.4, 2.5)));
    for (auto v : r.data()) EXPECT_TRUE(in.count(v));
  }
}
