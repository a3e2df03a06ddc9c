#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ribkit/error.hpp"
#include "ribkit/volume.hpp"

namespace ribkit {

// Spine centerline: a polyline in millimeters with strictly increasing z.
class Centerline {
 public:
  explicit Centerline(std::vector<Point3> points) : points_(std::move(points)) {
    if (points_.size() < 2)
      throw InvalidArgument("centerline needs at least 2 points, got " +
                            std::to_string(points_.size()));
    for (std::size_t i = 1; i < points_.size(); ++i)
      if (!(points_[i].z > points_[i - 1].z))
        throw InvalidArgument("centerline z must be strictly increasing at point " +
                              std::to_string(i));
  }

  const std::vector<Point3>& points() const { return points_; }

  // In-plane position at height z. Heights outside the covered range are
  // extrapolated linearly from the nearest end segment.
  Point3 at(double z) const {
    std::size_t seg = 0;
    while (seg + 2 < points_.size() && z > points_[seg + 1].z) ++seg;
    const Point3& a = points_[seg];
    const Point3& b = points_[seg + 1];
    const double t = (z - a.z) / (b.z - a.z);
    return {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, z};
  }

  double mean_x() const {
    double s = 0.0;
    for (const auto& p : points_) s += p.x;
    return s / static_cast<double>(points_.size());
  }

 private:
  std::vector<Point3> points_;
};

}  // namespace ribkit
