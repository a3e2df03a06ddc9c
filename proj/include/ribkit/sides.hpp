#pragma once

#include <string>

#include "ribkit/error.hpp"
#include "ribkit/volume.hpp"

namespace ribkit {

enum class Side { right, left };

inline const char* to_string(Side s) { return s == Side::right ? "right" : "left"; }

// Voxels with x below the midline are on the left; the midline itself
// belongs to the right.
inline Side side_of(double x_mm, double midline_x) {
  return x_mm < midline_x ? Side::left : Side::right;
}

// Maps (side, rib type) to dataset labels. The default puts the right ribs
// on 1..12 and the left ribs on 13..24.
struct LabelConvention {
  bool right_first = true;

  int label(Side side, int type) const {
    const bool low = (side == Side::right) == right_first;
    return low ? type : type + kRibTypes;
  }
  Side side_of_label(int label) const {
    const bool low = label <= kRibTypes;
    return low == right_first ? Side::right : Side::left;
  }
};

}  // namespace ribkit
