#pragma once

#include <vector>

namespace rmarkov {

/// One sample of a CMI-vs-r curve.
struct CurvePoint {
  double r = 0.0;
  double value = 0.0;
};

using Curve = std::vector<CurvePoint>;

}  // namespace rmarkov
