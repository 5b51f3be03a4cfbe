#pragma once

#include <span>
#include <vector>

#include "limbdyn/types.hpp"

namespace limbdyn {

/// Natural cubic spline through (x_i, y_i); x strictly increasing, n >= 2
/// (linear for n in {2,3}... n=2 degenerates to a line, n=3 solves the one
/// interior condition). Evaluation at a knot returns the sample bit-exactly.
class CubicSpline {
 public:
  CubicSpline(std::span<const double> x, std::span<const double> y);
  double operator()(double x) const;

 private:
  std::vector<double> x_, y_, m_;  // m_: second derivatives at knots
};

}  // namespace limbdyn
