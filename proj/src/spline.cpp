#include "limbdyn/spline.hpp"

#include <algorithm>
#include <cmath>

namespace limbdyn {

CubicSpline::CubicSpline(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw InputError("spline needs at least 2 matching samples");
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1])) throw InputError("spline abscissae must be strictly increasing");
  x_.assign(x.begin(), x.end());
  y_.assign(y.begin(), y.end());
  const std::size_t n = x_.size();
  m_.assign(n, 0.0);
  if (n < 3) return;  // natural spline of 2 points is the chord

  // Thomas algorithm on the natural-spline tridiagonal system.
  std::vector<double> diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double hl = x_[i] - x_[i - 1];
    const double hr = x_[i + 1] - x_[i];
    diag[i] = (hl + hr) / 3.0;
    upper[i] = hr / 6.0;
    rhs[i] = (y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl;
  }
  for (std::size_t i = 2; i + 1 < n; ++i) {
    const double lower = (x_[i] - x_[i - 1]) / 6.0;
    const double w = lower / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
    if (i == 1) break;
  }
}

double CubicSpline::operator()(double x) const {
  const std::size_t n = x_.size();
  std::size_t i = 0;
  if (x >= x_[n - 2]) {
    i = n - 2;
  } else if (x > x_[0]) {
    i = std::size_t(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
  }
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - x) / h;
  const double b = (x - x_[i]) / h;
  return a * y_[i] + b * y_[i + 1] +
         ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

}  // namespace limbdyn
