#pragma once

#include <cstddef>
#include <stdexcept>

namespace privwave::quad {

// Composite Simpson over [lo, hi] with n uniform cells (n even, >= 2).
// f is any callable double -> double.
template <typename F>
double simpson(F&& f, double lo, double hi, long n) {
  if (n < 2 || (n & 1)) throw std::invalid_argument("simpson: cell count must be even and >= 2");
  const double h = (hi - lo) / static_cast<double>(n);
  double odd = 0.0, even = 0.0;
  for (long i = 1; i < n; i += 2) odd += f(lo + h * static_cast<double>(i));
  for (long i = 2; i < n; i += 2) even += f(lo + h * static_cast<double>(i));
  return (f(lo) + f(hi) + 4.0 * odd + 2.0 * even) * h / 3.0;
}

// Simpson weight for grid index i of n+1 points (n even), premultiplied by h/3.
inline double simpson_weight(long i, long n, double h) {
  if (i == 0 || i == n) return h / 3.0;
  return (i & 1) ? 4.0 * h / 3.0 : 2.0 * h / 3.0;
}

}  // namespace privwave::quad
