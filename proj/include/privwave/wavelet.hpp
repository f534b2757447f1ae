#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace privwave {

// Haar plus the extremal-phase Daubechies family dbN (N vanishing moments,
// filter length 2N, support [0, 2N-1]). Haar fails the smoothness assumption
// needed by the rate theory and is intended for mechanics testing only; rate
// studies default to Daubechies bases.
enum class WaveletFamily : int {
  kHaar = 1,
  kDb2 = 2,
  kDb3 = 3,
  kDb4 = 4,
  kDb5 = 5,
  kDb6 = 6,
  kDb7 = 7,
  kDb8 = 8,
  kDb9 = 9,
  kDb10 = 10,
};

WaveletFamily wavelet_family_from_string(std::string_view name);
std::string to_string(WaveletFamily family);

// Inclusive integer interval of shifts; empty when k_min > k_max.
struct ShiftRange {
  long k_min = 0;
  long k_max = -1;
  bool empty() const { return k_min > k_max; }
  long count() const { return empty() ? 0 : k_max - k_min + 1; }
  bool contains(long k) const { return k >= k_min && k <= k_max; }
};

// Compactly supported orthonormal wavelet basis, tabulated on the dyadic grid
// of spacing 2^-depth over the common support [a, b] of father and mother.
// Values at dyadic rationals are exact (integer-point eigenvector refined by
// the cascade recursion); evaluation between grid points interpolates
// linearly. Immutable after construction; safe to share across threads.
class WaveletBasis {
 public:
  enum class Kind { kFather, kMother };

  static WaveletBasis build(WaveletFamily family, int depth);

  WaveletFamily family() const { return family_; }
  int depth() const { return depth_; }
  const std::vector<double>& filter() const { return filter_; }
  const std::vector<double>& table(Kind kind) const {
    return kind == Kind::kFather ? father_ : mother_;
  }
  // Support endpoints [a, b]; identical for father and mother in this family.
  std::pair<double, double> support(Kind kind) const;
  double sup_father() const { return sup_father_; }
  double sup_mother() const { return sup_mother_; }
  std::pair<double, double> sup_norms() const { return {sup_father_, sup_mother_}; }
  // A = max(|a|, |b|) and the per-point overlap bound c_A = 2*ceil(A) + 1.
  double half_width_A() const { return half_width_; }
  int overlap_count_cA() const { return overlap_cA_; }

  // Raw table lookup with linear interpolation; exactly 0 outside (a, b).
  double eval(Kind kind, double y) const;

  // 2^{j/2} * w(2^j x - k) for w = father or mother table.
  double eval_scaled(Kind kind, int j, long k, double x) const;

  // All shifts k whose support intersects [lo, hi] in a set of positive
  // length (touching endpoints do not count). Contiguous by monotonicity.
  ShiftRange active_shifts(Kind kind, int j, double lo, double hi) const;

  // Shifts that can be nonzero at the single point x (window of width < c_A).
  ShiftRange nonzero_window(int j, double x) const;

  // Left-point Riemann sum of a product of (shifted) table entries; exact for
  // Haar and equal to the trapezoid rule for Daubechies tables since their
  // boundary values vanish. lag is in table coordinates (units of 1).
  double table_inner(Kind first, Kind second, double lag = 0.0) const;
  // Plain table integral (lag-free, single factor).
  double table_integral(Kind kind) const;

  // CSV dump with columns x,phi,psi for external plotting.
  void dump_csv(std::ostream& out) const;

 private:
  WaveletBasis() = default;

  WaveletFamily family_ = WaveletFamily::kHaar;
  int depth_ = 0;
  std::vector<double> filter_;
  std::vector<double> father_;
  std::vector<double> mother_;
  double support_lo_ = 0.0;
  double support_hi_ = 1.0;
  double sup_father_ = 0.0;
  double sup_mother_ = 0.0;
  double half_width_ = 0.0;
  int overlap_cA_ = 0;
};

}  // namespace privwave
