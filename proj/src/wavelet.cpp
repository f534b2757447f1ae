#include "privwave/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace privwave {
namespace {

// Extremal-phase Daubechies scaling filters, normalized to sum sqrt(2).
// Index 0 holds db2; Haar is handled directly.
const std::vector<std::vector<double>> kDbFilters = {
    {0.48296291314453421, 0.83651630373780805, 0.22414386804201333,
     -0.12940952255126045},
    {0.33267055295008269, 0.80689150931109266, 0.45987750211849154,
     -0.13501102001025464, -0.085441273882026644, 0.035226291885709561},
    {0.2303778133088964, 0.71484657055291567, 0.63088076792985881,
     -0.027983769416859487, -0.18703481171909309, 0.030841381835560636,
     0.032883011666885162, -0.010597401785069018},
    {0.16010239797419293, 0.60382926979718954, 0.72430852843777338,
     0.13842814590132049, -0.24229488706638186, -0.032244869584638465,
     0.077571493840045663, -0.0062414902127982527, -0.012580751999081992,
     0.0033357252854737699},
    {0.11154074335010937, 0.49462389039845289, 0.7511339080210947,
     0.31525035170919852, -0.22626469396543963, -0.12976686756726183,
     0.097501605587322987, 0.027522865530305664, -0.031582039317486002,
     0.00055384220116150718, 0.0047772575109455038, -0.0010773010853084789},
    {0.077852054085009198, 0.39653931948191762, 0.7291320908462352,
     0.46978228740519262, -0.14390600392856479, -0.22403618499387526,
     0.071309219266830468, 0.080612609151083078, -0.038029936935014462,
     -0.016574541630666868, 0.012550998556099844, 0.00042957797292136803,
     -0.0018016407040474928, 0.00035371379997452046},
    {0.054415842243103953, 0.31287159091429967, 0.67563073629728954,
     0.58535468365420551, -0.015829105256347339, -0.28401554296154757,
     0.00047248457391444435, 0.1287474266204777, -0.017369301001807367,
     -0.044088253930794692, 0.013981027917398262, 0.0087460940474057541,
     -0.0048703529934515629, -0.00039174037337694743, 0.00067544940645056846,
     -0.00011747678412476936},
    {0.038077947363878345, 0.24383467461259029, 0.60482312369011115,
     0.65728807805129996, 0.13319738582500698, -0.29327378327917264,
     -0.096840783222977442, 0.14854074933810596, 0.030725681479334483,
     -0.067632829061331209, 0.000250947114832136, 0.02236166212367886,
     -0.0047232047577513269, -0.004281503682463458, 0.0018476468830562346,
     0.00023038576352319567, -0.0002519631889427105, 3.9347320316271657e-05},
    {0.026670057900555547, 0.18817680007769139, 0.52720118893172585,
     0.68845903945360287, 0.28117234366057819, -0.24984642432731372,
     -0.19594627437737874, 0.12736934033579408, 0.093057364603570614,
     -0.071394147166395264, -0.02945753682187718, 0.033212674059341828,
     0.0036065535669557473, -0.010733175483330434, 0.0013953517470528679,
     0.0019924052951850639, -0.00068585669495971303, -0.00011646685512928538,
     9.3588670320069592e-05, -1.3264202894521243e-05},
};

// phi at the interior integers of [0, L]: the eigenvector with eigenvalue 1
// of T[m][l] = sqrt(2) h_{2m-l}, normalized so the values sum to 1. Power
// iteration with sum-1 renormalization converges geometrically; the residual
// check catches a defective filter.
std::vector<double> values_at_integers(const std::vector<double>& h) {
  const int filter_len = static_cast<int>(h.size());
  const int support = filter_len - 1;
  const int dim = support - 1;
  const double root2 = std::sqrt(2.0);

  std::vector<double> matrix(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int m = 1; m < support; ++m) {
    for (int l = 1; l < support; ++l) {
      const int idx = 2 * m - l;
      if (idx >= 0 && idx < filter_len) {
        matrix[static_cast<std::size_t>(m - 1) * dim + (l - 1)] = root2 * h[idx];
      }
    }
  }

  std::vector<double> v(dim, 1.0 / dim), next(dim);
  double diff = 1.0;
  for (int iter = 0; iter < 500 && diff > 1e-16; ++iter) {
    for (int m = 0; m < dim; ++m) {
      double s = 0.0;
      for (int l = 0; l < dim; ++l) s += matrix[static_cast<std::size_t>(m) * dim + l] * v[l];
      next[m] = s;
    }
    double total = 0.0;
    for (double x : next) total += x;
    if (std::abs(total) < 1e-12) {
      throw std::runtime_error("wavelet: refinement eigenproblem is singular");
    }
    diff = 0.0;
    for (int m = 0; m < dim; ++m) {
      next[m] /= total;
      diff = std::max(diff, std::abs(next[m] - v[m]));
    }
    v.swap(next);
  }

  double residual = 0.0;
  for (int m = 0; m < dim; ++m) {
    double s = 0.0;
    for (int l = 0; l < dim; ++l) s += matrix[static_cast<std::size_t>(m) * dim + l] * v[l];
    residual = std::max(residual, std::abs(s - v[m]));
  }
  if (residual > 1e-10) {
    throw std::runtime_error("wavelet: refinement eigenproblem is singular");
  }
  return v;
}

// Dyadic cascade: exact phi values at odd multiples of 2^-d from the values
// at depth d-1 via phi(x) = sqrt(2) sum_k h_k phi(2x - k).
std::vector<double> cascade(const std::vector<double>& h, int depth) {
  const int support = static_cast<int>(h.size()) - 1;
  const double root2 = std::sqrt(2.0);

  std::vector<double> cur(support + 1, 0.0);
  const std::vector<double> at_ints = values_at_integers(h);
  std::copy(at_ints.begin(), at_ints.end(), cur.begin() + 1);

  for (int d = 1; d <= depth; ++d) {
    const std::size_t n_new = static_cast<std::size_t>(support) * (1ull << d) + 1;
    std::vector<double> next(n_new, 0.0);
    for (std::size_t i = 0; i < cur.size(); ++i) next[2 * i] = cur[i];
    const long step = 1l << (d - 1);
    for (std::size_t i = 1; i < n_new; i += 2) {
      double s = 0.0;
      for (int k = 0; k <= support; ++k) {
        const long idx = static_cast<long>(i) - k * step;
        if (idx >= 0 && idx < static_cast<long>(cur.size())) s += h[k] * cur[idx];
      }
      next[i] = root2 * s;
    }
    cur.swap(next);
  }
  return cur;
}

// psi(x) = sqrt(2) sum_k g_k phi(2x - k) with g_k = (-1)^k h_{len-1-k};
// support matches phi's [0, 2N-1].
std::vector<double> mother_from_father(const std::vector<double>& h,
                                       const std::vector<double>& phi, int depth) {
  const int filter_len = static_cast<int>(h.size());
  const double root2 = std::sqrt(2.0);
  std::vector<double> g(filter_len);
  for (int k = 0; k < filter_len; ++k) {
    g[k] = ((k & 1) ? -1.0 : 1.0) * h[filter_len - 1 - k];
  }
  std::vector<double> psi(phi.size(), 0.0);
  const long unit = 1l << depth;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < filter_len; ++k) {
      const long idx = 2 * static_cast<long>(i) - k * unit;
      if (idx >= 0 && idx < static_cast<long>(phi.size())) s += g[k] * phi[idx];
    }
    psi[i] = root2 * s;
  }
  return psi;
}

double table_max_abs(const std::vector<double>& tab) {
  double m = 0.0;
  for (double v : tab) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

WaveletFamily wavelet_family_from_string(std::string_view name) {
  if (name == "haar" || name == "db1") return WaveletFamily::kHaar;
  for (int n = 2; n <= 10; ++n) {
    if (name == "db" + std::to_string(n)) return static_cast<WaveletFamily>(n);
  }
  throw std::invalid_argument("wavelet: unsupported family '" + std::string(name) + "'");
}

std::string to_string(WaveletFamily family) {
  return family == WaveletFamily::kHaar ? "haar"
                                        : "db" + std::to_string(static_cast<int>(family));
}

WaveletBasis WaveletBasis::build(WaveletFamily family, int depth) {
  if (depth < 4 || depth > 24) {
    throw std::invalid_argument("wavelet: depth must lie in [4, 24]");
  }
  const int n = static_cast<int>(family);
  if (n < 1 || n > 10) {
    throw std::invalid_argument("wavelet: unsupported family id");
  }

  WaveletBasis basis;
  basis.family_ = family;
  basis.depth_ = depth;

  if (family == WaveletFamily::kHaar) {
    // Piecewise constant; tables store the right-continuous values so the
    // cells [i, i+1) carry the exact function. eval() zeroes the endpoints.
    const std::size_t m = 1ull << depth;
    basis.filter_ = {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
    basis.father_.assign(m + 1, 1.0);
    basis.mother_.assign(m + 1, 1.0);
    for (std::size_t i = m / 2; i <= m; ++i) basis.mother_[i] = -1.0;
    basis.support_lo_ = 0.0;
    basis.support_hi_ = 1.0;
  } else {
    basis.filter_ = kDbFilters[static_cast<std::size_t>(n - 2)];
    basis.father_ = cascade(basis.filter_, depth);
    basis.mother_ = mother_from_father(basis.filter_, basis.father_, depth);
    basis.support_lo_ = 0.0;
    basis.support_hi_ = static_cast<double>(2 * n - 1);
  }

  basis.sup_father_ = table_max_abs(basis.father_);
  basis.sup_mother_ = table_max_abs(basis.mother_);
  basis.half_width_ = std::max(std::abs(basis.support_lo_), std::abs(basis.support_hi_));
  basis.overlap_cA_ = 2 * static_cast<int>(std::ceil(basis.half_width_)) + 1;
  return basis;
}

std::pair<double, double> WaveletBasis::support(Kind) const {
  return {support_lo_, support_hi_};
}

double WaveletBasis::eval(Kind kind, double y) const {
  // half-open [a, b): tables are right-continuous so Haar's jump points carry
  // their exact values; Daubechies endpoints vanish either way
  if (y < support_lo_ || y >= support_hi_) return 0.0;
  const std::vector<double>& tab = kind == Kind::kFather ? father_ : mother_;
  const double t = std::ldexp(y - support_lo_, depth_);
  const auto i = static_cast<std::size_t>(t);
  const double frac = t - static_cast<double>(i);
  if (i + 1 >= tab.size()) return tab[i] * (1.0 - frac);
  return tab[i] * (1.0 - frac) + tab[i + 1] * frac;
}

double WaveletBasis::eval_scaled(Kind kind, int j, long k, double x) const {
  const double y = std::ldexp(x, j) - static_cast<double>(k);
  const double v = eval(kind, y);
  return v == 0.0 ? 0.0 : std::exp2(0.5 * j) * v;
}

ShiftRange WaveletBasis::active_shifts(Kind, int j, double lo, double hi) const {
  if (hi <= lo) return {};
  // positive-length overlap: lo*2^j - b < k < hi*2^j - a, both strict
  const double plo = std::ldexp(lo, j) - support_hi_;
  const double phi_ = std::ldexp(hi, j) - support_lo_;
  ShiftRange range;
  range.k_min = static_cast<long>(std::floor(plo)) + 1;
  range.k_max = static_cast<long>(std::ceil(phi_)) - 1;
  return range;
}

ShiftRange WaveletBasis::nonzero_window(int j, double x) const {
  // nonzero iff a <= 2^j x - k < b
  const double p = std::ldexp(x, j);
  ShiftRange range;
  range.k_min = static_cast<long>(std::floor(p - support_hi_)) + 1;
  range.k_max = static_cast<long>(std::floor(p - support_lo_));
  return range;
}

double WaveletBasis::table_inner(Kind first, Kind second, double lag) const {
  const std::vector<double>& ta = table(first);
  const std::vector<double>& tb = table(second);
  const long shift = std::lround(std::ldexp(lag, depth_));
  const double h = std::ldexp(1.0, -depth_);
  double acc = 0.0;
  const long n = static_cast<long>(ta.size()) - 1;
  for (long i = 0; i < n; ++i) {
    const long jdx = i + shift;
    if (jdx >= 0 && jdx < n) acc += ta[i] * tb[jdx];
  }
  return acc * h;
}

double WaveletBasis::table_integral(Kind kind) const {
  const std::vector<double>& tab = table(kind);
  const double h = std::ldexp(1.0, -depth_);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < tab.size(); ++i) acc += tab[i];
  return acc * h;
}

void WaveletBasis::dump_csv(std::ostream& out) const {
  out << "x,phi,psi\n";
  const double h = std::ldexp(1.0, -depth_);
  char line[96];
  for (std::size_t i = 0; i < father_.size(); ++i) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n",
                  support_lo_ + static_cast<double>(i) * h, father_[i], mother_[i]);
    out << line;
  }
}

}  // namespace privwave
