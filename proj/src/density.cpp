#include "privwave/density.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "privwave/quadrature.hpp"
#include "privwave/rng.hpp"

namespace privwave {
namespace {

double smoothstep5(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return ((6.0 * t - 15.0) * t + 10.0) * t * t * t;
}

// C^2 hump on [0,1], triple zeros at both ends, unit mass.
double hump(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double u = t * (1.0 - t);
  return 140.0 * u * u * u;
}

}  // namespace

Density Density::from_function(std::function<double(double)> f, double support_T,
                               std::string label, double known_max) {
  if (support_T <= 0.0) throw std::invalid_argument("density: support_T must be positive");
  Density d;
  d.support_T_ = support_T;
  d.label_ = std::move(label);
  d.eval_ = [f = std::move(f), support_T](double x) {
    if (x < -support_T || x > support_T) return 0.0;
    return f(x);
  };

  const long n = 1l << kCdfGridLog2;
  const double h = 2.0 * support_T / static_cast<double>(n);
  d.cdf_.assign(n + 1, 0.0);
  double prev = d.eval_(-support_T), scan_max = prev;
  for (long i = 1; i <= n; ++i) {
    const double cur = d.eval_(-support_T + h * static_cast<double>(i));
    d.cdf_[i] = d.cdf_[i - 1] + 0.5 * h * (prev + cur);
    if (cur > scan_max) scan_max = cur;
    if (cur < -1e-12) throw std::invalid_argument("density: negative value on grid");
    prev = cur;
  }
  d.max_value_ = known_max >= 0.0 ? known_max : scan_max;

  const double mass = d.cdf_.back();
  if (std::abs(mass - 1.0) > 1e-6) {
    throw std::invalid_argument("density: mass " + std::to_string(mass) +
                                " is not 1 within 1e-6");
  }
  for (long i = 1; i <= n; ++i) {
    if (d.cdf_[i] < d.cdf_[i - 1]) throw std::invalid_argument("density: CDF not monotone");
  }
  return d;
}

double Density::operator()(double x) const { return eval_(x); }

std::vector<double> Density::sample(std::size_t n, std::uint64_t seed) const {
  std::vector<double> out(n);
  const long cells = static_cast<long>(cdf_.size()) - 1;
  const double h = 2.0 * support_T_ / static_cast<double>(cells);
  const double total = cdf_.back();
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng::unit_uniform(rng::derive(seed, static_cast<std::uint64_t>(i))) * total;
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    long idx = std::max<long>(1, it - cdf_.begin());
    idx = std::min(idx, cells);
    const double lo = cdf_[idx - 1], hi = cdf_[idx];
    const double frac = hi > lo ? (u - lo) / (hi - lo) : 0.0;
    out[i] = -support_T_ + h * (static_cast<double>(idx - 1) + frac);
  }
  return out;
}

nlohmann::json Density::to_json(long grid_points) const {
  nlohmann::json j;
  j["label"] = label_;
  j["support_T"] = support_T_;
  std::vector<double> xs(grid_points), vals(grid_points);
  for (long i = 0; i < grid_points; ++i) {
    xs[i] = -support_T_ + 2.0 * support_T_ * static_cast<double>(i) /
                              static_cast<double>(grid_points - 1);
    vals[i] = eval_(xs[i]);
  }
  j["grid"] = xs;
  j["values"] = vals;
  return j;
}

ReferenceDensity make_reference_density(double support_T, double c0, double flat_lo,
                                        double flat_hi) {
  if (!(flat_lo < flat_hi) || flat_lo <= -support_T || flat_hi >= support_T) {
    throw std::invalid_argument("reference density: flat interval must lie strictly inside (-T, T)");
  }
  if (c0 <= 0.0) throw std::invalid_argument("reference density: c0 must be positive");
  const double flat_mass = c0 * (flat_hi - flat_lo);
  if (flat_mass >= 1.0) {
    throw std::invalid_argument("reference density: infeasible mass, c0*(b-a) >= 1");
  }

  const double wl = flat_lo + support_T;
  const double wr = support_T - flat_hi;
  const double ramp_mass = (1.0 - flat_mass) / 2.0;
  // smoothstep carries c0*w/2; the hump makes up the difference
  const double hl = ramp_mass - c0 * wl / 2.0;
  const double hr = ramp_mass - c0 * wr / 2.0;

  auto f = [=](double x) {
    if (x <= -support_T || x >= support_T) return 0.0;
    if (x >= flat_lo && x <= flat_hi) return c0;
    if (x < flat_lo) {
      const double t = (x + support_T) / wl;
      return c0 * smoothstep5(t) + (hl / wl) * hump(t);
    }
    const double t = (support_T - x) / wr;
    return c0 * smoothstep5(t) + (hr / wr) * hump(t);
  };

  ReferenceDensity ref;
  ref.support_T = support_T;
  ref.c0 = c0;
  ref.flat_lo = flat_lo;
  ref.flat_hi = flat_hi;
  ref.density = Density::from_function(f, support_T, "reference_bump");
  return ref;
}

Density make_uniform01() {
  return Density::from_function([](double x) { return (x >= 0.0 && x < 1.0) ? 1.0 : 0.0; },
                                1.0, "uniform01", 1.0);
}

std::vector<long> disjoint_support_shifts(const WaveletBasis& basis, int j, double lo,
                                          double hi) {
  const auto [a, b] = basis.support(WaveletBasis::Kind::kMother);
  const double pow2j = std::ldexp(1.0, j);
  // supp psi_jk = [(a+k)/2^j, (b+k)/2^j] must fit inside [lo, hi]
  const long k_first = static_cast<long>(std::ceil(lo * pow2j - a));
  const long stride = static_cast<long>(std::ceil(b - a));
  std::vector<long> shifts;
  for (long k = k_first; (b + static_cast<double>(k)) / pow2j <= hi; k += stride) {
    shifts.push_back(k);
  }
  return shifts;
}

Density make_hypothesis_density(const ReferenceDensity& f0,
                                std::shared_ptr<const WaveletBasis> basis, int j,
                                const std::vector<int>& theta, double gamma) {
  const std::vector<long> shifts =
      disjoint_support_shifts(*basis, j, f0.flat_lo, f0.flat_hi);
  if (shifts.empty()) {
    throw std::invalid_argument("hypothesis density: I_j is empty at level " +
                                std::to_string(j));
  }
  if (theta.size() != shifts.size()) {
    throw std::invalid_argument("hypothesis density: |theta| must equal |I_j| = " +
                                std::to_string(shifts.size()));
  }
  const double sup_psi = basis->sup_mother();
  if (gamma * std::exp2(0.5 * j) * sup_psi > f0.c0 * (1.0 + 1e-12)) {
    throw std::invalid_argument(
        "hypothesis density: non-negativity requires gamma*2^{j/2}*sup|psi| <= c0");
  }

  std::vector<long> active;
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    if (theta[i] != 0) active.push_back(shifts[i]);
  }
  Density base = f0.density;
  auto f = [base, basis, j, active, gamma](double x) {
    double v = base(x);
    for (long k : active) {
      v += gamma * basis->eval_scaled(WaveletBasis::Kind::kMother, j, k, x);
    }
    return v;
  };
  return Density::from_function(std::move(f), f0.support_T,
                                "hypothesis_j" + std::to_string(j));
}

double CoefficientSet::alpha_at(long k) const {
  return alpha_range.contains(k) ? alpha[static_cast<std::size_t>(k - alpha_range.k_min)]
                                 : 0.0;
}

double CoefficientSet::beta_at(int j, long k) const {
  if (j < j0 || j > j1) return 0.0;
  const auto row = static_cast<std::size_t>(j - j0);
  return beta_range[row].contains(k)
             ? beta[row][static_cast<std::size_t>(k - beta_range[row].k_min)]
             : 0.0;
}

std::size_t CoefficientSet::total_coefficients() const {
  std::size_t n = alpha.size();
  for (const auto& row : beta) n += row.size();
  return n;
}

CoefficientSet wavelet_coefficients(const std::function<double(double)>& f,
                                    double support_T, const WaveletBasis& basis, int j0,
                                    int j1, long min_cells) {
  if (j1 < j0) throw std::invalid_argument("wavelet_coefficients: j1 < j0");
  long cells = std::max(1l << std::min(j1 + 8, 22), 1l << 15);
  cells = std::max(cells, min_cells);
  if (cells & 1) ++cells;
  const double lo = -support_T, hi = support_T;
  const double h = (hi - lo) / static_cast<double>(cells);

  // density values premultiplied by the Simpson weights
  std::vector<double> fw(cells + 1);
  for (long i = 0; i <= cells; ++i) {
    fw[i] = f(lo + h * static_cast<double>(i)) * quad::simpson_weight(i, cells, h);
  }

  CoefficientSet out;
  out.j0 = j0;
  out.j1 = j1;

  auto integrate = [&](WaveletBasis::Kind kind, int j, long k) {
    // restrict to the wavelet's support window on the grid
    const auto [a, b] = basis.support(kind);
    const double pow2mj = std::ldexp(1.0, -j);
    const double wlo = std::max(lo, (a + static_cast<double>(k)) * pow2mj);
    const double whi = std::min(hi, (b + static_cast<double>(k)) * pow2mj);
    const long i_lo = std::max(0l, static_cast<long>(std::floor((wlo - lo) / h)));
    const long i_hi = std::min(cells, static_cast<long>(std::ceil((whi - lo) / h)));
    double acc = 0.0;
    for (long i = i_lo; i <= i_hi; ++i) {
      acc += fw[i] * basis.eval_scaled(kind, j, k, lo + h * static_cast<double>(i));
    }
    return acc;
  };

  out.alpha_range = basis.active_shifts(WaveletBasis::Kind::kFather, j0, lo, hi);
  out.alpha.resize(out.alpha_range.count());
  for (long k = out.alpha_range.k_min; k <= out.alpha_range.k_max; ++k) {
    out.alpha[static_cast<std::size_t>(k - out.alpha_range.k_min)] =
        integrate(WaveletBasis::Kind::kFather, j0, k);
  }
  for (int j = j0; j <= j1; ++j) {
    const ShiftRange range = basis.active_shifts(WaveletBasis::Kind::kMother, j, lo, hi);
    std::vector<double> row(range.count());
    for (long k = range.k_min; k <= range.k_max; ++k) {
      row[static_cast<std::size_t>(k - range.k_min)] =
          integrate(WaveletBasis::Kind::kMother, j, k);
    }
    out.beta_range.push_back(range);
    out.beta.push_back(std::move(row));
  }
  return out;
}

CoefficientSet wavelet_coefficients(const Density& density, const WaveletBasis& basis,
                                    int j0, int j1, long min_cells) {
  return wavelet_coefficients([&density](double x) { return density(x); },
                              density.support_T(), basis, j0, j1, min_cells);
}

double eval_expansion(const CoefficientSet& coeffs, const WaveletBasis& basis, double x) {
  double v = 0.0;
  {
    const ShiftRange win = basis.nonzero_window(coeffs.j0, x);
    const long k_lo = std::max(win.k_min, coeffs.alpha_range.k_min);
    const long k_hi = std::min(win.k_max, coeffs.alpha_range.k_max);
    for (long k = k_lo; k <= k_hi; ++k) {
      v += coeffs.alpha[static_cast<std::size_t>(k - coeffs.alpha_range.k_min)] *
           basis.eval_scaled(WaveletBasis::Kind::kFather, coeffs.j0, k, x);
    }
  }
  for (int j = coeffs.j0; j <= coeffs.j1; ++j) {
    const auto row = static_cast<std::size_t>(j - coeffs.j0);
    const ShiftRange win = basis.nonzero_window(j, x);
    const long k_lo = std::max(win.k_min, coeffs.beta_range[row].k_min);
    const long k_hi = std::min(win.k_max, coeffs.beta_range[row].k_max);
    for (long k = k_lo; k <= k_hi; ++k) {
      v += coeffs.beta[row][static_cast<std::size_t>(k - coeffs.beta_range[row].k_min)] *
           basis.eval_scaled(WaveletBasis::Kind::kMother, j, k, x);
    }
  }
  return v;
}

double besov_norm(const CoefficientSet& coeffs, double s, double p, double q) {
  if (s <= 0.0) throw std::invalid_argument("besov_norm: s must be positive");
  if (p < 1.0 || q < 1.0) throw std::invalid_argument("besov_norm: p, q must be >= 1");

  auto lp = [p](const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += std::pow(std::abs(x), p);
    return std::pow(acc, 1.0 / p);
  };

  double norm = lp(coeffs.alpha);
  const double expo = s + 0.5 - 1.0 / p;
  if (std::isinf(q)) {
    double m = 0.0;
    for (int j = coeffs.j0; j <= coeffs.j1; ++j) {
      m = std::max(m, std::exp2(static_cast<double>(j) * expo) *
                          lp(coeffs.beta[static_cast<std::size_t>(j - coeffs.j0)]));
    }
    return norm + m;
  }
  double acc = 0.0;
  for (int j = coeffs.j0; j <= coeffs.j1; ++j) {
    acc += std::pow(std::exp2(static_cast<double>(j) * expo) *
                        lp(coeffs.beta[static_cast<std::size_t>(j - coeffs.j0)]),
                    q);
  }
  return norm + std::pow(acc, 1.0 / q);
}

nlohmann::json coefficients_to_json(const CoefficientSet& coeffs) {
  nlohmann::json j;
  j["j0"] = coeffs.j0;
  j["j1"] = coeffs.j1;
  nlohmann::json triples = nlohmann::json::array();
  for (long k = coeffs.alpha_range.k_min; k <= coeffs.alpha_range.k_max; ++k) {
    triples.push_back({coeffs.j0 - 1, k, coeffs.alpha_at(k)});
  }
  for (int lv = coeffs.j0; lv <= coeffs.j1; ++lv) {
    const auto& range = coeffs.beta_range[static_cast<std::size_t>(lv - coeffs.j0)];
    for (long k = range.k_min; k <= range.k_max; ++k) {
      triples.push_back({lv, k, coeffs.beta_at(lv, k)});
    }
  }
  j["coefficients"] = std::move(triples);
  return j;
}

CoefficientSet coefficients_from_json(const nlohmann::json& j) {
  CoefficientSet out;
  out.j0 = j.at("j0").get<int>();
  out.j1 = j.at("j1").get<int>();
  out.beta_range.resize(out.j1 - out.j0 + 1);
  out.beta.resize(out.j1 - out.j0 + 1);

  // two passes: ranges, then values
  for (const auto& t : j.at("coefficients")) {
    const int lv = t.at(0).get<int>();
    const long k = t.at(1).get<long>();
    ShiftRange& range = lv == out.j0 - 1
                            ? out.alpha_range
                            : out.beta_range[static_cast<std::size_t>(lv - out.j0)];
    if (range.empty()) {
      range.k_min = range.k_max = k;
    } else {
      range.k_min = std::min(range.k_min, k);
      range.k_max = std::max(range.k_max, k);
    }
  }
  out.alpha.assign(out.alpha_range.count(), 0.0);
  for (int lv = out.j0; lv <= out.j1; ++lv) {
    out.beta[static_cast<std::size_t>(lv - out.j0)].assign(
        out.beta_range[static_cast<std::size_t>(lv - out.j0)].count(), 0.0);
  }
  for (const auto& t : j.at("coefficients")) {
    const int lv = t.at(0).get<int>();
    const long k = t.at(1).get<long>();
    const double v = t.at(2).get<double>();
    if (lv == out.j0 - 1) {
      out.alpha[static_cast<std::size_t>(k - out.alpha_range.k_min)] = v;
    } else {
      const auto row = static_cast<std::size_t>(lv - out.j0);
      out.beta[row][static_cast<std::size_t>(k - out.beta_range[row].k_min)] = v;
    }
  }
  return out;
}

}  // namespace privwave
