#include "privwave/risk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "privwave/quadrature.hpp"
#include "privwave/rng.hpp"

namespace privwave {
namespace {

double mean_of(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double stderr_of(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  const double sd = std::sqrt(acc / static_cast<double>(v.size() - 1));
  return sd / std::sqrt(static_cast<double>(v.size()));
}

void run_partitioned(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  const int n_threads = std::max(1, threads);
  if (n_threads == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t]() {
      for (std::size_t i = static_cast<std::size_t>(t); i < count;
           i += static_cast<std::size_t>(n_threads)) {
        body(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

double lr_risk(const std::function<double(double)>& fhat,
               const std::function<double(double)>& truth, double r, double lo, double hi,
               long cells) {
  if (r < 1.0) throw std::invalid_argument("lr_risk: r must be >= 1");
  if (cells < 2) throw std::invalid_argument("lr_risk: grid too small");
  if (cells & 1) ++cells;
  if (r == 2.0) {
    return quad::simpson(
        [&](double x) {
          const double d = fhat(x) - truth(x);
          return d * d;
        },
        lo, hi, cells);
  }
  return quad::simpson(
      [&](double x) { return std::pow(std::abs(fhat(x) - truth(x)), r); }, lo, hi, cells);
}

double lr_risk(const DensityEstimate& estimate, const Density& truth, double r,
               long cells) {
  // union of supports: the estimate can spill past [-T, T] by a wavelet width
  const auto [a, b] = estimate.basis->support(WaveletBasis::Kind::kFather);
  const double pow2mj0 = std::ldexp(1.0, -estimate.coeffs.j0);
  double lo = -truth.support_T(), hi = truth.support_T();
  if (!estimate.coeffs.alpha_range.empty()) {
    lo = std::min(lo, (a + static_cast<double>(estimate.coeffs.alpha_range.k_min)) * pow2mj0);
    hi = std::max(hi, (b + static_cast<double>(estimate.coeffs.alpha_range.k_max)) * pow2mj0);
  }
  if (cells < 2) {
    cells = std::max(1l << (estimate.coeffs.j1 + 6), 1l << 14);
  }
  return lr_risk([&estimate](double x) { return estimate.eval(x); },
                 [&truth](double x) { return truth(x); }, r, lo, hi, cells);
}

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::kDense: return "dense";
    case Regime::kDenseNonhomogeneous: return "dense_nonhomogeneous";
    default: return "sparse";
  }
}

std::pair<double, Regime> theoretical_exponent(double s, double p, double q, double r,
                                               PrivacyRegime privacy, double zone_eps) {
  if (p < 1.0 || q < 1.0 || r < 1.0) {
    throw std::invalid_argument("theoretical_exponent: p, q, r must be >= 1");
  }
  if (!(s >= 1.0 / p)) {
    throw std::invalid_argument("theoretical_exponent: need s >= 1/p");
  }
  Regime regime;
  if (p > r / (s + 1.0) + zone_eps) {
    regime = Regime::kDense;
  } else if (p > r / (2.0 * s + 1.0) + zone_eps) {
    regime = Regime::kDenseNonhomogeneous;
  } else {
    regime = Regime::kSparse;
  }

  const double sp = s - 1.0 / p;  // s - 1/p, the sparse-branch smoothness
  double exponent;
  if (privacy == PrivacyRegime::kPrivate) {
    exponent = regime == Regime::kDense ? r * s / (2.0 * s + 2.0)
                                        : r * (sp + 1.0 / r) / (2.0 * sp + 2.0);
  } else {
    const bool dense_np = regime != Regime::kSparse;  // nonprivate elbow at r/(2s+1)
    exponent = dense_np ? r * s / (2.0 * s + 1.0) : r * (sp + 1.0 / r) / (2.0 * sp + 1.0);
  }
  return {exponent, regime};
}

MechanismConfig Scenario::mechanism_for(std::size_t n, double support_T) const {
  MechanismConfig config;
  config.variant = variant;
  config.alpha = alpha;
  config.nu = nu;
  config.basis = basis;
  config.support_T = support_T;
  if (auto_levels) {
    if (estimator.mode == EstimatorMode::kLinear) {
      config.j0 = 0;
      config.j1 = choose_linear_level(n, alpha, estimator.s);
    } else {
      const auto [lvl0, lvl1] = choose_adaptive_levels(n, alpha, estimator.regularity_N);
      config.j0 = lvl0;
      config.j1 = lvl1;
    }
  } else {
    config.j0 = j0;
    config.j1 = j1;
  }
  return config;
}

RiskReport monte_carlo_risk(const Density& truth, const Scenario& scenario,
                            std::size_t n, std::size_t reps, std::uint64_t master_seed,
                            int threads) {
  if (reps < 2) throw std::invalid_argument("monte_carlo_risk: reps must be >= 2");
  const MechanismConfig mech = scenario.mechanism_for(n, truth.support_T());
  const SlotLayout layout = SlotLayout::make(mech);

  EstimatorConfig est = scenario.estimator;
  est.n = n;
  est.alpha = scenario.alpha;

  RiskReport report;
  report.scenario_id = scenario.id;
  report.n = n;
  report.alpha = scenario.alpha;
  report.r = est.r;
  report.replications = reps;
  report.per_replication.assign(reps, 0.0);
  if (est.normalize) report.per_replication_normalized.assign(reps, 0.0);

  run_partitioned(reps, threads, [&](std::size_t rep) {
    const std::uint64_t rep_seed =
        rng::derive(rng::derive(master_seed, static_cast<std::uint64_t>(rng::kTagReplication)),
                    static_cast<std::uint64_t>(rep));
    const std::uint64_t sample_root =
        rng::derive(rep_seed, static_cast<std::uint64_t>(rng::kTagSample));
    const std::uint64_t noise_root =
        rng::derive(rep_seed, static_cast<std::uint64_t>(rng::kTagNoise));

    const std::vector<double> xs = truth.sample(n, sample_root);
    CoefficientAccumulator acc(layout);
    std::vector<double> slots(layout.total_slots);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      privatize_into(xs[i], mech, layout, rng::derive(noise_root, static_cast<std::uint64_t>(i)),
                     slots);
      acc.add_record(slots);
    }
    const CoefficientSet coeffs = acc.mean();

    DensityEstimate estimate =
        est.mode == EstimatorMode::kLinear
            ? linear_estimate(coeffs, scenario.basis, mech.j1, mech.variant)
            : adaptive_estimate(coeffs, scenario.basis, est, mech.nu);

    report.per_replication[rep] = lr_risk(estimate, truth, est.r);

    if (est.normalize) {
      const double T = truth.support_T();
      const long cells = std::max(1l << (estimate.coeffs.j1 + 6), 1l << 14);
      const double h = 2.0 * T / static_cast<double>(cells);
      std::vector<double> grid(cells + 1), vals(cells + 1);
      for (long g = 0; g <= cells; ++g) {
        grid[g] = -T + h * static_cast<double>(g);
        vals[g] = estimate.eval(grid[g]);
      }
      const std::vector<double> normed = normalize_on_grid(vals, h);
      double acc_risk = 0.0;
      for (long g = 0; g <= cells; ++g) {
        const double d = normed[g] - truth(grid[g]);
        acc_risk += quad::simpson_weight(g, cells, h) *
                    (est.r == 2.0 ? d * d : std::pow(std::abs(d), est.r));
      }
      report.per_replication_normalized[rep] = acc_risk;
    }
  });

  report.risk_mean = mean_of(report.per_replication);
  report.risk_stderr = stderr_of(report.per_replication, report.risk_mean);
  if (est.normalize) {
    report.normalized_mean = mean_of(report.per_replication_normalized);
    report.normalized_stderr =
        stderr_of(report.per_replication_normalized, *report.normalized_mean);
  }
  return report;
}

FitResult fit_loglog(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw std::invalid_argument("fit_loglog: need matching inputs of length >= 2");
  }
  const auto m = static_cast<double>(xs.size());
  const double xbar = mean_of(xs), ybar = mean_of(ys);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
    sxy += (xs[i] - xbar) * (ys[i] - ybar);
  }
  FitResult fit;
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  if (xs.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double resid = ys[i] - fit.intercept - fit.slope * xs[i];
      rss += resid * resid;
    }
    fit.slope_stderr = std::sqrt(rss / (m - 2.0) / sxx);
  }
  return fit;
}

RateStudy rate_study(const Density& truth, const Scenario& scenario,
                     const RateParams& params, std::span<const std::size_t> n_grid,
                     std::size_t reps, std::uint64_t master_seed, int threads) {
  if (n_grid.size() < 4) throw std::invalid_argument("rate_study: need |n_grid| >= 4");
  for (std::size_t i = 1; i < n_grid.size(); ++i) {
    if (n_grid[i] < 2 * n_grid[i - 1]) {
      throw std::invalid_argument("rate_study: n_grid must be geometric with ratio >= 2");
    }
  }

  RateStudy study;
  study.n_grid.assign(n_grid.begin(), n_grid.end());
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    // each n gets its own seed branch so the grid can be extended without
    // disturbing earlier entries
    study.risks.push_back(monte_carlo_risk(truth, scenario, n_grid[i], reps,
                                           rng::derive(master_seed, static_cast<std::uint64_t>(i)),
                                           threads));
  }

  // pre-asymptotic guard: drop the smallest n when its stderr tops 10% of mean
  std::size_t first = 0;
  if (study.risks.front().risk_stderr > 0.10 * study.risks.front().risk_mean) {
    first = 1;
    study.dropped_smallest_n = true;
  }

  std::vector<double> ln_n, ln_risk, ln_n_adj;
  for (std::size_t i = first; i < study.risks.size(); ++i) {
    const double nd = static_cast<double>(study.risks[i].n);
    ln_n.push_back(std::log(nd));
    ln_n_adj.push_back(std::log(nd / std::log(nd)));
    ln_risk.push_back(std::log(study.risks[i].risk_mean));
  }
  const FitResult fit = fit_loglog(ln_n, ln_risk);
  study.fitted_exponent = fit.slope;
  study.fit_stderr = fit.slope_stderr;
  study.intercept = fit.intercept;

  const auto [expo, regime] =
      theoretical_exponent(params.s, params.p, params.q, params.r, params.privacy);
  study.theoretical_exponent = expo;
  study.regime = regime;
  if (regime != Regime::kDense) {
    study.fitted_exponent_logadj = fit_loglog(ln_n_adj, ln_risk).slope;
  }
  return study;
}

std::pair<double, double> concentration_check(const Density& truth,
                                              const MechanismConfig& config, int j,
                                              long k, std::size_t n, double gamma,
                                              std::size_t reps, std::uint64_t seed,
                                              double c_bar, int threads) {
  config.validate();
  if (config.variant != Mechanism::kTwo) {
    throw std::invalid_argument("concentration_check: mechanism two required");
  }
  if (gamma < 1.0) throw std::invalid_argument("concentration_check: gamma must be >= 1");
  if (static_cast<std::size_t>(j) > n) {
    throw std::invalid_argument("concentration_check: requires j <= n");
  }
  if (j < config.j0 || j > config.j1) {
    throw std::invalid_argument("concentration_check: level outside mechanism range");
  }

  const WaveletBasis& basis = *config.basis;
  const double sigma_j = noise_scales(config)[static_cast<std::size_t>(j - config.j0 + 1)];
  const double sigma_const = 4.0 * basis.overlap_count_cA() * basis.sup_mother() *
                             kSupSafety * (2.0 * config.nu - 1.0) / (config.nu - 1.0);
  if (c_bar <= 0.0) c_bar = truth.max_value();

  // truth coefficient by quadrature
  const CoefficientSet coeffs =
      wavelet_coefficients(truth, basis, j, j);
  const double beta_true = coeffs.beta_at(j, k);

  const double radius = 4.0 * (c_bar + sigma_const) * gamma *
                        std::pow(static_cast<double>(std::max(j, 1)), config.nu + 0.5) /
                        std::sqrt(static_cast<double>(n)) *
                        std::max(1.0, std::exp2(0.5 * j) / config.alpha);

  std::vector<int> exceeded(reps, 0);
  run_partitioned(reps, threads, [&](std::size_t rep) {
    const std::uint64_t rep_seed =
        rng::derive(rng::derive(seed, static_cast<std::uint64_t>(rng::kTagReplication)),
                    static_cast<std::uint64_t>(rep));
    const std::uint64_t sample_root =
        rng::derive(rep_seed, static_cast<std::uint64_t>(rng::kTagSample));
    const std::uint64_t noise_root =
        rng::derive(rep_seed, static_cast<std::uint64_t>(rng::kTagNoise));
    const std::vector<double> xs = truth.sample(n, sample_root);
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const std::uint64_t record_key = rng::derive(noise_root, static_cast<std::uint64_t>(i));
      const std::uint64_t row_key = rng::derive(record_key, static_cast<std::uint64_t>(j + 1));
      const double u = rng::symmetric_uniform(rng::derive_signed(row_key, static_cast<std::int64_t>(k)));
      acc += basis.eval_scaled(WaveletBasis::Kind::kMother, j, k, xs[i]) +
             rng::laplace_from_uniform(u, sigma_j);
    }
    const double beta_hat = acc / static_cast<double>(n);
    exceeded[rep] = std::abs(beta_hat - beta_true) >= radius ? 1 : 0;
  });

  double freq = 0.0;
  for (int e : exceeded) freq += e;
  freq /= static_cast<double>(reps);
  return {freq, std::exp2(-gamma * static_cast<double>(j))};
}

nlohmann::json RiskReport::to_json() const {
  nlohmann::json j;
  j["scenario_id"] = scenario_id;
  j["n"] = n;
  j["alpha"] = alpha;
  j["r"] = r;
  j["replications"] = replications;
  j["risk_mean"] = risk_mean;
  j["risk_stderr"] = risk_stderr;
  j["per_replication"] = per_replication;
  if (normalized_mean) {
    j["normalized_mean"] = *normalized_mean;
    j["normalized_stderr"] = *normalized_stderr;
    j["per_replication_normalized"] = per_replication_normalized;
  }
  return j;
}

nlohmann::json RateStudy::to_json() const {
  nlohmann::json j;
  j["n_grid"] = n_grid;
  j["fitted_exponent"] = fitted_exponent;
  j["fit_stderr"] = fit_stderr;
  j["intercept"] = intercept;
  j["theoretical_exponent"] = theoretical_exponent;
  j["regime"] = to_string(regime);
  j["dropped_smallest_n"] = dropped_smallest_n;
  if (fitted_exponent_logadj) j["fitted_exponent_logadj"] = *fitted_exponent_logadj;
  nlohmann::json arr = nlohmann::json::array();
  for (const RiskReport& rep : risks) arr.push_back(rep.to_json());
  j["risks"] = std::move(arr);
  return j;
}

void RateStudy::write_csv(std::ostream& rows, std::ostream& fit_points) const {
  char buf[64];
  rows << "scenario,n,replication,risk\n";
  for (const RiskReport& rep : risks) {
    for (std::size_t i = 0; i < rep.per_replication.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", rep.per_replication[i]);
      rows << rep.scenario_id << ',' << rep.n << ',' << i << ',' << buf << '\n';
    }
  }
  fit_points << "ln_n,ln_risk,fit_residual\n";
  for (const RiskReport& rep : risks) {
    const double ln_n = std::log(static_cast<double>(rep.n));
    const double ln_risk = std::log(rep.risk_mean);
    const double resid = ln_risk - (intercept + fitted_exponent * ln_n);
    char line[200];
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n", ln_n, ln_risk, resid);
    fit_points << line;
  }
}

}  // namespace privwave
