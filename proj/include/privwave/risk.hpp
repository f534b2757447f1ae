#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "privwave/density.hpp"
#include "privwave/estimator.hpp"
#include "privwave/privacy.hpp"

namespace privwave {

struct RiskReport {
  std::string scenario_id;
  std::size_t n = 0;
  double alpha = 1.0;
  double r = 2.0;
  std::size_t replications = 0;
  double risk_mean = 0.0;
  double risk_stderr = 0.0;
  std::vector<double> per_replication;
  // raw risk is the primary number; the normalized series is display-only
  std::optional<double> normalized_mean;
  std::optional<double> normalized_stderr;
  std::vector<double> per_replication_normalized;

  nlohmann::json to_json() const;
};

// Composite-Simpson integral of |fhat - truth|^r over [lo, hi], cells cells.
double lr_risk(const std::function<double(double)>& fhat,
               const std::function<double(double)>& truth, double r, double lo, double hi,
               long cells);

// Over the union of supports, grid max(2^{j1+6}, 2^14) cells unless overridden.
double lr_risk(const DensityEstimate& estimate, const Density& truth, double r,
               long cells = 0);

enum class Regime : int { kDense = 0, kDenseNonhomogeneous = 1, kSparse = 2 };
enum class PrivacyRegime : int { kPrivate = 0, kNonprivate = 1 };

std::string to_string(Regime regime);

// Exponent of n in the minimax rate (log factors ignored) plus the zone label
// from the three-regime table; zone_eps pads the boundary comparisons, ties
// going to the sparser branch.
std::pair<double, Regime> theoretical_exponent(double s, double p, double q, double r,
                                               PrivacyRegime privacy,
                                               double zone_eps = 0.0);

// Everything monte_carlo_risk needs to run one scenario at a fixed n: the
// mechanism template (levels filled in per n by the level rules when
// auto_levels is set) and the estimator settings.
struct Scenario {
  std::string id;
  Mechanism variant = Mechanism::kOne;
  double alpha = 1.0;
  double nu = 2.0;
  std::shared_ptr<const WaveletBasis> basis;
  EstimatorConfig estimator;
  bool auto_levels = true;  // derive (j0, j1) from the estimator rule per n
  int j0 = 0, j1 = 0;       // used when auto_levels is false

  MechanismConfig mechanism_for(std::size_t n, double support_T) const;
};

// reps independent sample -> privatize -> estimate -> lr_risk pipelines with
// seeds derived per replication; deterministic given master_seed and
// independent of the thread count.
RiskReport monte_carlo_risk(const Density& truth, const Scenario& scenario,
                            std::size_t n, std::size_t reps, std::uint64_t master_seed,
                            int threads = 2);

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

// OLS of ys on xs (both already in log scale).
FitResult fit_loglog(std::span<const double> xs, std::span<const double> ys);

struct RateStudy {
  std::vector<std::size_t> n_grid;
  std::vector<RiskReport> risks;
  double fitted_exponent = 0.0;      // OLS slope of ln risk vs ln n
  double fit_stderr = 0.0;
  double intercept = 0.0;
  double theoretical_exponent = 0.0;  // positive; compare slope against -this
  Regime regime = Regime::kDense;
  bool dropped_smallest_n = false;    // smallest n removed from the fit
  // complementary fit of ln risk vs ln(n/ln n) for regimes whose rate carries logs
  std::optional<double> fitted_exponent_logadj;

  nlohmann::json to_json() const;
  void write_csv(std::ostream& rows, std::ostream& fit_points) const;
};

struct RateParams {
  double s = 1.0, p = 2.0, q = 2.0, r = 2.0;
  PrivacyRegime privacy = PrivacyRegime::kPrivate;
};

RateStudy rate_study(const Density& truth, const Scenario& scenario,
                     const RateParams& params, std::span<const std::size_t> n_grid,
                     std::size_t reps, std::uint64_t master_seed, int threads = 2);

// Empirical exceedance frequency of the concentration event
//   |beta_hat_jk - beta_jk| >= 4(c_bar + sigma) gamma j^{nu+1/2}/sqrt(n) (1 v 2^{j/2}/alpha)
// over reps replications, paired with the bound 2^{-gamma j}. c_bar <= 0 uses
// the analytic max of the truth density.
std::pair<double, double> concentration_check(const Density& truth,
                                              const MechanismConfig& config, int j,
                                              long k, std::size_t n, double gamma,
                                              std::size_t reps, std::uint64_t seed,
                                              double c_bar = -1.0, int threads = 2);

}  // namespace privwave
