#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "privwave/density.hpp"
#include "privwave/privacy.hpp"
#include "privwave/wavelet.hpp"

namespace privwave {

enum class EstimatorMode : int { kLinear = 1, kAdaptive = 2 };

std::string to_string(EstimatorMode mode);
EstimatorMode estimator_mode_from_string(std::string_view name);

struct EstimatorConfig {
  EstimatorMode mode = EstimatorMode::kAdaptive;
  std::size_t n = 0;
  double alpha = 1.0;
  double s = 1.0;                      // linear rule input
  int regularity_N = 1;                // adaptive rule input
  double r = 2.0;                      // target loss index
  double nu = 2.0;                     // must match the mechanism's nu
  std::optional<double> gamma_t;       // threshold constant, default r*(N+1)
  double L_bar = 1.0;                  // sup-norm bound entering K
  bool normalize = false;              // display-only positive-part renormalization
  std::optional<double> threshold_override;  // force K*t (0 = keep everything)

  double gamma_threshold() const {
    return gamma_t.value_or(r * static_cast<double>(regularity_N + 1));
  }
};

struct DensityEstimate {
  CoefficientSet coeffs;
  std::shared_ptr<const WaveletBasis> basis;
  EstimatorMode mode = EstimatorMode::kLinear;
  bool off_theorem = false;             // linear estimator fed mechanism-two records
  std::vector<double> thresholds;       // K*t per mother level (empty for linear)
  std::vector<long> kept_per_level;     // surviving beta count per mother level
  std::vector<long> slots_per_level;

  double eval(double x) const { return eval_expansion(coeffs, *basis, x); }
};

// Slot-wise running mean with exact (sum, count) merging, so record batches
// can be averaged in parallel partial sums.
class CoefficientAccumulator {
 public:
  explicit CoefficientAccumulator(const SlotLayout& layout);
  void add_record(std::span<const double> slots);
  void merge(const CoefficientAccumulator& other);
  std::size_t count() const { return count_; }
  CoefficientSet mean() const;

 private:
  const SlotLayout* layout_;
  std::vector<double> sums_;
  std::size_t count_ = 0;
};

// beta_hat_jk = (1/n) sum_i Z_ijk (alpha_hat from the father row).
CoefficientSet empirical_coefficients(const std::vector<std::vector<double>>& records,
                                      const SlotLayout& layout);
CoefficientSet empirical_coefficients(const RecordBatch& batch);

// j1 = max(0, floor(log2(min((n a^2)^{1/(2s+2)}, n^{1/(2s+1)})))).
int choose_linear_level(std::size_t n, double alpha, double s);

// Adaptive rule: j0 from the regularity bound, j1 = max(j0, min(j1', j1''))
// with 2^{j1'} ~ n/ln n and 2^{2 j1''} ~ n a^2 / ln(n a^2). Throws when
// n a^2 <= e (privacy budget too small for the adaptive rule at this n).
std::pair<int, int> choose_adaptive_levels(std::size_t n, double alpha, int N);

// t_{j,n,alpha} = gamma_t * (j v 1)^{nu+1/2} / sqrt(n) * (1 v 2^{j/2}/alpha).
double threshold(int j, std::size_t n, double alpha, double gamma_t, double nu);

// K = 4(L_bar + sigma), sigma = 4 c_A sup|psi| (2nu-1)/(nu-1); uses the same
// padded sup-norm as the mechanism's noise scales.
double threshold_constant_K(const WaveletBasis& basis, double nu, double L_bar);

// All empirical coefficients up to j1 retained, no thresholding.
DensityEstimate linear_estimate(const CoefficientSet& coeffs,
                                std::shared_ptr<const WaveletBasis> basis, int j1,
                                Mechanism source = Mechanism::kOne);

// Hard thresholding of the detail coefficients: keep beta_hat iff
// |beta_hat| >= K * t (closed comparison); alpha_hat untouched.
DensityEstimate adaptive_estimate(const CoefficientSet& coeffs,
                                  std::shared_ptr<const WaveletBasis> basis,
                                  const EstimatorConfig& config, double mechanism_nu);

std::vector<double> evaluate(const DensityEstimate& estimate, std::span<const double> xs);

// Display-only positive part + renormalization to unit mass on a grid.
std::vector<double> normalize_on_grid(std::span<const double> values, double cell);

nlohmann::json estimate_to_json(const DensityEstimate& estimate);

}  // namespace privwave
