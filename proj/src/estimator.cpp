#include "privwave/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace privwave {

std::string to_string(EstimatorMode mode) {
  return mode == EstimatorMode::kLinear ? "linear" : "adaptive";
}

EstimatorMode estimator_mode_from_string(std::string_view name) {
  if (name == "linear") return EstimatorMode::kLinear;
  if (name == "adaptive") return EstimatorMode::kAdaptive;
  throw std::invalid_argument("estimator: unknown mode '" + std::string(name) + "'");
}

CoefficientAccumulator::CoefficientAccumulator(const SlotLayout& layout)
    : layout_(&layout), sums_(layout.total_slots, 0.0) {}

void CoefficientAccumulator::add_record(std::span<const double> slots) {
  if (slots.size() != sums_.size()) {
    throw std::invalid_argument("accumulator: record layout mismatch");
  }
  for (std::size_t i = 0; i < sums_.size(); ++i) sums_[i] += slots[i];
  ++count_;
}

void CoefficientAccumulator::merge(const CoefficientAccumulator& other) {
  if (other.sums_.size() != sums_.size()) {
    throw std::invalid_argument("accumulator: merge layout mismatch");
  }
  for (std::size_t i = 0; i < sums_.size(); ++i) sums_[i] += other.sums_[i];
  count_ += other.count_;
}

CoefficientSet CoefficientAccumulator::mean() const {
  if (count_ == 0) throw std::invalid_argument("accumulator: empty record set");
  const SlotLayout& layout = *layout_;
  CoefficientSet out;
  out.j0 = layout.rows.front().j + 1;
  out.j1 = layout.rows.back().j;
  const double inv_n = 1.0 / static_cast<double>(count_);
  for (const SlotLayout::Row& row : layout.rows) {
    std::vector<double> vals(static_cast<std::size_t>(row.ks.count()));
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = sums_[row.offset + i] * inv_n;
    if (row.father) {
      out.alpha_range = row.ks;
      out.alpha = std::move(vals);
    } else {
      out.beta_range.push_back(row.ks);
      out.beta.push_back(std::move(vals));
    }
  }
  return out;
}

CoefficientSet empirical_coefficients(const std::vector<std::vector<double>>& records,
                                      const SlotLayout& layout) {
  if (records.empty()) throw std::invalid_argument("empirical_coefficients: no records");
  CoefficientAccumulator acc(layout);
  for (const auto& rec : records) acc.add_record(rec);
  return acc.mean();
}

CoefficientSet empirical_coefficients(const RecordBatch& batch) {
  if (batch.n_records == 0) throw std::invalid_argument("empirical_coefficients: no records");
  CoefficientAccumulator acc(batch.layout);
  const std::size_t stride = batch.layout.total_slots;
  for (std::size_t i = 0; i < batch.n_records; ++i) {
    acc.add_record(std::span<const double>(batch.slots.data() + i * stride, stride));
  }
  return acc.mean();
}

namespace {
// floor(log2(x)) with a nudge so exact powers of two are not lost to pow/log
// roundoff (e.g. 4096^{1/6} evaluating to 3.9999999999999996)
int floor_log2(double x) {
  return static_cast<int>(std::floor(std::log2(x) + 1e-9));
}
}  // namespace

int choose_linear_level(std::size_t n, double alpha, double s) {
  if (n < 2) return 0;
  if (alpha <= 0.0 || s <= 0.0) {
    throw std::invalid_argument("choose_linear_level: need alpha > 0 and s > 0");
  }
  const double nd = static_cast<double>(n);
  const double private_branch = std::pow(nd * alpha * alpha, 1.0 / (2.0 * s + 2.0));
  const double plain_branch = std::pow(nd, 1.0 / (2.0 * s + 1.0));
  const double target = std::min(private_branch, plain_branch);
  return std::max(0, floor_log2(target));
}

std::pair<int, int> choose_adaptive_levels(std::size_t n, double alpha, int N) {
  if (n < 8) throw std::invalid_argument("choose_adaptive_levels: n must be >= 8");
  if (N < 1) throw std::invalid_argument("choose_adaptive_levels: N must be >= 1");
  const double nd = static_cast<double>(n);
  const double na2 = nd * alpha * alpha;
  if (!(na2 > std::exp(1.0))) {
    throw std::invalid_argument(
        "choose_adaptive_levels: privacy budget too small for adaptive rule at this n");
  }
  const double d = static_cast<double>(2 * (N + 1));
  const double j0_target = std::min(std::pow(na2, 1.0 / (d + 2.0)), std::pow(nd, 1.0 / (d + 1.0)));
  const int j0 = std::max(0, floor_log2(j0_target));
  const int j1p = floor_log2(nd / std::log(nd));
  const int j1pp = static_cast<int>(std::floor(0.5 * std::log2(na2 / std::log(na2)) + 1e-9));
  const int j1 = std::max(j0, std::min(j1p, j1pp));
  return {j0, j1};
}

double threshold(int j, std::size_t n, double alpha, double gamma_t, double nu) {
  if (n < 1) throw std::invalid_argument("threshold: n must be >= 1");
  const double jv = static_cast<double>(std::max(j, 1));
  const double noise_factor = std::max(1.0, std::exp2(0.5 * j) / alpha);
  return gamma_t * std::pow(jv, nu + 0.5) / std::sqrt(static_cast<double>(n)) * noise_factor;
}

double threshold_constant_K(const WaveletBasis& basis, double nu, double L_bar) {
  const double sigma = 4.0 * basis.overlap_count_cA() * basis.sup_mother() * kSupSafety *
                       (2.0 * nu - 1.0) / (nu - 1.0);
  return 4.0 * (L_bar + sigma);
}

DensityEstimate linear_estimate(const CoefficientSet& coeffs,
                                std::shared_ptr<const WaveletBasis> basis, int j1,
                                Mechanism source) {
  if (j1 > coeffs.j1) {
    throw std::invalid_argument("linear_estimate: j1 exceeds available levels");
  }
  DensityEstimate est;
  est.mode = EstimatorMode::kLinear;
  est.off_theorem = source == Mechanism::kTwo;
  est.basis = std::move(basis);
  est.coeffs = coeffs;
  est.coeffs.j1 = std::max(coeffs.j0, j1);
  if (j1 < coeffs.j0) {
    // pure projection: drop every detail level
    est.coeffs.j1 = coeffs.j0;
    est.coeffs.beta_range.assign(1, ShiftRange{});
    est.coeffs.beta.assign(1, {});
  } else {
    est.coeffs.beta_range.resize(j1 - coeffs.j0 + 1);
    est.coeffs.beta.resize(j1 - coeffs.j0 + 1);
  }
  for (std::size_t row = 0; row < est.coeffs.beta.size(); ++row) {
    est.slots_per_level.push_back(static_cast<long>(est.coeffs.beta[row].size()));
    est.kept_per_level.push_back(static_cast<long>(est.coeffs.beta[row].size()));
  }
  return est;
}

DensityEstimate adaptive_estimate(const CoefficientSet& coeffs,
                                  std::shared_ptr<const WaveletBasis> basis,
                                  const EstimatorConfig& config, double mechanism_nu) {
  if (std::abs(mechanism_nu - config.nu) > 1e-12) {
    throw std::invalid_argument("adaptive_estimate: mechanism/estimator nu mismatch");
  }
  DensityEstimate est;
  est.mode = EstimatorMode::kAdaptive;
  est.coeffs = coeffs;
  const double K = threshold_constant_K(*basis, config.nu, config.L_bar);
  est.basis = std::move(basis);

  for (int j = coeffs.j0; j <= coeffs.j1; ++j) {
    const auto row = static_cast<std::size_t>(j - coeffs.j0);
    const double cut = config.threshold_override.value_or(
        K * threshold(j, config.n, config.alpha, config.gamma_threshold(), config.nu));
    long kept = 0;
    for (double& b : est.coeffs.beta[row]) {
      if (std::abs(b) >= cut) {
        ++kept;
      } else {
        b = 0.0;
      }
    }
    est.thresholds.push_back(cut);
    est.kept_per_level.push_back(kept);
    est.slots_per_level.push_back(static_cast<long>(est.coeffs.beta[row].size()));
  }
  return est;
}

std::vector<double> evaluate(const DensityEstimate& estimate, std::span<const double> xs) {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = estimate.eval(xs[i]);
  return out;
}

std::vector<double> normalize_on_grid(std::span<const double> values, double cell) {
  std::vector<double> out(values.begin(), values.end());
  double mass = 0.0;
  for (double& v : out) {
    if (v < 0.0) v = 0.0;
    mass += v * cell;
  }
  if (mass > 0.0) {
    for (double& v : out) v /= mass;
  }
  return out;
}

nlohmann::json estimate_to_json(const DensityEstimate& estimate) {
  nlohmann::json j = coefficients_to_json(estimate.coeffs);
  j["mode"] = to_string(estimate.mode);
  j["off_theorem"] = estimate.off_theorem;
  j["basis"] = {{"family", to_string(estimate.basis->family())},
                {"depth", estimate.basis->depth()}};
  j["thresholds"] = estimate.thresholds;
  j["kept_per_level"] = estimate.kept_per_level;
  j["slots_per_level"] = estimate.slots_per_level;
  return j;
}

}  // namespace privwave
