#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "privwave/density.hpp"
#include "privwave/estimator.hpp"
#include "privwave/privacy.hpp"
#include "privwave/rng.hpp"
#include "privwave/wavelet.hpp"

using namespace privwave;
using Kind = WaveletBasis::Kind;

namespace {

std::shared_ptr<const WaveletBasis> shared_basis(WaveletFamily family, int depth = 12) {
  return std::make_shared<const WaveletBasis>(WaveletBasis::build(family, depth));
}

MechanismConfig make_config(std::shared_ptr<const WaveletBasis> basis, Mechanism variant,
                            double alpha, int j0, int j1, double nu = 2.0) {
  MechanismConfig config;
  config.variant = variant;
  config.alpha = alpha;
  config.j0 = j0;
  config.j1 = j1;
  config.nu = nu;
  config.basis = std::move(basis);
  config.support_T = 1.0;
  return config;
}

CoefficientSet mean_coefficients(const Density& truth, const MechanismConfig& config,
                                 std::size_t n, std::uint64_t seed) {
  const SlotLayout layout = SlotLayout::make(config);
  const std::vector<double> xs = truth.sample(n, rng::derive(seed, std::uint64_t{1}));
  CoefficientAccumulator acc(layout);
  std::vector<double> z(layout.total_slots);
  const std::uint64_t noise_root = rng::derive(seed, std::uint64_t{2});
  for (std::size_t i = 0; i < n; ++i) {
    privatize_into(xs[i], config, layout, rng::derive(noise_root, static_cast<std::uint64_t>(i)), z);
    acc.add_record(z);
  }
  return acc.mean();
}

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("empirical coefficients of one record equal its slots") {
  const auto basis = shared_basis(WaveletFamily::kHaar, 10);
  const auto config = make_config(basis, Mechanism::kTwo, 1.0, 0, 2);
  const SlotLayout layout = SlotLayout::make(config);
  const std::vector<double> z = privatize(0.4, config, layout, 7ull);
  const CoefficientSet coeffs = empirical_coefficients({z}, layout);
  for (const auto& row : layout.rows) {
    for (long k = row.ks.k_min; k <= row.ks.k_max; ++k) {
      const double v = z[row.offset + (k - row.ks.k_min)];
      if (row.father) {
        CHECK(coeffs.alpha_at(k) == v);
      } else {
        CHECK(coeffs.beta_at(row.j, k) == v);
      }
    }
  }
}

TEST_CASE("record order does not change the mean") {
  const auto basis = shared_basis(WaveletFamily::kHaar, 10);
  const auto config = make_config(basis, Mechanism::kTwo, 1.0, 0, 1);
  const SlotLayout layout = SlotLayout::make(config);
  std::vector<std::vector<double>> records;
  for (std::uint64_t i = 0; i < 6; ++i) {
    records.push_back(privatize(0.1 * static_cast<double>(i), config, layout, i));
  }
  const CoefficientSet fwd = empirical_coefficients(records, layout);
  std::reverse(records.begin(), records.end());
  const CoefficientSet rev = empirical_coefficients(records, layout);
  for (long k = fwd.alpha_range.k_min; k <= fwd.alpha_range.k_max; ++k) {
    CHECK(fwd.alpha_at(k) == doctest::Approx(rev.alpha_at(k)).epsilon(1e-15));
  }
  CHECK_THROWS_AS(empirical_coefficients({}, layout), std::invalid_argument);
}

TEST_CASE("accumulator merge equals one-shot accumulation") {
  const auto basis = shared_basis(WaveletFamily::kHaar, 10);
  const auto config = make_config(basis, Mechanism::kTwo, 1.0, 0, 1);
  const SlotLayout layout = SlotLayout::make(config);
  CoefficientAccumulator all(layout), left(layout), right(layout);
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto z = privatize(0.05 * static_cast<double>(i), config, layout, i);
    all.add_record(z);
    (i < 5 ? left : right).add_record(z);
  }
  left.merge(right);
  CHECK(left.count() == all.count());
  // different summation groupings agree to rounding error
  const auto a = all.mean(), b = left.mean();
  for (long k = a.alpha_range.k_min; k <= a.alpha_range.k_max; ++k) {
    CHECK(a.alpha_at(k) == doctest::Approx(b.alpha_at(k)).epsilon(1e-12));
  }
  for (long k = a.beta_range[0].k_min; k <= a.beta_range[0].k_max; ++k) {
    CHECK(a.beta_at(0, k) == doctest::Approx(b.beta_at(0, k)).epsilon(1e-12));
  }
}

TEST_CASE("slotwise mean converges to the true coefficient") {
  const auto basis = shared_basis(WaveletFamily::kHaar, 10);
  const auto config = make_config(basis, Mechanism::kTwo, 1.0, 0, 1);
  const Density u = make_uniform01();
  const std::size_t n = 20000;
  const CoefficientSet coeffs = mean_coefficients(u, config, n, 99ull);
  // alpha_00 = 1 for the uniform density; SE dominated by the noise scale
  const std::vector<double> sigmas = noise_scales(config);
  const double se = sigmas[0] * std::sqrt(2.0 / static_cast<double>(n));
  CHECK(std::abs(coeffs.alpha_at(0) - 1.0) <= 3.0 * se);
}

TEST_CASE("linear level rule") {
  CHECK(choose_linear_level(1024, 1.0, 1.0) == 2);
  CHECK(choose_linear_level(1024, 1e6, 1.0) == 3);
  CHECK(choose_linear_level(2, 1.0, 1.0) == 0);
  CHECK(choose_linear_level(2, 0.5, 1.0) == 0);
}

TEST_CASE("adaptive level rule") {
  const auto [j0, j1] = choose_adaptive_levels(4096, 1.0, 1);
  CHECK(j0 == 2);
  CHECK(j1 == 4);
  const auto [k0, k1] = choose_adaptive_levels(4096, 1e6, 1);
  CHECK(k1 == 8);  // j1' branch wins when privacy is effectively off
  CHECK(k0 <= k1);
  for (std::size_t n : {64u, 1024u, 65536u}) {
    const auto [a, b] = choose_adaptive_levels(n, 0.7, 2);
    CHECK(a <= b);
  }
  CHECK_THROWS_AS(choose_adaptive_levels(8, 0.001, 1), std::invalid_argument);
}

TEST_CASE("threshold formula") {
  CHECK(threshold(1, 100, 10.0, 2.0, 2.0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(threshold(4, 100, 0.5, 2.0, 2.0) == doctest::Approx(51.2).epsilon(1e-12));
  // j = 0 falls back to (j v 1) = 1
  CHECK(threshold(0, 100, 10.0, 2.0, 2.0) == doctest::Approx(0.2).epsilon(1e-12));
  double prev = 0.0;
  for (int j = 1; j <= 12; ++j) {
    const double t = threshold(j, 4096, 1.0, 4.0, 2.0);
    CHECK(t >= prev);
    prev = t;
  }
}

TEST_CASE("adaptive thresholding keeps only coefficients above K*t") {
  const auto basis = shared_basis(WaveletFamily::kHaar, 10);
  CoefficientSet coeffs;
  coeffs.j0 = 0;
  coeffs.j1 = 1;
  coeffs.alpha_range = {0, 0};
  coeffs.alpha = {1.0};
  coeffs.beta_range = {{0, 0}, {0, 1}};
  coeffs.beta = {{0.5}, {0.2, 3.0}};

  EstimatorConfig config;
  config.mode = EstimatorMode::kAdaptive;
  config.n = 100;
  config.alpha = 1.0;
  config.nu = 2.0;
  config.regularity_N = 1;
  config.r = 2.0;
  config.L_bar = 1.0;

  const double K = threshold_constant_K(*basis, 2.0, 1.0);
  CHECK(K == doctest::Approx(4.0 * (1.0 + 36.0 * kSupSafety)).epsilon(1e-12));

  SUBCASE("defaults wipe small coefficients") {
    const DensityEstimate est = adaptive_estimate(coeffs, basis, config, 2.0);
    CHECK(est.kept_per_level == std::vector<long>{0, 0});
    CHECK(est.coeffs.beta_at(1, 1) == 0.0);
    CHECK(est.coeffs.alpha_at(0) == 1.0);  // father coefficients untouched
    CHECK(est.thresholds.size() == 2);
  }

  SUBCASE("boundary comparison is closed") {
    config.threshold_override = 3.0;  // beta_{1,1} sits exactly at the cut
    const DensityEstimate est = adaptive_estimate(coeffs, basis, config, 2.0);
    CHECK(est.coeffs.beta_at(1, 1) == 3.0);
    CHECK(est.kept_per_level == std::vector<long>{0, 1});
  }

  SUBCASE("thresholding twice equals thresholding once") {
    const DensityEstimate once = adaptive_estimate(coeffs, basis, config, 2.0);
    const DensityEstimate twice = adaptive_estimate(once.coeffs, basis, config, 2.0);
    CHECK(once.coeffs.beta == twice.coeffs.beta);
  }

  SUBCASE("nu mismatch is rejected") {
    CHECK_THROWS_AS(adaptive_estimate(coeffs, basis, config, 3.0), std::invalid_argument);
  }
}

TEST_CASE("planted spikes survive thresholding in the noiseless regime") {
  const auto basis = shared_basis(WaveletFamily::kDb2);
  const ReferenceDensity ref = make_reference_density(1.0, 0.5, -0.5, 0.5);
  const auto shifts = disjoint_support_shifts(*basis, 5, -0.5, 0.5);
  std::vector<int> theta(shifts.size(), 0);
  theta[2] = theta[5] = theta[8] = 1;
  const double gamma = 0.8 * 0.5 / (std::exp2(2.5) * basis->sup_mother());
  const Density truth = make_hypothesis_density(ref, basis, 5, theta, gamma);

  const auto config = make_config(basis, Mechanism::kTwo, 1e6, 2, 6);
  const std::size_t n = 100000;
  const CoefficientSet coeffs = mean_coefficients(truth, config, n, 4242ull);

  EstimatorConfig est_config;
  est_config.mode = EstimatorMode::kAdaptive;
  est_config.n = n;
  est_config.alpha = 1e6;
  est_config.nu = 2.0;
  est_config.gamma_t = 1.5e-4;  // cut sits between f0's own level-5 mass and the plant
  est_config.L_bar = 1.0;

  const double cut =
      threshold_constant_K(*basis, 2.0, 1.0) *
      threshold(5, n, 1e6, *est_config.gamma_t, 2.0);
  REQUIRE(gamma > 2.5 * cut);  // planted mass clears the cut by a wide margin

  const DensityEstimate est = adaptive_estimate(coeffs, basis, est_config, 2.0);
  // at the planted level, exactly the planted shifts survive
  const ShiftRange range = est.coeffs.beta_range[5 - 2];
  for (long k = range.k_min; k <= range.k_max; ++k) {
    const bool planted =
        std::find(shifts.begin(), shifts.end(), k) != shifts.end() &&
        theta[std::find(shifts.begin(), shifts.end(), k) - shifts.begin()] == 1;
    if (planted) {
      CHECK(est.coeffs.beta_at(5, k) != 0.0);
    } else {
      CHECK(est.coeffs.beta_at(5, k) == 0.0);
    }
  }
}

TEST_CASE("linear estimate keeps everything and flags mech2 input") {
  const auto basis = shared_basis(WaveletFamily::kHaar, 10);
  CoefficientSet coeffs;
  coeffs.j0 = 0;
  coeffs.j1 = 2;
  coeffs.alpha_range = {0, 0};
  coeffs.alpha = {1.0};
  coeffs.beta_range = {{0, 0}, {0, 0}, {0, 0}};
  coeffs.beta = {{0.3}, {0.1}, {0.05}};

  const DensityEstimate full = linear_estimate(coeffs, basis, 2, Mechanism::kOne);
  CHECK_FALSE(full.off_theorem);
  CHECK(full.coeffs.beta == coeffs.beta);
  const DensityEstimate flagged = linear_estimate(coeffs, basis, 1, Mechanism::kTwo);
  CHECK(flagged.off_theorem);
  CHECK(flagged.coeffs.beta.size() == 2);
  CHECK_THROWS_AS(linear_estimate(coeffs, basis, 5, Mechanism::kOne), std::invalid_argument);
}

TEST_CASE("zero coefficients evaluate to the zero function") {
  const auto basis = shared_basis(WaveletFamily::kHaar, 10);
  CoefficientSet coeffs;
  coeffs.j0 = 0;
  coeffs.j1 = 0;
  coeffs.alpha_range = {0, 0};
  coeffs.alpha = {0.0};
  coeffs.beta_range = {{0, 0}};
  coeffs.beta = {{0.0}};
  const DensityEstimate est = linear_estimate(coeffs, basis, 0, Mechanism::kOne);
  for (double x : {-0.4, 0.0, 0.3, 0.99}) CHECK(est.eval(x) == 0.0);
}

TEST_CASE("single Haar scaling coefficient reproduces the uniform indicator") {
  const auto basis = shared_basis(WaveletFamily::kHaar, 10);
  CoefficientSet coeffs;
  coeffs.j0 = 0;
  coeffs.j1 = 0;
  coeffs.alpha_range = {0, 0};
  coeffs.alpha = {1.0};
  coeffs.beta_range = {{0, 0}};
  coeffs.beta = {{0.0}};
  const DensityEstimate est = linear_estimate(coeffs, basis, 0, Mechanism::kOne);
  CHECK(est.eval(0.25) == 1.0);
  CHECK(est.eval(0.75) == 1.0);
  CHECK(est.eval(-0.25) == 0.0);
  CHECK(est.eval(1.25) == 0.0);
}

TEST_CASE("windowed evaluation agrees with the naive double sum") {
  const auto basis = shared_basis(WaveletFamily::kDb3, 10);
  const ReferenceDensity ref = make_reference_density(1.0, 0.5, -0.5, 0.5);
  const CoefficientSet coeffs = wavelet_coefficients(ref.density, *basis, 0, 3);
  const DensityEstimate est = linear_estimate(coeffs, basis, 3, Mechanism::kOne);
  rng::Stream stream(8);
  for (int trial = 0; trial < 200; ++trial) {
    const double x = (stream.next_unit_uniform() - 0.5) * 3.0;
    double naive = 0.0;
    for (long k = -64; k <= 64; ++k) {
      naive += coeffs.alpha_at(k) * basis->eval_scaled(Kind::kFather, 0, k, x);
    }
    for (int j = 0; j <= 3; ++j) {
      for (long k = -512; k <= 512; ++k) {
        naive += coeffs.beta_at(j, k) * basis->eval_scaled(Kind::kMother, j, k, x);
      }
    }
    CHECK(std::abs(est.eval(x) - naive) <= 1e-12);
  }
}

TEST_CASE("adaptive with zeroed thresholds degenerates to linear") {
  const auto basis = shared_basis(WaveletFamily::kDb2);
  const ReferenceDensity ref = make_reference_density(1.0, 0.5, -0.5, 0.5);
  const auto config = make_config(basis, Mechanism::kTwo, 1e6, 1, 4);
  const CoefficientSet coeffs = mean_coefficients(ref.density, config, 4000, 5ull);

  EstimatorConfig est_config;
  est_config.mode = EstimatorMode::kAdaptive;
  est_config.n = 4000;
  est_config.alpha = 1e6;
  est_config.nu = 2.0;
  est_config.threshold_override = 0.0;

  const DensityEstimate adaptive = adaptive_estimate(coeffs, basis, est_config, 2.0);
  const DensityEstimate linear = linear_estimate(coeffs, basis, 4, Mechanism::kTwo);
  CHECK(adaptive.coeffs.alpha == linear.coeffs.alpha);
  CHECK(adaptive.coeffs.beta == linear.coeffs.beta);
}

TEST_CASE("moment bound shape: MC second moments track 1/n + j^{2nu} 2^j/(n alpha^2)") {
  const auto basis = shared_basis(WaveletFamily::kHaar, 10);
  const Density u = make_uniform01();
  const double alpha = 1.0, nu = 2.0;
  const auto config = make_config(basis, Mechanism::kTwo, alpha, 0, 4, nu);
  const SlotLayout layout = SlotLayout::make(config);
  const std::size_t n = 64, reps = 2000;

  const CoefficientSet truth = wavelet_coefficients(u, *basis, 0, 4);
  std::vector<double> ratio;
  for (int j = 1; j <= 4; ++j) {
    const long k = 0;
    double mse = 0.0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const std::uint64_t rep_seed = rng::derive(777ull, static_cast<std::uint64_t>(rep));
      const CoefficientSet hat = mean_coefficients(u, config, n, rep_seed);
      const double d = hat.beta_at(j, k) - truth.beta_at(j, k);
      mse += d * d;
    }
    mse /= static_cast<double>(reps);
    const double bound = 1.0 / n + std::pow(static_cast<double>(j), 2.0 * nu) *
                                       std::exp2(j) / (n * alpha * alpha);
    ratio.push_back(mse / bound);
  }
  // a single constant C works across levels: the ratios stay within one decade
  const auto [lo, hi] = std::minmax_element(ratio.begin(), ratio.end());
  CHECK(*hi / *lo <= 10.0);
  CHECK(*hi <= 1e4);
}

TEST_CASE("normalization clips negatives and restores unit mass") {
  const std::vector<double> vals{-0.5, 1.0, 2.0, 1.0, -0.25};
  const double cell = 0.5;
  const std::vector<double> normed = normalize_on_grid(vals, cell);
  CHECK(normed[0] == 0.0);
  CHECK(normed[4] == 0.0);
  double mass = 0.0;
  for (double v : normed) mass += v * cell;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("estimate JSON carries meta") {
  const auto basis = shared_basis(WaveletFamily::kHaar, 10);
  CoefficientSet coeffs;
  coeffs.j0 = 0;
  coeffs.j1 = 0;
  coeffs.alpha_range = {0, 0};
  coeffs.alpha = {1.0};
  coeffs.beta_range = {{0, 0}};
  coeffs.beta = {{2.0}};
  const DensityEstimate est = linear_estimate(coeffs, basis, 0, Mechanism::kTwo);
  const auto j = estimate_to_json(est);
  CHECK(j.at("mode") == "linear");
  CHECK(j.at("off_theorem") == true);
  CHECK(j.at("basis").at("family") == "haar");
  CHECK(j.at("slots_per_level").size() == 1);
}

}  // TEST_SUITE
