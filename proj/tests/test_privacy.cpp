#include <doctest.h>

#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include "privwave/privacy.hpp"
#include "privwave/rng.hpp"
#include "privwave/wavelet.hpp"

using namespace privwave;
using Kind = WaveletBasis::Kind;

namespace {

MechanismConfig haar_config(Mechanism variant, double alpha, int j0, int j1,
                            double nu = 2.0) {
  MechanismConfig config;
  config.variant = variant;
  config.alpha = alpha;
  config.j0 = j0;
  config.j1 = j1;
  config.nu = nu;
  config.basis = std::make_shared<const WaveletBasis>(
      WaveletBasis::build(WaveletFamily::kHaar, 12));
  config.support_T = 1.0;
  return config;
}

}  // namespace

TEST_SUITE("privacy") {

TEST_CASE("noise scales match the hand-computed values") {
  // Haar: c_A = 3, sup norms 1 (padded by 1.001 in the scales)
  const auto m2 = haar_config(Mechanism::kTwo, 1.0, 0, 4, 2.0);
  const std::vector<double> sigma2 = noise_scales(m2);
  CHECK(sigma2[0] == doctest::Approx(12.0 * kSupSafety).epsilon(1e-12));
  CHECK(sigma2[0] == doctest::Approx(12.0).epsilon(2e-3));
  // level j=2: 12 * (2nu-1)/(nu-1) * (j v 1)^nu * 2^{j/2} = 12*3*4*2
  CHECK(sigma2[3] == doctest::Approx(288.0 * kSupSafety).epsilon(1e-12));

  const auto m1 = haar_config(Mechanism::kOne, 1.0, 0, 3);
  const std::vector<double> sigma1 = noise_scales(m1);
  const double expect = 12.0 * (std::sqrt(2.0) / (std::sqrt(2.0) - 1.0)) * std::exp2(1.5);
  CHECK(expect == doctest::Approx(115.88).epsilon(1e-4));
  for (std::size_t lvl = 1; lvl < sigma1.size(); ++lvl) {
    CHECK(sigma1[lvl] == doctest::Approx(expect * kSupSafety).epsilon(1e-12));
  }
}

TEST_CASE("config validation") {
  auto config = haar_config(Mechanism::kTwo, 1.0, 0, 4);
  CHECK_NOTHROW(config.validate());
  config.alpha = 0.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = haar_config(Mechanism::kTwo, 1.0, 3, 2);
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = haar_config(Mechanism::kTwo, 1.0, 0, 4, 1.0);
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  CHECK_THROWS_AS(mechanism_from_string("mech3"), std::invalid_argument);
}

TEST_CASE("laplace_sample rejects bad scale and matches the stream") {
  rng::Stream stream(3);
  CHECK_THROWS_AS(laplace_sample(0.0, stream), std::invalid_argument);
  rng::Stream a(5), b(5);
  CHECK(laplace_sample(2.0, a) == b.next_laplace(2.0));
}

TEST_CASE("slot layout counts active shifts per level") {
  const auto config = haar_config(Mechanism::kTwo, 1.0, 0, 4);
  const SlotLayout layout = SlotLayout::make(config);
  REQUIRE(layout.rows.size() == 6);  // father + 5 mother levels
  CHECK(layout.rows[0].father);
  CHECK(layout.rows[0].j == -1);
  CHECK(layout.rows[0].ks.count() == 2);  // Haar j=0 on [-1,1]: k in {-1,0}
  std::size_t total = 0;
  for (const auto& row : layout.rows) total += row.ks.count();
  CHECK(total == layout.total_slots);
  // |N_j| doubles per level for Haar
  CHECK(layout.rows[2].ks.count() == 4);
  CHECK(layout.rows[3].ks.count() == 8);
}

TEST_CASE("privatize adds nothing but near-zero noise when alpha is huge") {
  auto config = haar_config(Mechanism::kTwo, 1e6, 0, 3);
  const SlotLayout layout = SlotLayout::make(config);
  const double x = 0.37;
  const std::vector<double> z = privatize(x, config, layout, rng::derive(11ull, std::uint64_t{0}));
  const std::vector<double> sigmas = noise_scales(config);
  for (const auto& row : layout.rows) {
    const auto kind = row.father ? Kind::kFather : Kind::kMother;
    const int level = row.father ? config.j0 : row.j;
    for (long k = row.ks.k_min; k <= row.ks.k_max; ++k) {
      const double clean = config.basis->eval_scaled(kind, level, k, x);
      const double noisy = z[row.offset + (k - row.ks.k_min)];
      CHECK(std::abs(noisy - clean) <= 10.0 * row.sigma);
      CHECK(std::abs(noisy - clean) <= 1e-2);
    }
  }
}

TEST_CASE("records differ across keys but share the layout") {
  const auto config = haar_config(Mechanism::kTwo, 1.0, 0, 2);
  const SlotLayout layout = SlotLayout::make(config);
  const auto a = privatize(0.2, config, layout, rng::derive(1ull, std::uint64_t{0}));
  const auto b = privatize(0.2, config, layout, rng::derive(1ull, std::uint64_t{1}));
  REQUIRE(a.size() == b.size());
  CHECK(a != b);
  const auto a2 = privatize(0.2, config, layout, rng::derive(1ull, std::uint64_t{0}));
  CHECK(a == a2);
}

TEST_CASE("out-of-support x still gets a full noisy record") {
  const auto config = haar_config(Mechanism::kTwo, 1.0, 0, 2);
  const SlotLayout layout = SlotLayout::make(config);
  const auto z = privatize(9.5, config, layout, rng::derive(4ull, std::uint64_t{0}));
  CHECK(z.size() == layout.total_slots);
  double energy = 0.0;
  for (double v : z) energy += std::abs(v);
  CHECK(energy > 0.0);
}

TEST_CASE("privatization is unbiased for a fixed input") {
  const auto config = haar_config(Mechanism::kTwo, 1.0, 0, 2);
  const SlotLayout layout = SlotLayout::make(config);
  const double x = 0.6;
  const std::size_t reps = 40000;
  std::vector<double> sums(layout.total_slots, 0.0);
  std::vector<double> sq(layout.total_slots, 0.0);
  std::vector<double> z(layout.total_slots);
  for (std::size_t i = 0; i < reps; ++i) {
    privatize_into(x, config, layout, rng::derive(20250811ull, static_cast<std::uint64_t>(i)), z);
    for (std::size_t s = 0; s < z.size(); ++s) {
      sums[s] += z[s];
      sq[s] += z[s] * z[s];
    }
  }
  for (const auto& row : layout.rows) {
    const auto kind = row.father ? Kind::kFather : Kind::kMother;
    const int level = row.father ? config.j0 : row.j;
    for (long k = row.ks.k_min; k <= row.ks.k_max; ++k) {
      const std::size_t s = row.offset + (k - row.ks.k_min);
      const double mean = sums[s] / reps;
      const double var = sq[s] / reps - mean * mean;
      const double se = std::sqrt(var / reps);
      const double clean = config.basis->eval_scaled(kind, level, k, x);
      CHECK(std::abs(mean - clean) <= 3.0 * se);
    }
  }
}

TEST_CASE("noise across distinct slots is uncorrelated") {
  const auto config = haar_config(Mechanism::kTwo, 1.0, 0, 1);
  const SlotLayout layout = SlotLayout::make(config);
  const std::size_t reps = 100000;
  std::vector<std::vector<double>> z(reps, std::vector<double>(layout.total_slots));
  for (std::size_t i = 0; i < reps; ++i) {
    privatize_into(-5.0, config, layout, rng::derive(31ull, static_cast<std::uint64_t>(i)),
                   z[i]);  // x outside support: slots are pure noise
  }
  for (std::size_t a = 0; a < layout.total_slots; ++a) {
    for (std::size_t b = a + 1; b < layout.total_slots; ++b) {
      double ma = 0.0, mb = 0.0;
      for (std::size_t i = 0; i < reps; ++i) {
        ma += z[i][a];
        mb += z[i][b];
      }
      ma /= reps;
      mb /= reps;
      double cab = 0.0, va = 0.0, vb = 0.0;
      for (std::size_t i = 0; i < reps; ++i) {
        cab += (z[i][a] - ma) * (z[i][b] - mb);
        va += (z[i][a] - ma) * (z[i][a] - ma);
        vb += (z[i][b] - mb) * (z[i][b] - mb);
      }
      CHECK(std::abs(cab / std::sqrt(va * vb)) <= 0.02);
    }
  }
}

TEST_CASE("audit log-ratio basics") {
  const auto config = haar_config(Mechanism::kTwo, 1.0, 0, 4);
  CHECK(audit_privacy(config, 0.3, 0.3) == 0.0);
  const double d1 = audit_privacy(config, 0.3, -0.4);
  const double d2 = audit_privacy(config, -0.4, 0.3);
  CHECK(d1 == doctest::Approx(d2).epsilon(1e-15));
  CHECK(d1 > 0.0);
}

TEST_CASE("audit sweep stays within budget and splits father/mother halves") {
  const auto config = haar_config(Mechanism::kTwo, 1.0, 0, 4);
  const AuditReport report = audit_sweep(config, 1.0 / 128.0, 2);
  CHECK(report.pass);
  CHECK(report.max_log_ratio <= 1.0 + 1e-9);
  CHECK(report.max_father_term <= 0.5 + 1e-9);
  CHECK(report.max_mother_term <= 0.5 + 1e-9);
  CHECK(report.max_log_ratio > 0.2);  // a real sweep finds nontrivial pairs

  // thread count must not change the outcome
  const AuditReport serial = audit_sweep(config, 1.0 / 128.0, 1);
  CHECK(serial.max_log_ratio == report.max_log_ratio);
  CHECK(serial.arg_x == report.arg_x);
  CHECK(serial.arg_xp == report.arg_xp);
}

TEST_CASE("mechanism two level budgets are summable up to j1 = 20") {
  // sum_j 2 c_A sup|psi| 2^{j/2} / sigma_j <= alpha/2 for every truncation
  for (double nu : {1.5, 2.0, 3.0}) {
    const auto config = haar_config(Mechanism::kTwo, 1.0, 0, 20, nu);
    const std::vector<double> sigmas = noise_scales(config);
    const double c_A = config.basis->overlap_count_cA();
    const double sup_psi = config.basis->sup_mother();
    double total = 0.0;
    for (int j = 0; j <= 20; ++j) {
      total += 2.0 * c_A * sup_psi * std::exp2(0.5 * j) / sigmas[j + 1];
    }
    CHECK(total <= config.alpha / 2.0);
  }
}

TEST_CASE("record CSV round trips and checks its digest") {
  const auto config = haar_config(Mechanism::kTwo, 1.0, 0, 2);
  const SlotLayout layout = SlotLayout::make(config);
  const std::vector<double> xs{0.1, 0.4, -0.3};
  std::ostringstream out;
  write_records_csv(out, config, layout, xs, 99ull);

  std::istringstream in(out.str());
  const RecordBatch batch = read_records_csv(in);
  CHECK(batch.n_records == 3);
  CHECK(batch.variant == Mechanism::kTwo);
  CHECK(batch.alpha == 1.0);
  CHECK(batch.digest == config.digest());
  CHECK(batch.layout.total_slots == layout.total_slots);
  // slot values survive the round trip exactly
  std::vector<double> z(layout.total_slots);
  privatize_into(xs[1], config, layout, rng::derive(99ull, std::uint64_t{1}), z);
  for (std::size_t s = 0; s < z.size(); ++s) {
    CHECK(batch.slots[layout.total_slots + s] == z[s]);
  }

  // digest changes when alpha changes
  auto other = config;
  other.alpha = 2.0;
  CHECK(other.digest() != config.digest());

  CHECK_THROWS(read_records_csv(*std::make_unique<std::istringstream>("garbage").get()));
}

}  // TEST_SUITE
