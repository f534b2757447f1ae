#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>

#include "privwave/rng.hpp"

using namespace privwave;

TEST_SUITE("rng") {

TEST_CASE("laplace inverse CDF maps the median to zero") {
  CHECK(rng::laplace_from_uniform(0.0, 2.0) == 0.0);
  CHECK(rng::laplace_from_uniform(0.25, 1.0) == doctest::Approx(std::log(0.5)));
  CHECK(rng::laplace_from_uniform(-0.25, 1.0) == doctest::Approx(-std::log(0.5)));
}

TEST_CASE("symmetric uniform stays strictly inside (-1/2, 1/2)") {
  rng::Stream stream(12345);
  double lo = 1.0, hi = -1.0;
  for (int i = 0; i < 200000; ++i) {
    const double u = stream.next_symmetric_uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > -0.5);
  CHECK(hi < 0.5);
  CHECK(lo < -0.49);
  CHECK(hi > 0.49);
}

TEST_CASE("laplace moments match k! lambda^k") {
  // E|W| = lambda, E W^2 = 2 lambda^2
  rng::Stream stream(777);
  const double lambda = 2.0;
  const int n = 1000000;
  double abs_sum = 0.0, sq_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = stream.next_laplace(lambda);
    abs_sum += std::abs(w);
    sq_sum += w * w;
  }
  CHECK(abs_sum / n == doctest::Approx(2.0).epsilon(0.005));
  CHECK(sq_sum / n == doctest::Approx(8.0).epsilon(0.0125));
}

TEST_CASE("derivation separates streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t rec = 0; rec < 50; ++rec) {
    for (std::uint64_t lvl = 0; lvl < 8; ++lvl) {
      for (std::int64_t k = -20; k <= 20; ++k) {
        seen.insert(rng::derive_signed(rng::derive(rng::derive(99ull, rec), lvl), k));
      }
    }
  }
  CHECK(seen.size() == 50u * 8u * 41u);
}

TEST_CASE("derivation is reproducible") {
  CHECK(rng::derive(1, std::uint64_t{2}) == rng::derive(1, std::uint64_t{2}));
  CHECK(rng::derive(1, std::uint64_t{2}) != rng::derive(2, std::uint64_t{2}));
  CHECK(rng::derive(1, std::uint64_t{2}) != rng::derive(1, std::uint64_t{3}));
}

}  // TEST_SUITE
