#pragma once

#include <cmath>
#include <cstdint>

// Deterministic counter-style randomness.
//
// Every random quantity in the library is a pure function of the master seed
// and a path of integer words, so results are bit-identical regardless of
// thread count or evaluation order. The derivation tree is:
//
//   master seed
//     -> derive(master, REPLICATION, rep)            per-replication seed
//          -> derive(rep_seed, SAMPLE)               data-sample root
//               -> derive(root, i)                   one word per data point
//          -> derive(rep_seed, NOISE)                noise root
//               -> derive(root, i)                   per-record key
//                    -> derive(key, level_code)      per-level key
//                         -> derive(key, shift)      slot bits (one Laplace draw)
//
// level_code is j+1 for mother rows and j0 for the father row, so codes are
// distinct within a layout. Negative shifts pass through two's complement.

namespace privwave::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 output permutation (bijective on u64).
constexpr std::uint64_t mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// One derivation step: fold a word into a seed.
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t word) noexcept {
  return mix(seed + kGolden * (word + 0x632be59bd9b4e019ULL));
}

// Signed words (shift indices) pass through two's complement.
constexpr std::uint64_t derive_signed(std::uint64_t seed, std::int64_t word) noexcept {
  return derive(seed, static_cast<std::uint64_t>(word));
}

enum Tag : std::uint64_t {
  kTagSample = 0x53414d50,
  kTagNoise = 0x4e4f4953,
  kTagReplication = 0x52455043,
};

// u64 bits -> uniform strictly inside (-1/2, 1/2), 53-bit resolution.
inline double symmetric_uniform(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53 - 0.5;
}

// u64 bits -> uniform strictly inside (0, 1).
inline double unit_uniform(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Centred Laplace(scale) by inverse CDF: sign(u) * scale * ln(1 - 2|u|),
// u uniform on (-1/2, 1/2). u = 0 maps to the median 0. The magnitude is
// bounded by 53 ln 2 * scale because u never reaches +-1/2.
inline double laplace_from_uniform(double u, double scale) noexcept {
  const double sgn = (u > 0.0) ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
  return sgn * scale * std::log(1.0 - 2.0 * std::abs(u));
}

// Sequential splitmix64 stream, for consumers that draw many values from one
// logical source (moment tests, samplers).
class Stream {
 public:
  explicit Stream(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept {
    state_ += kGolden;
    return mix(state_);
  }
  double next_symmetric_uniform() noexcept { return symmetric_uniform(next_u64()); }
  double next_unit_uniform() noexcept { return unit_uniform(next_u64()); }
  double next_laplace(double scale) noexcept {
    return laplace_from_uniform(next_symmetric_uniform(), scale);
  }

 private:
  std::uint64_t state_;
};

}  // namespace privwave::rng
