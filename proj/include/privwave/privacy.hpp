#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "privwave/rng.hpp"
#include "privwave/wavelet.hpp"

namespace privwave {

enum class Mechanism : int { kOne = 1, kTwo = 2 };

std::string to_string(Mechanism variant);
Mechanism mechanism_from_string(std::string_view name);

// Table sup-norms are lower bounds of the true sups; padding them wherever
// they enter a noise scale keeps the audited privacy inequality valid.
inline constexpr double kSupSafety = 1.001;

// Non-interactive release configuration. Mechanism one scales every mother
// level by 2^{j1/2}; mechanism two scales level j by (j v 1)^nu * 2^{j/2}.
struct MechanismConfig {
  Mechanism variant = Mechanism::kTwo;
  double alpha = 1.0;
  int j0 = 0;
  int j1 = 0;
  double nu = 2.0;  // mechanism two only
  std::shared_ptr<const WaveletBasis> basis;
  double support_T = 1.0;

  void validate() const;
  // Canonical header string (variant, alpha, j0, j1, nu, family, depth, T).
  std::string digest_string() const;
  std::uint64_t digest() const;
};

// Slot addressing shared by every record under one config: one row per level,
// level j0-1 carrying the father slots, each row a contiguous shift range.
struct SlotLayout {
  struct Row {
    int j;            // j0-1 for the father row
    bool father;
    double sigma;     // noise scale
    double scale;     // 2^{row level / 2} basis prefactor
    ShiftRange ks;
    std::size_t offset;  // base index into the flat slot vector
  };
  std::vector<Row> rows;
  std::size_t total_slots = 0;

  static SlotLayout make(const MechanismConfig& config);
};

// Noise scale per level, index 0 = father row (level j0-1), then j0..j1.
std::vector<double> noise_scales(const MechanismConfig& config);

// One centred Laplace draw with the given scale.
double laplace_sample(double scale, rng::Stream& stream);

// One data holder's release: every slot gets independent Laplace noise; the
// noiseless part is psi_jk(x) (phi on the father row), nonzero in at most c_A
// slots per level. Out-of-support x is handled like any other x. record_key
// identifies the record in the derivation tree (see rng.hpp).
void privatize_into(double x, const MechanismConfig& config, const SlotLayout& layout,
                    std::uint64_t record_key, std::span<double> out);
std::vector<double> privatize(double x, const MechanismConfig& config,
                              const SlotLayout& layout, std::uint64_t record_key);

// Exact sup-over-z log-ratio of the two release densities for inputs x, x':
//   D(x,x') = sum_k |phi(x)-phi(x')|/sigma_{j0-1} + sum_j sum_k |psi(x)-psi(x')|/sigma_j.
// Privacy holds iff sup_{x,x'} D <= alpha.
double audit_privacy(const MechanismConfig& config, double x, double xp);

struct AuditReport {
  double max_log_ratio = 0.0;
  double arg_x = 0.0;
  double arg_xp = 0.0;
  double max_father_term = 0.0;  // budget split: each should stay <= alpha/2
  double max_mother_term = 0.0;
  double grid_step = 0.0;
  double alpha = 0.0;
  bool pass = false;
};

// Exhaustive sweep of (x, x') over the [-T, T] grid with the given step.
// step <= 0 picks the default 2^-(depth-2).
AuditReport audit_sweep(const MechanismConfig& config, double step = 0.0,
                        int threads = 1);

// Record batch CSV: header comments carry the config digest, then one row per
// slot of each record with columns record_id,j,k,z. This file is the only
// artifact crossing the trust boundary.
void write_records_csv(std::ostream& out, const MechanismConfig& config,
                       const SlotLayout& layout, std::span<const double> xs,
                       std::uint64_t noise_root);

struct RecordBatch {
  Mechanism variant = Mechanism::kTwo;
  std::string family;
  int depth = 12;
  double alpha = 1.0;
  int j0 = 0;
  int j1 = 0;
  double nu = 2.0;
  double support_T = 1.0;
  std::uint64_t digest = 0;
  std::size_t n_records = 0;
  SlotLayout layout;                 // ranges reconstructed from the file
  std::vector<double> slots;         // n_records x total_slots, row-major
};

RecordBatch read_records_csv(std::istream& in);

}  // namespace privwave
