#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "privwave/wavelet.hpp"

namespace privwave {

// Ground-truth density with compact support [-T, T]: evaluable everywhere,
// sampleable by inverse CDF from a tabulated distribution function.
// Immutable after construction; sample() is pure given (n, seed).
class Density {
 public:
  static constexpr int kCdfGridLog2 = 17;

  // Wraps f (forced to 0 outside [-T, T]), builds the CDF table by cumulative
  // trapezoid on the 2^17 grid and validates mass within 1e-6. known_max < 0
  // means "scan the grid for the sup".
  static Density from_function(std::function<double(double)> f, double support_T,
                               std::string label, double known_max = -1.0);

  double operator()(double x) const;
  double support_T() const { return support_T_; }
  const std::string& label() const { return label_; }
  const std::vector<double>& cdf_table() const { return cdf_; }
  // Sup of the density (analytic when the constructor knew it, else grid scan).
  double max_value() const { return max_value_; }

  // n i.i.d. draws by inverse CDF; point i uses the stream word derive(seed, i).
  std::vector<double> sample(std::size_t n, std::uint64_t seed) const;

  nlohmann::json to_json(long grid_points = 512) const;

 private:
  std::function<double(double)> eval_;
  double support_T_ = 1.0;
  double max_value_ = 0.0;
  std::string label_;
  std::vector<double> cdf_;
};

// Smooth reference density: exactly c0 on [flat_lo, flat_hi], zero outside
// [-T, T], C^2 polynomial ramps sized so the total mass is exactly 1.
struct ReferenceDensity {
  Density density;
  double support_T = 1.0;
  double c0 = 0.5;
  double flat_lo = -0.5;
  double flat_hi = 0.5;
};

ReferenceDensity make_reference_density(double support_T, double c0, double flat_lo,
                                        double flat_hi);

// Uniform on [0, 1) carried on support [-1, 1]; handy for exact Haar checks.
Density make_uniform01();

// Greedy left-to-right packing of disjoint mother-wavelet supports inside
// [lo, hi]; the hypothesis construction's index set I_j.
std::vector<long> disjoint_support_shifts(const WaveletBasis& basis, int j, double lo,
                                          double hi);

// f0 + gamma * sum_{k in I_j} theta_k psi_jk. Requires |theta| = |I_j| and the
// non-negativity condition gamma * 2^{j/2} * sup|psi| <= c0.
Density make_hypothesis_density(const ReferenceDensity& f0,
                                std::shared_ptr<const WaveletBasis> basis, int j,
                                const std::vector<int>& theta, double gamma);

// alpha (level j0) and beta (levels j0..j1) coefficients over contiguous shift
// ranges per level.
struct CoefficientSet {
  int j0 = 0;
  int j1 = 0;
  ShiftRange alpha_range;
  std::vector<double> alpha;
  std::vector<ShiftRange> beta_range;        // index j - j0
  std::vector<std::vector<double>> beta;     // index j - j0

  double alpha_at(long k) const;
  double beta_at(int j, long k) const;
  std::size_t total_coefficients() const;
};

// Coefficient integrals by composite Simpson on a grid refined past both the
// density's and the wavelet's finest scale: max(2^{j1+8}, 2^15) cells over
// [-T, T] unless min_cells asks for more.
CoefficientSet wavelet_coefficients(const std::function<double(double)>& f,
                                    double support_T, const WaveletBasis& basis, int j0,
                                    int j1, long min_cells = 0);
CoefficientSet wavelet_coefficients(const Density& density, const WaveletBasis& basis,
                                    int j0, int j1, long min_cells = 0);

// Finite expansion sum_k alpha_k phi_{j0 k}(x) + sum_{j,k} beta_jk psi_jk(x),
// touching only the O(c_A) shifts overlapping x per level.
double eval_expansion(const CoefficientSet& coeffs, const WaveletBasis& basis, double x);

// ||alpha||_p + ( sum_j (2^{j(s+1/2-1/p)} ||beta_j||_p)^q )^{1/q}, max over
// levels when q = infinity. Truncated at the stored j1, hence a lower bound of
// the true norm.
double besov_norm(const CoefficientSet& coeffs, double s, double p, double q);

nlohmann::json coefficients_to_json(const CoefficientSet& coeffs);
CoefficientSet coefficients_from_json(const nlohmann::json& j);

}  // namespace privwave
