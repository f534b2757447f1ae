// privwave command line: privatize | estimate | audit | rate-study.
//
// Every subcommand is a pure function of (spec file, flags, seed); outputs go
// to a run directory addressed by the spec digest so reruns never overwrite.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "privwave/density.hpp"
#include "privwave/estimator.hpp"
#include "privwave/privacy.hpp"
#include "privwave/risk.hpp"
#include "privwave/rng.hpp"
#include "privwave/wavelet.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace privwave;

enum ExitCode : int {
  kOk = 0,
  kGenericError = 1,
  kConfigError = 2,
  kDigestMismatch = 3,
  kAuditFailure = 4,
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DigestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
  json raw;

  // scenario
  std::string density_kind = "reference";
  double support_T = 1.0, c0 = 0.5, flat_lo = -0.5, flat_hi = 0.5;
  int spike_level = 5;
  std::vector<int> spike_theta;
  double spike_gamma = 0.0;  // 0 -> 0.8 of the non-negativity cap

  WaveletFamily family = WaveletFamily::kDb2;
  int depth = 12;

  Mechanism variant = Mechanism::kTwo;
  double alpha = 1.0;
  double nu = 2.0;
  std::optional<int> j0, j1;  // absent -> derived from the estimator rule

  EstimatorConfig estimator;

  // harness
  std::vector<std::size_t> n_grid{1024};
  std::size_t reps = 8;
  std::uint64_t master_seed = 1;
  std::string outputs = "runs";
  bool want_csv = true, want_json = true;

  // rate params
  RateParams rate;
};

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

ExperimentSpec parse_spec(const json& j) {
  ExperimentSpec spec;
  spec.raw = j;
  try {
    const json& sc = j.at("scenario");
    if (sc.contains("density")) {
      const json& d = sc.at("density");
      spec.density_kind = get_or<std::string>(d, "kind", "reference");
      spec.support_T = get_or(d, "T", 1.0);
      spec.c0 = get_or(d, "c0", 0.5);
      if (d.contains("flat")) {
        spec.flat_lo = d.at("flat").at(0).get<double>();
        spec.flat_hi = d.at("flat").at(1).get<double>();
      }
      spec.spike_level = get_or(d, "level", 5);
      spec.spike_gamma = get_or(d, "gamma", 0.0);
      if (d.contains("theta")) spec.spike_theta = d.at("theta").get<std::vector<int>>();
    }
    if (sc.contains("basis")) {
      spec.family = wavelet_family_from_string(
          get_or<std::string>(sc.at("basis"), "family", "db2"));
      spec.depth = get_or(sc.at("basis"), "depth", 12);
    }
    if (sc.contains("mechanism")) {
      const json& m = sc.at("mechanism");
      spec.variant = mechanism_from_string(get_or<std::string>(m, "variant", "mech2"));
      spec.alpha = get_or(m, "alpha", 1.0);
      spec.nu = get_or(m, "nu", 2.0);
      if (m.contains("j0")) spec.j0 = m.at("j0").get<int>();
      if (m.contains("j1")) spec.j1 = m.at("j1").get<int>();
    }
    if (sc.contains("estimator")) {
      const json& e = sc.at("estimator");
      spec.estimator.mode =
          estimator_mode_from_string(get_or<std::string>(e, "mode", "adaptive"));
      spec.estimator.s = get_or(e, "s", 1.0);
      spec.estimator.regularity_N = get_or(e, "N", 1);
      spec.estimator.r = get_or(e, "r", 2.0);
      spec.estimator.nu = get_or(e, "nu", spec.nu);
      spec.estimator.L_bar = get_or(e, "L_bar", 1.0);
      spec.estimator.normalize = get_or(e, "normalize", false);
      if (e.contains("gamma_t")) spec.estimator.gamma_t = e.at("gamma_t").get<double>();
    }
    spec.estimator.alpha = spec.alpha;

    if (j.contains("n_grid")) spec.n_grid = j.at("n_grid").get<std::vector<std::size_t>>();
    spec.reps = get_or<std::size_t>(j, "reps", 8);
    spec.master_seed = get_or<std::uint64_t>(j, "master_seed", 1);
    spec.outputs = get_or<std::string>(j, "outputs", "runs");
    if (j.contains("formats")) {
      spec.want_csv = spec.want_json = false;
      for (const auto& f : j.at("formats")) {
        if (f.get<std::string>() == "csv") spec.want_csv = true;
        if (f.get<std::string>() == "json") spec.want_json = true;
      }
    }
    if (j.contains("rate")) {
      const json& rj = j.at("rate");
      spec.rate.s = get_or(rj, "s", 1.0);
      spec.rate.p = get_or(rj, "p", 2.0);
      spec.rate.q = get_or(rj, "q", 2.0);
      spec.rate.r = get_or(rj, "r", 2.0);
      const std::string reg = get_or<std::string>(rj, "privacy", "auto");
      if (reg == "private") {
        spec.rate.privacy = PrivacyRegime::kPrivate;
      } else if (reg == "nonprivate") {
        spec.rate.privacy = PrivacyRegime::kNonprivate;
      } else {
        spec.rate.privacy =
            spec.alpha >= 1e5 ? PrivacyRegime::kNonprivate : PrivacyRegime::kPrivate;
      }
    } else {
      spec.rate.r = spec.estimator.r;
      spec.rate.privacy =
          spec.alpha >= 1e5 ? PrivacyRegime::kNonprivate : PrivacyRegime::kPrivate;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("spec: ") + e.what());
  }

  for (std::size_t i = 1; i < spec.n_grid.size(); ++i) {
    if (spec.n_grid[i] <= spec.n_grid[i - 1]) {
      throw ConfigError("spec: n_grid must be strictly increasing");
    }
  }
  if (std::abs(spec.estimator.nu - spec.nu) > 1e-12) {
    throw ConfigError("spec: mechanism and estimator nu must agree");
  }
  return spec;
}

std::uint64_t spec_digest(const ExperimentSpec& spec, std::uint64_t seed) {
  const std::string canon = spec.raw.dump() + "#seed=" + std::to_string(seed);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Density build_density(const ExperimentSpec& spec,
                      const std::shared_ptr<const WaveletBasis>& basis) {
  if (spec.density_kind == "uniform01") return make_uniform01();
  const ReferenceDensity ref =
      make_reference_density(spec.support_T, spec.c0, spec.flat_lo, spec.flat_hi);
  if (spec.density_kind == "reference") return ref.density;
  if (spec.density_kind == "spike") {
    const auto shifts =
        disjoint_support_shifts(*basis, spec.spike_level, spec.flat_lo, spec.flat_hi);
    std::vector<int> theta = spec.spike_theta;
    theta.resize(shifts.size(), 0);
    double gamma = spec.spike_gamma;
    if (gamma <= 0.0) {
      gamma = 0.8 * spec.c0 / (std::exp2(0.5 * spec.spike_level) * basis->sup_mother());
    }
    return make_hypothesis_density(ref, basis, spec.spike_level, theta, gamma);
  }
  throw ConfigError("spec: unknown density kind '" + spec.density_kind + "'");
}

MechanismConfig build_mechanism(const ExperimentSpec& spec,
                                std::shared_ptr<const WaveletBasis> basis,
                                std::size_t n) {
  MechanismConfig config;
  config.variant = spec.variant;
  config.alpha = spec.alpha;
  config.nu = spec.nu;
  config.basis = std::move(basis);
  config.support_T = spec.support_T;
  if (spec.j0 && spec.j1) {
    config.j0 = *spec.j0;
    config.j1 = *spec.j1;
  } else if (spec.estimator.mode == EstimatorMode::kLinear) {
    config.j0 = spec.j0.value_or(0);
    config.j1 = choose_linear_level(n, spec.alpha, spec.estimator.s);
  } else {
    const auto [j0, j1] = choose_adaptive_levels(n, spec.alpha, spec.estimator.regularity_N);
    config.j0 = spec.j0.value_or(j0);
    config.j1 = spec.j1.value_or(j1);
  }
  return config;
}

fs::path run_dir(const ExperimentSpec& spec, std::uint64_t seed) {
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(spec_digest(spec, seed)));
  fs::path dir = fs::path(spec.outputs) / hex;
  fs::create_directories(dir);
  return dir;
}

struct GlobalOptions {
  std::string spec_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int threads = 2;
  std::optional<std::string> format;
  std::string records_path;  // estimate only
};

ExperimentSpec load_spec(GlobalOptions& opt) {
  std::ifstream in(opt.spec_path);
  if (!in) throw ConfigError("cannot open spec file '" + opt.spec_path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("spec parse: ") + e.what());
  }
  ExperimentSpec spec = parse_spec(j);
  if (opt.seed) spec.master_seed = *opt.seed;
  if (opt.out) spec.outputs = *opt.out;
  if (opt.format) {
    spec.want_csv = *opt.format == "csv";
    spec.want_json = *opt.format == "json";
  }
  return spec;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

int cmd_privatize(GlobalOptions& opt) {
  const ExperimentSpec spec = load_spec(opt);
  const auto basis =
      std::make_shared<const WaveletBasis>(WaveletBasis::build(spec.family, spec.depth));
  const Density truth = build_density(spec, basis);
  const std::size_t n = spec.n_grid.front();
  const MechanismConfig mech = build_mechanism(spec, basis, n);
  const SlotLayout layout = SlotLayout::make(mech);

  const std::uint64_t rep_seed = rng::derive(
      rng::derive(spec.master_seed, static_cast<std::uint64_t>(rng::kTagReplication)),
      std::uint64_t{0});
  const std::vector<double> xs =
      truth.sample(n, rng::derive(rep_seed, static_cast<std::uint64_t>(rng::kTagSample)));

  const fs::path dir = run_dir(spec, spec.master_seed);
  std::ostringstream buf;
  write_records_csv(buf, mech, layout, xs,
                    rng::derive(rep_seed, static_cast<std::uint64_t>(rng::kTagNoise)));
  write_text(dir / "records.csv", buf.str());
  std::cout << (dir / "records.csv").string() << "\n";
  return kOk;
}

int cmd_estimate(GlobalOptions& opt) {
  const ExperimentSpec spec = load_spec(opt);
  if (opt.records_path.empty()) throw ConfigError("estimate: --records is required");
  std::ifstream in(opt.records_path);
  if (!in) throw ConfigError("estimate: cannot open '" + opt.records_path + "'");
  const RecordBatch batch = read_records_csv(in);

  // digest check: rebuild the canonical header from the parsed fields
  {
    const auto basis = std::make_shared<const WaveletBasis>(
        WaveletBasis::build(wavelet_family_from_string(batch.family), batch.depth));
    MechanismConfig check;
    check.variant = batch.variant;
    check.alpha = batch.alpha;
    check.j0 = batch.j0;
    check.j1 = batch.j1;
    check.nu = batch.nu;
    check.basis = basis;
    check.support_T = batch.support_T;
    if (check.digest() != batch.digest) {
      throw DigestError("estimate: records digest mismatch");
    }
  }
  if (spec.estimator.mode == EstimatorMode::kAdaptive &&
      std::abs(batch.nu - spec.estimator.nu) > 1e-12) {
    throw DigestError("estimate: records nu does not match requested estimator nu");
  }

  const auto basis = std::make_shared<const WaveletBasis>(
      WaveletBasis::build(wavelet_family_from_string(batch.family), batch.depth));
  const CoefficientSet coeffs = empirical_coefficients(batch);

  EstimatorConfig est = spec.estimator;
  est.n = batch.n_records;
  est.alpha = batch.alpha;
  DensityEstimate estimate =
      est.mode == EstimatorMode::kLinear
          ? linear_estimate(coeffs, basis, batch.j1, batch.variant)
          : adaptive_estimate(coeffs, basis, est, batch.nu);

  const fs::path dir = run_dir(spec, spec.master_seed);
  if (spec.want_json) {
    write_text(dir / "estimate.json", estimate_to_json(estimate).dump(2) + "\n");
  }
  if (spec.want_csv) {
    const long cells = 1l << 10;
    const double T = batch.support_T;
    const double h = 2.0 * T / static_cast<double>(cells);
    std::ostringstream grid;
    grid << "x,fhat\n";
    char line[96];
    for (long g = 0; g <= cells; ++g) {
      const double x = -T + h * static_cast<double>(g);
      std::snprintf(line, sizeof(line), "%.17g,%.17g\n", x, estimate.eval(x));
      grid << line;
    }
    write_text(dir / "estimate_grid.csv", grid.str());
  }
  std::cout << (dir / "estimate.json").string() << "\n";
  return kOk;
}

int cmd_audit(GlobalOptions& opt, double grid_step) {
  const ExperimentSpec spec = load_spec(opt);
  const auto basis =
      std::make_shared<const WaveletBasis>(WaveletBasis::build(spec.family, spec.depth));
  const MechanismConfig mech = build_mechanism(spec, basis, spec.n_grid.front());
  const AuditReport report = audit_sweep(mech, grid_step, opt.threads);

  json j;
  j["alpha"] = report.alpha;
  j["max_log_ratio"] = report.max_log_ratio;
  j["arg_x"] = report.arg_x;
  j["arg_xp"] = report.arg_xp;
  j["max_father_term"] = report.max_father_term;
  j["max_mother_term"] = report.max_mother_term;
  j["grid_step"] = report.grid_step;
  j["pass"] = report.pass;
  j["mechanism"] = mech.digest_string();

  const fs::path dir = run_dir(spec, spec.master_seed);
  write_text(dir / "audit.json", j.dump(2) + "\n");
  std::cout << (dir / "audit.json").string() << "\n";
  return report.pass ? kOk : kAuditFailure;
}

int cmd_rate_study(GlobalOptions& opt) {
  const ExperimentSpec spec = load_spec(opt);
  const auto basis =
      std::make_shared<const WaveletBasis>(WaveletBasis::build(spec.family, spec.depth));
  const Density truth = build_density(spec, basis);

  Scenario scenario;
  scenario.id = spec.density_kind + "_" + to_string(spec.family) + "_" +
                to_string(spec.estimator.mode);
  scenario.variant = spec.variant;
  scenario.alpha = spec.alpha;
  scenario.nu = spec.nu;
  scenario.basis = basis;
  scenario.estimator = spec.estimator;
  if (spec.j0 && spec.j1) {
    scenario.auto_levels = false;
    scenario.j0 = *spec.j0;
    scenario.j1 = *spec.j1;
  }

  const RateStudy study = rate_study(truth, scenario, spec.rate, spec.n_grid, spec.reps,
                                     spec.master_seed, opt.threads);

  const fs::path dir = run_dir(spec, spec.master_seed);
  if (spec.want_json) write_text(dir / "rate_study.json", study.to_json().dump(2) + "\n");
  if (spec.want_csv) {
    std::ostringstream rows, fit;
    study.write_csv(rows, fit);
    write_text(dir / "rate_study.csv", rows.str());
    write_text(dir / "fit_points.csv", fit.str());
  }
  std::cout << (dir / "rate_study.json").string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"locally private wavelet density estimation"};
  app.require_subcommand(1);

  GlobalOptions opt;
  app.add_option("--spec", opt.spec_path, "experiment spec (JSON)")->required();
  std::uint64_t seed_val = 0;
  auto* seed_opt = app.add_option("--seed", seed_val, "master seed override");
  std::string out_val;
  auto* out_opt = app.add_option("--out", out_val, "output directory override");
  app.add_option("--threads", opt.threads, "worker threads")->default_val(2);
  std::string format_val;
  auto* format_opt = app.add_option("--format", format_val, "csv|json only");

  auto* privatize = app.add_subcommand("privatize", "sample data and write a record batch");
  auto* estimate = app.add_subcommand("estimate", "reconstruct a density from records");
  estimate->add_option("--records", opt.records_path, "record batch CSV")->required();
  auto* audit = app.add_subcommand("audit", "sweep the privacy log-ratio bound");
  double grid_step = 0.0;
  audit->add_option("--grid-step", grid_step, "audit grid step (default 2^-(depth-2))");
  auto* rate = app.add_subcommand("rate-study", "risk-vs-n study with exponent fit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*seed_opt) opt.seed = seed_val;
  if (*out_opt) opt.out = out_val;
  if (*format_opt) opt.format = format_val;

  try {
    if (*privatize) return cmd_privatize(opt);
    if (*estimate) return cmd_estimate(opt);
    if (*audit) return cmd_audit(opt, grid_step);
    if (*rate) return cmd_rate_study(opt);
  } catch (const DigestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDigestMismatch;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kGenericError;
  }
  return kConfigError;
}
