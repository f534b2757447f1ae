#include "privwave/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace privwave {
namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double padded_sup_father(const WaveletBasis& basis) {
  return basis.sup_father() * kSupSafety;
}
double padded_sup_mother(const WaveletBasis& basis) {
  return basis.sup_mother() * kSupSafety;
}

double mother_sigma(const MechanismConfig& c, int j) {
  const double base =
      4.0 * c.basis->overlap_count_cA() * padded_sup_mother(*c.basis) / c.alpha;
  if (c.variant == Mechanism::kOne) {
    const double root2 = std::sqrt(2.0);
    return base * (root2 / (root2 - 1.0)) * std::exp2(0.5 * c.j1);
  }
  const double jv = static_cast<double>(std::max(j, 1));
  return base * ((2.0 * c.nu - 1.0) / (c.nu - 1.0)) * std::pow(jv, c.nu) *
         std::exp2(0.5 * j);
}

double father_sigma(const MechanismConfig& c) {
  return 4.0 * c.basis->overlap_count_cA() * padded_sup_father(*c.basis) / c.alpha *
         std::exp2(0.5 * c.j0);
}

}  // namespace

std::string to_string(Mechanism variant) {
  return variant == Mechanism::kOne ? "mech1" : "mech2";
}

Mechanism mechanism_from_string(std::string_view name) {
  if (name == "mech1" || name == "1") return Mechanism::kOne;
  if (name == "mech2" || name == "2") return Mechanism::kTwo;
  throw std::invalid_argument("mechanism: unknown variant '" + std::string(name) + "'");
}

void MechanismConfig::validate() const {
  if (!basis) throw std::invalid_argument("mechanism: basis is required");
  if (alpha <= 0.0) throw std::invalid_argument("mechanism: alpha must be positive");
  if (j0 < 0 || j1 < j0) throw std::invalid_argument("mechanism: need 0 <= j0 <= j1");
  if (variant == Mechanism::kTwo && nu <= 1.0) {
    throw std::invalid_argument("mechanism: mechanism two needs nu > 1");
  }
  if (support_T <= 0.0) throw std::invalid_argument("mechanism: support_T must be positive");
}

std::string MechanismConfig::digest_string() const {
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "variant=%s family=%s depth=%d alpha=%.17g j0=%d j1=%d nu=%.17g T=%.17g",
                to_string(variant).c_str(), to_string(basis->family()).c_str(),
                basis->depth(), alpha, j0, j1, nu, support_T);
  return buf;
}

std::uint64_t MechanismConfig::digest() const { return fnv1a64(digest_string()); }

SlotLayout SlotLayout::make(const MechanismConfig& config) {
  config.validate();
  SlotLayout layout;
  std::size_t offset = 0;

  SlotLayout::Row father;
  father.j = config.j0 - 1;
  father.father = true;
  father.sigma = father_sigma(config);
  father.scale = std::exp2(0.5 * config.j0);
  father.ks = config.basis->active_shifts(WaveletBasis::Kind::kFather, config.j0,
                                          -config.support_T, config.support_T);
  father.offset = offset;
  offset += static_cast<std::size_t>(father.ks.count());
  layout.rows.push_back(father);

  for (int j = config.j0; j <= config.j1; ++j) {
    SlotLayout::Row row;
    row.j = j;
    row.father = false;
    row.sigma = mother_sigma(config, j);
    row.scale = std::exp2(0.5 * j);
    row.ks = config.basis->active_shifts(WaveletBasis::Kind::kMother, j,
                                         -config.support_T, config.support_T);
    row.offset = offset;
    offset += static_cast<std::size_t>(row.ks.count());
    layout.rows.push_back(row);
  }
  layout.total_slots = offset;
  return layout;
}

std::vector<double> noise_scales(const MechanismConfig& config) {
  config.validate();
  std::vector<double> sigmas;
  sigmas.push_back(father_sigma(config));
  for (int j = config.j0; j <= config.j1; ++j) sigmas.push_back(mother_sigma(config, j));
  return sigmas;
}

double laplace_sample(double scale, rng::Stream& stream) {
  if (scale <= 0.0) throw std::invalid_argument("laplace_sample: scale must be positive");
  return stream.next_laplace(scale);
}

void privatize_into(double x, const MechanismConfig& config, const SlotLayout& layout,
                    std::uint64_t record_key, std::span<double> out) {
  const WaveletBasis& basis = *config.basis;
  for (const SlotLayout::Row& row : layout.rows) {
    const int level = row.father ? config.j0 : row.j;
    const std::uint64_t row_key =
        rng::derive(record_key, static_cast<std::uint64_t>(row.father ? config.j0
                                                                      : row.j + 1));
    double* slot = out.data() + row.offset;
    for (long k = row.ks.k_min; k <= row.ks.k_max; ++k) {
      const double u = rng::symmetric_uniform(
          rng::derive_signed(row_key, static_cast<std::int64_t>(k)));
      slot[k - row.ks.k_min] = rng::laplace_from_uniform(u, row.sigma);
    }
    const auto kind = row.father ? WaveletBasis::Kind::kFather : WaveletBasis::Kind::kMother;
    const ShiftRange win = basis.nonzero_window(level, x);
    const long k_lo = std::max(win.k_min, row.ks.k_min);
    const long k_hi = std::min(win.k_max, row.ks.k_max);
    for (long k = k_lo; k <= k_hi; ++k) {
      slot[k - row.ks.k_min] += basis.eval_scaled(kind, level, k, x);
    }
  }
}

std::vector<double> privatize(double x, const MechanismConfig& config,
                              const SlotLayout& layout, std::uint64_t record_key) {
  std::vector<double> out(layout.total_slots);
  privatize_into(x, config, layout, record_key, out);
  return out;
}

double audit_privacy(const MechanismConfig& config, double x, double xp) {
  config.validate();
  const WaveletBasis& basis = *config.basis;
  const SlotLayout layout = SlotLayout::make(config);
  double total = 0.0;
  for (const SlotLayout::Row& row : layout.rows) {
    const int level = row.father ? config.j0 : row.j;
    const auto kind = row.father ? WaveletBasis::Kind::kFather : WaveletBasis::Kind::kMother;
    const ShiftRange wa = basis.nonzero_window(level, x);
    const ShiftRange wb = basis.nonzero_window(level, xp);
    const long k_lo = std::max(std::min(wa.k_min, wb.k_min), row.ks.k_min);
    const long k_hi = std::min(std::max(wa.k_max, wb.k_max), row.ks.k_max);
    double acc = 0.0;
    for (long k = k_lo; k <= k_hi; ++k) {
      acc += std::abs(basis.eval_scaled(kind, level, k, x) -
                      basis.eval_scaled(kind, level, k, xp));
    }
    total += acc / row.sigma;
  }
  return total;
}

namespace {

// Per-row grid precomputation for the sweep: fixed-width windows of basis
// values, the window base shift, and the absolute row sum per point.
struct RowTable {
  long width = 0;
  double inv_sigma = 0.0;
  bool father = false;
  std::vector<long> kbase;    // per grid point
  std::vector<double> vals;   // per grid point, width entries
  std::vector<double> sums;   // sum of |vals| per grid point
};

double row_pair_term(const RowTable& row, long g1, long g2) {
  const long ka = row.kbase[g1], kb = row.kbase[g2];
  if (std::labs(ka - kb) >= row.width) return row.sums[g1] + row.sums[g2];
  const long lo = std::min(ka, kb), hi = std::max(ka, kb) + row.width - 1;
  const double* va = row.vals.data() + g1 * row.width;
  const double* vb = row.vals.data() + g2 * row.width;
  double acc = 0.0;
  for (long k = lo; k <= hi; ++k) {
    const double a = (k >= ka && k < ka + row.width) ? va[k - ka] : 0.0;
    const double b = (k >= kb && k < kb + row.width) ? vb[k - kb] : 0.0;
    acc += std::abs(a - b);
  }
  return acc;
}

}  // namespace

AuditReport audit_sweep(const MechanismConfig& config, double step, int threads) {
  config.validate();
  const WaveletBasis& basis = *config.basis;
  if (step <= 0.0) step = std::ldexp(1.0, -(basis.depth() - 2));
  const double T = config.support_T;
  const long grid_n = std::lround(2.0 * T / step);
  const long points = grid_n + 1;

  const SlotLayout layout = SlotLayout::make(config);
  const auto [sa, sb] = basis.support(WaveletBasis::Kind::kFather);

  std::vector<RowTable> rows(layout.rows.size());
  for (std::size_t r = 0; r < layout.rows.size(); ++r) {
    const SlotLayout::Row& lr = layout.rows[r];
    const int level = lr.father ? config.j0 : lr.j;
    const auto kind =
        lr.father ? WaveletBasis::Kind::kFather : WaveletBasis::Kind::kMother;
    RowTable& rt = rows[r];
    rt.width = static_cast<long>(std::ceil(sb - sa)) + 1;
    rt.inv_sigma = 1.0 / lr.sigma;
    rt.father = lr.father;
    rt.kbase.resize(points);
    rt.vals.assign(static_cast<std::size_t>(points) * rt.width, 0.0);
    rt.sums.assign(points, 0.0);
    for (long g = 0; g < points; ++g) {
      const double x = -T + step * static_cast<double>(g);
      const ShiftRange win = basis.nonzero_window(level, x);
      rt.kbase[g] = win.k_min;
      double s = 0.0;
      for (long k = win.k_min; k <= win.k_max && k - win.k_min < rt.width; ++k) {
        const double v = lr.ks.contains(k) ? basis.eval_scaled(kind, level, k, x) : 0.0;
        rt.vals[static_cast<std::size_t>(g) * rt.width + (k - win.k_min)] = v;
        s += std::abs(v);
      }
      rt.sums[g] = s;
    }
  }

  struct Best {
    double value = -1.0;
    long g1 = 0, g2 = 0;        // lexicographically smallest argmax pair
    double max_father = 0.0;    // budget-split maxima, tracked independently
    double max_mother = 0.0;
  };

  const int n_threads = std::max(1, threads);
  std::vector<Best> best(n_threads);
  auto worker = [&](int tid) {
    Best local;
    for (long g1 = tid; g1 < points; g1 += n_threads) {
      for (long g2 = g1; g2 < points; ++g2) {
        double father_term = 0.0, mother_term = 0.0;
        for (const RowTable& rt : rows) {
          const double term = row_pair_term(rt, g1, g2) * rt.inv_sigma;
          (rt.father ? father_term : mother_term) += term;
        }
        const double d = father_term + mother_term;
        if (d > local.value ||
            (d == local.value && std::pair{g1, g2} < std::pair{local.g1, local.g2})) {
          local.value = d;
          local.g1 = g1;
          local.g2 = g2;
        }
        local.max_father = std::max(local.max_father, father_term);
        local.max_mother = std::max(local.max_mother, mother_term);
      }
    }
    best[tid] = local;
  };

  if (n_threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }

  Best merged;
  for (const Best& b : best) {
    if (b.value > merged.value ||
        (b.value == merged.value && std::pair{b.g1, b.g2} < std::pair{merged.g1, merged.g2})) {
      merged.value = b.value;
      merged.g1 = b.g1;
      merged.g2 = b.g2;
    }
    merged.max_father = std::max(merged.max_father, b.max_father);
    merged.max_mother = std::max(merged.max_mother, b.max_mother);
  }

  AuditReport report;
  report.max_log_ratio = merged.value;
  report.arg_x = -T + step * static_cast<double>(merged.g1);
  report.arg_xp = -T + step * static_cast<double>(merged.g2);
  report.max_father_term = merged.max_father;
  report.max_mother_term = merged.max_mother;
  report.grid_step = step;
  report.alpha = config.alpha;
  report.pass = merged.value <= config.alpha + 1e-9;
  return report;
}

void write_records_csv(std::ostream& out, const MechanismConfig& config,
                       const SlotLayout& layout, std::span<const double> xs,
                       std::uint64_t noise_root) {
  char buf[64];
  out << "# privwave-records v1\n";
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config.digest()));
  out << "# digest=" << buf << "\n";
  out << "# " << config.digest_string() << " n=" << xs.size() << "\n";
  out << "record_id,j,k,z\n";

  std::vector<double> slots(layout.total_slots);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    privatize_into(xs[i], config, layout, rng::derive(noise_root, static_cast<std::uint64_t>(i)),
                   slots);
    for (const SlotLayout::Row& row : layout.rows) {
      for (long k = row.ks.k_min; k <= row.ks.k_max; ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", slots[row.offset + (k - row.ks.k_min)]);
        out << i << ',' << row.j << ',' << k << ',' << buf << '\n';
      }
    }
  }
}

RecordBatch read_records_csv(std::istream& in) {
  RecordBatch batch;
  std::string line;
  bool have_header = false;
  std::string digest_hex;

  // header comments
  while (in.peek() == '#') {
    std::getline(in, line);
    if (line.rfind("# digest=", 0) == 0) {
      digest_hex = line.substr(9);
    } else if (line.rfind("# variant=", 0) == 0) {
      std::istringstream ss(line.substr(2));
      std::string tok;
      while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "variant") batch.variant = mechanism_from_string(val);
        else if (key == "family") batch.family = val;
        else if (key == "depth") batch.depth = std::stoi(val);
        else if (key == "alpha") batch.alpha = std::stod(val);
        else if (key == "j0") batch.j0 = std::stoi(val);
        else if (key == "j1") batch.j1 = std::stoi(val);
        else if (key == "nu") batch.nu = std::stod(val);
        else if (key == "T") batch.support_T = std::stod(val);
        else if (key == "n") batch.n_records = std::stoul(val);
      }
      have_header = true;
    }
  }
  if (!have_header || digest_hex.empty()) {
    throw std::runtime_error("records: missing header");
  }
  batch.digest = std::stoull(digest_hex, nullptr, 16);

  std::getline(in, line);  // column names
  if (line != "record_id,j,k,z") throw std::runtime_error("records: bad column header");

  // pass 1 within memory: parse all rows
  struct RawRow { std::size_t id; int j; long k; double z; };
  std::vector<RawRow> raw;
  raw.reserve(1024);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RawRow r;
    if (std::sscanf(line.c_str(), "%zu,%d,%ld,%lf", &r.id, &r.j, &r.k, &r.z) != 4) {
      throw std::runtime_error("records: malformed row '" + line + "'");
    }
    raw.push_back(r);
  }
  if (raw.empty()) throw std::runtime_error("records: empty batch");

  // reconstruct the layout ranges from the observed keys
  std::vector<ShiftRange> ranges(batch.j1 - batch.j0 + 2);
  auto range_index = [&](int j) { return static_cast<std::size_t>(j - (batch.j0 - 1)); };
  std::vector<bool> seen(ranges.size(), false);
  for (const RawRow& r : raw) {
    if (r.j < batch.j0 - 1 || r.j > batch.j1) {
      throw std::runtime_error("records: level outside header range");
    }
    ShiftRange& range = ranges[range_index(r.j)];
    if (!seen[range_index(r.j)]) {
      range.k_min = range.k_max = r.k;
      seen[range_index(r.j)] = true;
    } else {
      range.k_min = std::min(range.k_min, r.k);
      range.k_max = std::max(range.k_max, r.k);
    }
  }

  std::size_t offset = 0;
  for (int j = batch.j0 - 1; j <= batch.j1; ++j) {
    SlotLayout::Row row;
    row.j = j;
    row.father = j == batch.j0 - 1;
    row.sigma = 0.0;  // not carried by the file
    row.scale = std::exp2(0.5 * (row.father ? batch.j0 : j));
    row.ks = ranges[range_index(j)];
    row.offset = offset;
    offset += static_cast<std::size_t>(row.ks.count());
    batch.layout.rows.push_back(row);
  }
  batch.layout.total_slots = offset;

  const std::size_t n = batch.n_records;
  batch.slots.assign(n * offset, 0.0);
  for (const RawRow& r : raw) {
    if (r.id >= n) throw std::runtime_error("records: record_id exceeds header n");
    const SlotLayout::Row& row = batch.layout.rows[range_index(r.j)];
    batch.slots[r.id * offset + row.offset + (r.k - row.ks.k_min)] = r.z;
  }
  return batch;
}

}  // namespace privwave
