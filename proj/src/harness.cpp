#include "ktlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ktlab/classical.hpp"
#include "ktlab/ed.hpp"

namespace ktlab {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view text, const std::string& key) {
  const std::string t = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw std::invalid_argument("manifest: bad number for " + key + ": '" + t + "'");
  }
  return value;
}

long long parse_int(std::string_view text, const std::string& key) {
  const std::string t = trim(text);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw std::invalid_argument("manifest: bad integer for " + key + ": '" + t + "'");
  }
  return value;
}

std::string join_doubles(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += format_double(xs[i]);
  }
  return out;
}

std::string format_M(double M) { return M > 0.0 ? format_double(M) : "auto"; }

// Parameter lines in canonical order; shared by the file format and the hash.
std::vector<std::pair<std::string, std::string>> parameter_lines(const RunManifest& m) {
  return {
      {"schema_version", std::to_string(m.schema_version)},
      {"dim", std::to_string(m.dim)},
      {"size", std::to_string(m.size)},
      {"seeds", format_seed_list(m.seeds)},
      {"distribution", to_string(m.distribution)},
      {"J0", format_double(m.J0)},
      {"J", format_double(m.J)},
      {"h", join_doubles(m.h)},
      {"w_max", std::to_string(m.w_max)},
      {"k_max", std::to_string(m.k_max)},
      {"M", format_M(m.M)},
      {"tol", format_double(m.tol)},
      {"max_iter", std::to_string(m.max_iter)},
      {"beta", format_double(m.beta)},
  };
}

std::string opt(const std::optional<double>& x) { return x ? format_double(*x) : ""; }

std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

struct SeedData {
  DisorderSample dis;
  ClassicalGroundState gs;
  std::string error;
};

std::vector<SeedData> solve_seeds(const Lattice& lat, const RunManifest& m) {
  std::vector<SeedData> out(m.seeds.size());
  parallel_for(out.size(), [&](std::size_t i) {
    try {
      out[i].dis = sample_disorder(lat, m.seeds[i], m.distribution, m.J0, m.J);
      out[i].gs = solve_classical(lat, out[i].dis);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  });
  return out;
}

// E = const - σ Ĵ for the lone interior spin; the two levels are const ∓ √(Ĵ² + h²).
double two_level_energy(const Lattice& lat, const DisorderSample& dis, double h) {
  double constant = 0.0, jhat = 0.0;
  for (int b = 0; b < lat.num_bonds(); ++b) {
    if (lat.bond(b).kind == BondKind::FrozenFrozen) {
      constant -= dis[b];
    } else {
      jhat += dis[b];
    }
  }
  return constant - std::sqrt(jhat * jhat + h * h);
}

struct KtOutcome {
  CellStatus status = CellStatus::Ok;
  std::string message;
  std::optional<FixedPointResult> result;
  int iterations = 0;
  std::optional<double> lipschitz;
  std::optional<double> norm_g;
};

KtOutcome run_kt(const Lattice& lat, const SeedData& sd, double h, const RunManifest& m) {
  KtOutcome out;
  if (!sd.error.empty()) {
    out.status = CellStatus::Error;
    out.message = sd.error;
    return out;
  }
  if (!sd.gs.unique) {
    out.status = CellStatus::Degenerate;
    out.message = "classical ground state is degenerate";
    return out;
  }
  const SolverConfig cfg = m.solver_config();
  try {
    auto problem = make_problem(lat, sd.dis, sd.gs, h, cfg);
    out.result = solve_fixed_point(problem, cfg);
    out.iterations = out.result->diagnostics.iterations;
    out.lipschitz = out.result->diagnostics.empirical_lipschitz;
    out.norm_g = out.result->diagnostics.norm_g;
  } catch (const NonConvergenceError& e) {
    out.status = CellStatus::NonConverged;
    out.message = e.what();
    out.iterations = e.diagnostics().iterations;
    out.lipschitz = e.diagnostics().empirical_lipschitz;
  } catch (const PreconditionError& e) {
    out.status = CellStatus::Precondition;
    out.message = e.what();
  } catch (const DegenerateGroundStateError& e) {
    out.status = CellStatus::Degenerate;
    out.message = e.what();
  } catch (const std::exception& e) {
    out.status = CellStatus::Error;
    out.message = e.what();
  }
  return out;
}

constexpr int kEdMaxInterior = 22;
constexpr int kAmplitudeMaxInterior = 20;
// Central-difference step in J_b and the tolerance for the derivative identity.
constexpr double kCouplingStep = 1e-5;
constexpr double kIdentityTolerance = 1e-7;

double thermal_tolerance(int n, double beta, double gap) {
  // Excited-state weight is at most (2^n - 1) e^{-β gap}.
  return std::max(1e-6, 4.0 * std::ldexp(std::exp(-beta * gap), n));
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace

SolverConfig RunManifest::solver_config() const {
  SolverConfig cfg;
  cfg.M = M;
  cfg.w_max = w_max;
  cfg.k_max = k_max;
  cfg.tol = tol;
  cfg.max_iter = max_iter;
  return cfg;
}

void validate(const RunManifest& m) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("manifest: " + what); };
  if (m.schema_version != kManifestSchemaVersion) {
    fail("unsupported schema_version " + std::to_string(m.schema_version));
  }
  if (m.dim < 1) fail("dim must be >= 1");
  if (m.size != 3 && (m.size < 4 || m.size % 2 != 0)) fail("size must be 3 or an even number >= 4");
  if (m.seeds.empty()) fail("seed list is empty");
  if (!(m.J > 0.0)) fail("J must be > 0");
  if (m.h.empty()) fail("h list is empty");
  for (double h : m.h) {
    if (!std::isfinite(h)) fail("h must be finite");
  }
  if (m.w_max < 1) fail("w_max must be >= 1");
  if (m.k_max < 2) fail("k_max must be >= 2");
  if (m.M < 0.0 || !std::isfinite(m.M)) fail("M must be 'auto' or a positive number");
  if (!(m.tol > 0.0)) fail("tol must be > 0");
  if (m.max_iter < 1) fail("max_iter must be >= 1");
  if (!(m.beta > 0.0)) fail("beta must be > 0");
}

void write_manifest(std::ostream& os, const RunManifest& m) {
  for (const auto& [key, value] : parameter_lines(m)) os << key << " = " << value << '\n';
  os << "out = " << m.out << '\n';
  os << "timestamp = " << m.timestamp << '\n';
}

RunManifest read_manifest(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("manifest line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (!kv.emplace(key, trim(std::string_view(t).substr(eq + 1))).second) {
      throw std::invalid_argument("manifest: duplicate key " + key);
    }
  }

  RunManifest m;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  if (auto v = take("schema_version")) m.schema_version = static_cast<int>(parse_int(*v, "schema_version"));
  if (auto v = take("dim")) m.dim = static_cast<int>(parse_int(*v, "dim"));
  if (auto v = take("size")) m.size = static_cast<int>(parse_int(*v, "size"));
  if (auto v = take("seeds")) m.seeds = parse_seed_list(*v);
  if (auto v = take("distribution")) m.distribution = parse_distribution(*v);
  if (auto v = take("J0")) m.J0 = parse_double(*v, "J0");
  if (auto v = take("J")) m.J = parse_double(*v, "J");
  if (auto v = take("h")) {
    m.h.clear();
    for (const std::string& part : split(*v, ',')) m.h.push_back(parse_double(part, "h"));
  }
  if (auto v = take("w_max")) m.w_max = static_cast<int>(parse_int(*v, "w_max"));
  if (auto v = take("k_max")) m.k_max = static_cast<int>(parse_int(*v, "k_max"));
  if (auto v = take("M")) m.M = (*v == "auto") ? 0.0 : parse_double(*v, "M");
  if (auto v = take("tol")) m.tol = parse_double(*v, "tol");
  if (auto v = take("max_iter")) m.max_iter = static_cast<int>(parse_int(*v, "max_iter"));
  if (auto v = take("beta")) m.beta = parse_double(*v, "beta");
  if (auto v = take("out")) m.out = *v;
  if (auto v = take("timestamp")) m.timestamp = *v;
  if (!kv.empty()) throw std::invalid_argument("manifest: unknown key " + kv.begin()->first);
  validate(m);
  return m;
}

void save_manifest(const std::filesystem::path& path, const RunManifest& m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_manifest(os, m);
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return read_manifest(is);
}

void write_report_header(std::ostream& os, std::string_view title, const RunManifest& m) {
  os << "# ktlab " << title << '\n';
  std::ostringstream body;
  write_manifest(body, m);
  std::istringstream lines(body.str());
  for (std::string line; std::getline(lines, line);) os << "# " << line << '\n';
  os << "# manifest_hash = " << manifest_hash(m) << '\n';
}

std::string manifest_hash(const RunManifest& m) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const auto& [key, value] : parameter_lines(m)) {
    for (char c : key + "=" + value + "\n") {
      hash ^= static_cast<unsigned char>(c);
      hash *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> out;
  auto number = [&](const std::string& s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      throw std::invalid_argument("bad seed '" + s + "'");
    }
    return v;
  };
  for (const std::string& part : split(text, ',')) {
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(number(part));
      continue;
    }
    const std::uint64_t lo = number(trim(std::string_view(part).substr(0, dash)));
    const std::uint64_t hi = number(trim(std::string_view(part).substr(dash + 1)));
    if (hi < lo || hi - lo > 1'000'000) throw std::invalid_argument("bad seed range '" + part + "'");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
  }
  return out;
}

std::string format_seed_list(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  std::size_t i = 0;
  while (i < seeds.size()) {
    std::size_t j = i;
    while (j + 1 < seeds.size() && seeds[j + 1] == seeds[j] + 1) ++j;
    if (!out.empty()) out += ',';
    out += std::to_string(seeds[i]);
    if (j >= i + 2) {
      out += '-' + std::to_string(seeds[j]);
    } else if (j == i + 1) {
      out += ',' + std::to_string(seeds[j]);
    }
    i = j + 1;
  }
  return out;
}

Lattice manifest_lattice(const RunManifest& m) {
  return m.size == 3 ? single_site_lattice(m.dim) : build_lattice(m.dim, m.size);
}

std::string to_string(CellStatus s) {
  switch (s) {
    case CellStatus::Ok: return "ok";
    case CellStatus::NonConverged: return "nonconverged";
    case CellStatus::Degenerate: return "degenerate";
    case CellStatus::Precondition: return "precondition";
    case CellStatus::Error: return "error";
  }
  return "error";
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<CompareRow> run_compare(const RunManifest& m) {
  validate(m);
  const Lattice lat = manifest_lattice(m);
  const std::vector<SeedData> seeds = solve_seeds(lat, m);
  const std::size_t n_h = m.h.size();
  std::vector<CompareRow> rows(seeds.size() * n_h);

  parallel_for(rows.size(), [&](std::size_t cell) {
    const SeedData& sd = seeds[cell / n_h];
    CompareRow& row = rows[cell];
    row.seed = m.seeds[cell / n_h];
    row.h = m.h[cell % n_h];
    row.E_cl = sd.gs.E_cl;
    row.gap1 = sd.gs.gap1;
    if (lat.num_interior() == 1 && sd.error.empty()) {
      row.closed_form = two_level_energy(lat, sd.dis, row.h);
    }

    const KtOutcome kt = run_kt(lat, sd, row.h, m);
    row.status = kt.status;
    row.message = kt.message;
    row.iterations = kt.iterations;
    row.lipschitz = kt.lipschitz;
    row.norm_g = kt.norm_g;
    if (kt.result) row.E0_kt = kt.result->energy;

    if (sd.error.empty() && lat.num_interior() <= kEdMaxInterior) {
      try {
        const SpectralResult ed = ground_state_ed(build_hamiltonian(lat, sd.dis, row.h));
        row.E0_ed = ed.E0;
        row.ed_gap = ed.gap;
        if (kt.result && lat.num_interior() <= kAmplitudeMaxInterior) {
          row.overlap = overlap(ed, wavefunction_amplitudes(kt.result->state));
        }
      } catch (const std::exception& e) {
        if (row.status == CellStatus::Ok) row.status = CellStatus::Error;
        row.message += (row.message.empty() ? "" : "; ") + std::string("ED: ") + e.what();
      }
    }
    if (row.E0_kt && row.E0_ed) row.abs_error = std::abs(*row.E0_kt - *row.E0_ed);
  });
  return rows;
}

void write_compare_csv(std::ostream& os, const RunManifest& m,
                       const std::vector<CompareRow>& rows) {
  write_report_header(os, "compare", m);
  const std::string hash = manifest_hash(m);
  os << "manifest_hash,seed,h,status,E_cl,gap1,E0_kt,E0_ed,abs_error,overlap,iterations,"
        "norm_g,lipschitz,ed_gap,closed_form,message\n";
  for (const CompareRow& r : rows) {
    os << hash << ',' << r.seed << ',' << format_double(r.h) << ',' << to_string(r.status)
       << ',' << format_double(r.E_cl) << ',' << format_double(r.gap1) << ',' << opt(r.E0_kt)
       << ',' << opt(r.E0_ed) << ',' << opt(r.abs_error) << ',' << opt(r.overlap) << ','
       << r.iterations << ',' << opt(r.norm_g) << ',' << opt(r.lipschitz) << ','
       << opt(r.ed_gap) << ',' << opt(r.closed_form) << ',' << csv_safe(r.message) << '\n';
  }
}

SweepResult sweep_h(const RunManifest& m) {
  validate(m);
  for (std::size_t i = 1; i < m.h.size(); ++i) {
    if (!(m.h[i] > m.h[i - 1])) throw std::invalid_argument("sweep needs an ascending h grid");
  }
  const Lattice lat = manifest_lattice(m);
  const std::vector<SeedData> seeds = solve_seeds(lat, m);
  const std::size_t n_h = m.h.size();
  SweepResult out;
  out.cells.resize(seeds.size() * n_h);

  parallel_for(out.cells.size(), [&](std::size_t cell) {
    const SeedData& sd = seeds[cell / n_h];
    SweepCell& c = out.cells[cell];
    c.seed = m.seeds[cell / n_h];
    c.h = m.h[cell % n_h];
    const KtOutcome kt = run_kt(lat, sd, c.h, m);
    c.status = kt.status;
    c.iterations = kt.iterations;
    if (kt.result) c.E0_kt = kt.result->energy;
    if (sd.error.empty() && lat.num_interior() <= kEdMaxInterior) {
      try {
        c.ed_gap = ground_state_ed(build_hamiltonian(lat, sd.dis, c.h)).gap;
      } catch (const std::exception&) {
        // gap column left empty
      }
    }
  });

  for (std::size_t s = 0; s < seeds.size(); ++s) {
    SweepSeed summary;
    summary.seed = m.seeds[s];
    for (std::size_t k = 0; k < n_h; ++k) {
      const SweepCell& c = out.cells[s * n_h + k];
      if (c.status == CellStatus::Ok) {
        summary.largest_converged_h = c.h;
      } else if (!summary.first_failure_h) {
        summary.first_failure_h = c.h;
      }
    }
    out.seeds.push_back(summary);
  }
  return out;
}

void write_sweep_csv(std::ostream& os, const RunManifest& m, const SweepResult& r) {
  write_report_header(os, "sweep", m);
  const std::string hash = manifest_hash(m);
  const std::size_t n_h = m.h.size();
  os << "manifest_hash,seed,h,status,iterations,E0_kt,ed_gap,largest_converged_h,"
        "first_failure_h\n";
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const SweepCell& c = r.cells[i];
    const SweepSeed& s = r.seeds[i / n_h];
    os << hash << ',' << c.seed << ',' << format_double(c.h) << ',' << to_string(c.status)
       << ',' << c.iterations << ',' << opt(c.E0_kt) << ',' << opt(c.ed_gap) << ','
       << opt(s.largest_converged_h) << ',' << opt(s.first_failure_h) << '\n';
  }
}

bool VerifySummary::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckLine& c) { return c.passed; });
}

VerifySummary verify_suite(const RunManifest& m, const VerifyOptions& opts) {
  VerifySummary summary;
  auto add = [&](std::string name, bool ok, std::string detail) {
    summary.checks.push_back({std::move(name), ok, std::move(detail)});
  };
  try {
    validate(m);
  } catch (const std::exception& e) {
    add("manifest", false, e.what());
    return summary;
  }
  const Lattice lat = manifest_lattice(m);
  const int n = lat.num_interior();
  const bool desk = n <= opts.max_dense_interior;
  add("desk_scale", desk,
      std::to_string(n) + " interior spins (dense limit " +
          std::to_string(opts.max_dense_interior) + ")");

  const SolverConfig cfg = m.solver_config();
  for (double h : m.h) {
    const double hm = std::abs(h) * resolve_M(cfg, h);
    add("precondition h=" + format_double(h), hm <= 1.0,
        "|h|M = " + fmt(hm) + (hm <= 1.0 ? "" : " exceeds 1: precondition violated"));
  }

  const std::vector<SeedData> seeds = solve_seeds(lat, m);
  std::vector<std::vector<CheckLine>> per_seed(seeds.size());

  parallel_for(seeds.size(), [&](std::size_t si) {
    const SeedData& sd = seeds[si];
    auto& out = per_seed[si];
    const std::string tag = "seed " + std::to_string(m.seeds[si]) + " ";
    auto put = [&](const std::string& name, bool ok, std::string detail) {
      out.push_back({tag + name, ok, std::move(detail)});
    };
    if (!sd.error.empty()) {
      put("setup", false, sd.error);
      return;
    }
    const ClassicalGroundState& gs = sd.gs;
    put("uniqueness", gs.unique, "gap1 = " + fmt(gs.gap1));
    if (!gs.unique) return;

    // Positivity over the truncated key set.
    {
      double min_exc = std::numeric_limits<double>::infinity();
      std::size_t count = 0;
      for (SubsetKey x : enumerate_truncation(lat, m.w_max)) {
        min_exc = std::min(min_exc, excitation_energy(gs, sd.dis, lat, x));
        ++count;
      }
      put("positivity", count == 0 || min_exc > 0.0,
          std::to_string(count) + " sets, min excitation " + fmt(min_exc));
    }

    if (!desk) return;

    // Bond consistency at h = 0.
    try {
      const double tol = thermal_tolerance(n, m.beta, gs.gap1);
      const BondConsistencyReport r = verify_bond_consistency(lat, sd.dis, gs, m.beta, tol);
      put("bond_consistency", r.passed,
          std::to_string(r.plaquettes) + " plaquettes, " +
              std::to_string(r.plaquette_violations) + " violations, max |<s_b> - s+_b| = " +
              fmt(r.max_bond_deviation) + " (tol " + fmt(r.tolerance) + ")");
    } catch (const std::exception& e) {
      put("bond_consistency", false, e.what());
    }

    // Duhamel correlations: exponentially small at h = 0. For h != 0 they
    // decay only like 1/β, so the check is the derivative identity
    // (σ_b, f) - <σ_b><f> = β⁻¹ ∂<f>/∂J_b, by central differences in J_b.
    std::vector<double> betas = opts.lemma1_betas;
    betas.push_back(m.beta);
    std::vector<double> fields = {0.0};
    for (double h : m.h) {
      if (h != 0.0) fields.push_back(h);
    }
    for (double h : fields) {
      try {
        const FrozenHamiltonian hf = build_hamiltonian(lat, sd.dis, h);
        double worst_final = 0.0, worst_scaled = 0.0, worst_identity = 0.0;
        for (int b = 0; b < lat.num_bonds(); ++b) {
          const Bond& bond = lat.bond(b);
          if (bond.kind == BondKind::FrozenFrozen) continue;
          const int site = lat.is_interior(bond.i) ? bond.i : bond.j;
          const std::vector<Observable> observables = {bond_z(lat, b), site_z(lat, site)};
          std::optional<FullSpectrum> up, down;
          if (h != 0.0) {
            DisorderSample moved = sd.dis;
            moved.values[b] += kCouplingStep;
            up = full_spectrum(build_hamiltonian(lat, moved, h));
            moved.values[b] = sd.dis.values[b] - kCouplingStep;
            down = full_spectrum(build_hamiltonian(lat, moved, h));
          }
          for (const Observable& f : observables) {
            const std::vector<double> v = lemma1_check(hf, lat, b, f, betas);
            worst_final = std::max(worst_final, std::abs(v.back()));
            worst_scaled = std::max(worst_scaled, betas.back() * std::abs(v.back()));
            if (h == 0.0) continue;
            for (std::size_t k = 0; k < betas.size(); ++k) {
              const double derivative = (thermal_expectation(*up, f, betas[k]) -
                                         thermal_expectation(*down, f, betas[k])) /
                                        (2.0 * kCouplingStep);
              worst_identity = std::max(worst_identity, std::abs(v[k] - derivative / betas[k]));
            }
          }
        }
        if (h == 0.0) {
          const double tol = thermal_tolerance(n, m.beta, gs.gap1);
          put("correlation h=0", worst_final <= tol,
              "max |value| at beta=" + fmt(m.beta) + ": " + fmt(worst_final) + " (tol " +
                  fmt(tol) + ")");
        } else {
          put("correlation h=" + format_double(h), worst_identity <= kIdentityTolerance,
              "max |value - d<f>/dJ_b / beta| " + fmt(worst_identity) + " (tol " +
                  fmt(kIdentityTolerance) + "); max beta*|value| at beta=" + fmt(m.beta) + ": " +
                  fmt(worst_scaled));
        }
      } catch (const std::exception& e) {
        put("correlation h=" + format_double(h), false, e.what());
      }
    }

    // Contraction probes.
    for (double h : m.h) {
      if (h == 0.0) continue;
      const double M = resolve_M(cfg, h);
      if (std::abs(h) * M > 1.0) continue;
      try {
        auto problem = make_problem(lat, sd.dis, gs, h, cfg);
        const double delta = admissible_radius(M);
        int max_ends = 0;
        for (int b = 0; b < lat.num_bonds(); ++b) max_ends = std::max(max_ends, lat.flip_mask(b).size());
        const double f0 = kt_norm(apply_F(KTState::zero(problem), cfg), M);
        const double f0_expected = max_ends / M;
        put("F(0) norm h=" + format_double(h), std::abs(f0 - f0_expected) <= 1e-12 * f0_expected,
            "||F(0)|| M = " + fmt(f0 * M) + " (expected " + std::to_string(max_ends) + ")");

        std::mt19937_64 rng(m.seeds[si] * 0x9e3779b97f4a7c15ULL ^ std::hash<double>{}(h));
        double worst_ratio = 0.0, worst_ball = 0.0;
        for (int t = 0; t < opts.probes_per_cell; ++t) {
          const KTState a = random_admissible_state(problem, M, delta, rng);
          const KTState b = random_admissible_state(problem, M, delta, rng);
          worst_ratio = std::max(worst_ratio, contraction_check(a, b, cfg));
          worst_ball = std::max(worst_ball, kt_norm(apply_F(a, cfg), M) / delta);
          worst_ball = std::max(worst_ball, kt_norm(apply_F(b, cfg), M) / delta);
        }
        put("contraction h=" + format_double(h), worst_ratio <= 0.5 && worst_ball <= 1.0,
            std::to_string(opts.probes_per_cell) + " probe pairs, max ratio " + fmt(worst_ratio) +
                ", max ||F(g)||/delta " + fmt(worst_ball));
      } catch (const std::exception& e) {
        put("contraction h=" + format_double(h), false, e.what());
      }
    }
  });

  for (auto& lines : per_seed) {
    for (auto& line : lines) summary.checks.push_back(std::move(line));
  }
  return summary;
}

void write_verify_report(std::ostream& os, const RunManifest& m, const VerifySummary& s) {
  write_report_header(os, "verify", m);
  const std::string hash = manifest_hash(m);
  os << "manifest_hash,check,result,detail\n";
  int failures = 0;
  for (const CheckLine& c : s.checks) {
    failures += c.passed ? 0 : 1;
    os << hash << ',' << csv_safe(c.name) << ',' << (c.passed ? "PASS" : "FAIL") << ','
       << csv_safe(c.detail) << '\n';
  }
  os << "# " << s.checks.size() - failures << " passed, " << failures << " failed\n";
}

}  // namespace ktlab
