// Command-line driver: disorder samples, classical and KT solves, exact
// diagonalization, comparison reports, field sweeps and the verification suite.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ktlab/classical.hpp"
#include "ktlab/disorder.hpp"
#include "ktlab/ed.hpp"
#include "ktlab/harness.hpp"
#include "ktlab/kt_solver.hpp"
#include "ktlab/lattice.hpp"

namespace {

using namespace ktlab;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerify = 2;
constexpr int kExitNonConvergence = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string manifest;
  std::string save_manifest;
  int dim = 0;
  int size = 0;
  std::string seeds;
  std::string dist;
  double J0 = 0.0;
  double J = 0.0;
  std::vector<double> h;
  int w_max = 0;
  int k_max = 0;
  std::string M;
  double tol = 0.0;
  int max_iter = 0;
  double beta = 0.0;
  std::string out;
  std::string timestamp;

  // per-subcommand
  std::string disorder_file;
  std::string trace_dir;
  bool spectrum = false;
};

struct Bound {
  CLI::Option* dim;
  CLI::Option* size;
  CLI::Option* seeds;
  CLI::Option* dist;
  CLI::Option* J0;
  CLI::Option* J;
  CLI::Option* h;
  CLI::Option* w_max;
  CLI::Option* k_max;
  CLI::Option* M;
  CLI::Option* tol;
  CLI::Option* max_iter;
  CLI::Option* beta;
  CLI::Option* out;
  CLI::Option* timestamp;
};

Bound add_common(CLI::App& app, Flags& f) {
  Bound b{};
  app.add_option("--manifest", f.manifest, "Load parameters from a manifest file")
      ->check(CLI::ExistingFile);
  app.add_option("--save-manifest", f.save_manifest, "Write the effective manifest here");
  b.dim = app.add_option("--dim", f.dim, "Lattice dimension d");
  b.size = app.add_option("--size", f.size, "Box side L (even, or 3 for a single site)");
  b.seeds = app.add_option("--seeds", f.seeds, "Seed list, e.g. 1-20 or 1,4,9");
  b.dist = app.add_option("--dist", f.dist, "gaussian | uniform | constant");
  b.J0 = app.add_option("--J0", f.J0, "Coupling mean");
  b.J = app.add_option("--J", f.J, "Coupling width");
  b.h = app.add_option("--h", f.h, "Transverse field (repeatable)");
  b.w_max = app.add_option("--wmax", f.w_max, "Connected-weight truncation");
  b.k_max = app.add_option("--kmax", f.k_max, "Exponential series order");
  b.M = app.add_option("--M", f.M, "Norm scale, or 'auto' for 1/(2|h|)");
  b.tol = app.add_option("--tol", f.tol, "Fixed-point step tolerance");
  b.max_iter = app.add_option("--max-iter", f.max_iter, "Fixed-point iteration cap");
  b.beta = app.add_option("--beta", f.beta, "Inverse temperature for thermal checks");
  b.out = app.add_option("--out", f.out, "Output path (default: stdout)");
  b.timestamp = app.add_option("--timestamp", f.timestamp, "Timestamp recorded in the manifest");
  return b;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest effective_manifest(const Flags& f, const Bound& b) {
  RunManifest m = f.manifest.empty() ? RunManifest{} : load_manifest(f.manifest);
  if (b.dim->count()) m.dim = f.dim;
  if (b.size->count()) m.size = f.size;
  if (b.seeds->count()) m.seeds = parse_seed_list(f.seeds);
  if (b.dist->count()) m.distribution = parse_distribution(f.dist);
  if (b.J0->count()) m.J0 = f.J0;
  if (b.J->count()) m.J = f.J;
  if (b.h->count()) m.h = f.h;
  if (b.w_max->count()) m.w_max = f.w_max;
  if (b.k_max->count()) m.k_max = f.k_max;
  if (b.M->count()) {
    if (f.M == "auto") {
      m.M = 0.0;
    } else {
      try {
        std::size_t used = 0;
        m.M = std::stod(f.M, &used);
        if (used != f.M.size() || !(m.M > 0.0)) throw std::invalid_argument("M");
      } catch (const std::exception&) {
        throw UsageError("--M expects 'auto' or a positive number");
      }
    }
  }
  if (b.tol->count()) m.tol = f.tol;
  if (b.max_iter->count()) m.max_iter = f.max_iter;
  if (b.beta->count()) m.beta = f.beta;
  if (b.out->count()) m.out = f.out;
  if (b.timestamp->count()) {
    m.timestamp = f.timestamp;
  } else if (m.timestamp.empty() && !f.save_manifest.empty()) {
    m.timestamp = utc_now();
  }
  validate(m);
  if (!f.save_manifest.empty()) save_manifest(f.save_manifest, m);
  return m;
}

// Writes to m.out, or stdout when unset.
template <typename Fn>
void emit(const RunManifest& m, Fn&& write) {
  if (m.out.empty()) {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream os(m.out);
  if (!os) throw std::runtime_error("cannot write " + m.out);
  write(os);
}

std::vector<DisorderSample> disorder_for(const RunManifest& m, const Lattice& lat,
                                         const std::string& file) {
  if (!file.empty()) return {load_sample(file, lat)};
  std::vector<DisorderSample> out;
  for (std::uint64_t s : m.seeds) out.push_back(sample_disorder(lat, s, m.distribution, m.J0, m.J));
  return out;
}

int cmd_sample(const RunManifest& m) {
  const Lattice lat = manifest_lattice(m);
  namespace fs = std::filesystem;
  const bool to_dir = !m.out.empty() && (m.seeds.size() > 1 || fs::is_directory(m.out));
  if (m.out.empty() && m.seeds.size() > 1) {
    throw UsageError("several seeds need --out pointing to a directory");
  }
  for (std::uint64_t s : m.seeds) {
    const DisorderSample dis = sample_disorder(lat, s, m.distribution, m.J0, m.J);
    if (m.out.empty()) {
      write_sample(std::cout, lat, dis);
    } else if (to_dir) {
      fs::create_directories(m.out);
      const fs::path p = fs::path(m.out) / ("disorder_d" + std::to_string(m.dim) + "_L" +
                                            std::to_string(m.size) + "_seed" +
                                            std::to_string(s) + ".txt");
      save_sample(p, lat, dis);
    } else {
      save_sample(m.out, lat, dis);
    }
  }
  return kExitOk;
}

int cmd_classical(const RunManifest& m, const Flags& f) {
  const Lattice lat = manifest_lattice(m);
  const auto samples = disorder_for(m, lat, f.disorder_file);
  emit(m, [&](std::ostream& os) {
    write_report_header(os, "classical", m);
    const std::string hash = manifest_hash(m);
    os << "manifest_hash,seed,E_cl,E_second,gap1,unique,D_bits,D_size,lowest_excitation_bits\n";
    for (const DisorderSample& dis : samples) {
      const ClassicalGroundState gs = solve_classical(lat, dis);
      os << hash << ',' << dis.seed << ',' << format_double(gs.E_cl) << ','
         << format_double(gs.E_second) << ',' << format_double(gs.gap1) << ','
         << (gs.unique ? "true" : "false") << ',' << gs.D.bits() << ',' << gs.D.size()
         << ',' << gs.lowest_excitation.bits() << '\n';
    }
  });
  return kExitOk;
}

int cmd_kt(const RunManifest& m, const Flags& f) {
  const Lattice lat = manifest_lattice(m);
  const auto samples = disorder_for(m, lat, f.disorder_file);
  const SolverConfig cfg = m.solver_config();
  int exit_code = kExitOk;
  emit(m, [&](std::ostream& os) {
    write_report_header(os, "kt", m);
    const std::string hash = manifest_hash(m);
    os << "manifest_hash,seed,h,status,iterations,E0,norm_g,delta,Delta,K,lipschitz,residual,"
          "within_ball,message\n";
    for (const DisorderSample& dis : samples) {
      const ClassicalGroundState gs = solve_classical(lat, dis);
      for (double h : m.h) {
        os << hash << ',' << dis.seed << ',' << format_double(h) << ',';
        std::vector<TraceRow> trace;
        try {
          if (!gs.unique) throw DegenerateGroundStateError("classical ground state is degenerate");
          const FixedPointResult r = solve_fixed_point(make_problem(lat, dis, gs, h, cfg), cfg);
          const ContractionDiagnostics& d = r.diagnostics;
          trace = d.trace;
          os << "ok," << d.iterations << ',' << format_double(r.energy) << ','
             << format_double(d.norm_g) << ',' << format_double(d.delta) << ','
             << format_double(d.Delta) << ',' << format_double(d.K) << ','
             << format_double(d.empirical_lipschitz) << ',' << format_double(d.residual) << ','
             << (d.within_ball ? "true" : "false") << ",\n";
        } catch (const NonConvergenceError& e) {
          exit_code = kExitNonConvergence;
          trace = e.diagnostics().trace;
          os << "nonconverged," << e.diagnostics().iterations << ",,,,,,"
             << format_double(e.diagnostics().empirical_lipschitz) << ",,,"
             << "iteration did not converge\n";
        } catch (const PreconditionError& e) {
          exit_code = kExitNonConvergence;
          os << "precondition,0,,,,,,,,," << e.what() << '\n';
        } catch (const DegenerateGroundStateError&) {
          exit_code = kExitNonConvergence;
          os << "degenerate,0,,,,,,,,,ground state not unique\n";
        }
        if (!f.trace_dir.empty() && !trace.empty()) {
          std::filesystem::create_directories(f.trace_dir);
          std::ofstream ts(std::filesystem::path(f.trace_dir) /
                           ("trace_seed" + std::to_string(dis.seed) + "_h" + format_double(h) +
                            ".csv"));
          write_trace_csv(ts, trace);
        }
      }
    }
  });
  return exit_code;
}

int cmd_ed(const RunManifest& m, const Flags& f) {
  const Lattice lat = manifest_lattice(m);
  const auto samples = disorder_for(m, lat, f.disorder_file);
  emit(m, [&](std::ostream& os) {
    write_report_header(os, "ed", m);
    const std::string hash = manifest_hash(m);
    if (f.spectrum) {
      os << "manifest_hash,seed,h,level,energy\n";
    } else {
      os << "manifest_hash,seed,h,E0,E1,gap,residual,iterations,method\n";
    }
    for (const DisorderSample& dis : samples) {
      for (double h : m.h) {
        const FrozenHamiltonian hf = build_hamiltonian(lat, dis, h);
        if (f.spectrum) {
          const FullSpectrum spec = full_spectrum(hf);
          for (Eigen::Index k = 0; k < spec.energies.size(); ++k) {
            os << hash << ',' << dis.seed << ',' << format_double(h) << ',' << k << ','
               << format_double(spec.energies[k]) << '\n';
          }
          continue;
        }
        const SpectralResult r = ground_state_ed(hf);
        os << hash << ',' << dis.seed << ',' << format_double(h) << ',' << format_double(r.E0)
           << ',' << format_double(r.E1) << ',' << format_double(r.gap) << ','
           << format_double(r.residual) << ',' << r.iterations << ','
           << (r.dense ? "dense" : "davidson") << '\n';
      }
    }
  });
  return kExitOk;
}

int cmd_compare(const RunManifest& m) {
  const auto rows = run_compare(m);
  emit(m, [&](std::ostream& os) { write_compare_csv(os, m, rows); });
  for (const CompareRow& r : rows) {
    if (r.status == CellStatus::NonConverged) return kExitNonConvergence;
  }
  return kExitOk;
}

int cmd_sweep(const RunManifest& m) {
  const SweepResult r = sweep_h(m);
  emit(m, [&](std::ostream& os) { write_sweep_csv(os, m, r); });
  return kExitOk;
}

int cmd_verify(const RunManifest& m) {
  const VerifySummary s = verify_suite(m);
  emit(m, [&](std::ostream& os) { write_verify_report(os, m, s); });
  return s.passed() ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kirkwood-Thomas ground states of the transverse-field Edwards-Anderson model"};
  app.require_subcommand(1);
  // --h is the field, so help is long-form only.
  app.set_help_flag("--help", "Print this help message and exit");
  Flags flags;

  struct Sub {
    CLI::App* app;
    Bound bound;
  };
  std::vector<Sub> subs;
  auto add = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->set_help_flag("--help", "Print this help message and exit");
    subs.push_back({sub, add_common(*sub, flags)});
    return sub;
  };
  add("sample", "Write disorder samples");
  add("classical", "Exhaustive classical ground states")
      ->add_option("--disorder", flags.disorder_file, "Read couplings from a sample file");
  CLI::App* kt = add("kt", "Kirkwood-Thomas fixed point per (seed, h)");
  kt->add_option("--disorder", flags.disorder_file, "Read couplings from a sample file");
  kt->add_option("--trace-dir", flags.trace_dir, "Write per-iteration traces here");
  CLI::App* ed = add("ed", "Exact diagonalization per (seed, h)");
  ed->add_option("--disorder", flags.disorder_file, "Read couplings from a sample file");
  ed->add_flag("--spectrum", flags.spectrum, "Dump the full spectrum instead");
  add("compare", "KT versus ED report");
  add("sweep", "Largest converging field per seed");
  add("verify", "Classical, thermal and contraction checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    for (const Sub& s : subs) {
      if (!s.app->parsed()) continue;
      const RunManifest m = effective_manifest(flags, s.bound);
      const std::string name = s.app->get_name();
      if (name == "sample") return cmd_sample(m);
      if (name == "classical") return cmd_classical(m, flags);
      if (name == "kt") return cmd_kt(m, flags);
      if (name == "ed") return cmd_ed(m, flags);
      if (name == "compare") return cmd_compare(m);
      if (name == "sweep") return cmd_sweep(m);
      if (name == "verify") return cmd_verify(m);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
