// Acceptance runner: one PASS/FAIL line per criterion, tolerances fixed here.
// Usage: ktlab_acceptance [--only N]. Exit status 0 iff every selected
// criterion passed.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ktlab/classical.hpp"
#include "ktlab/ed.hpp"
#include "ktlab/harness.hpp"
#include "ktlab/kt_solver.hpp"

using namespace ktlab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool report(const char* id, bool ok, const std::string& detail) {
  std::printf("%s %s %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  return ok;
}

void note(const char* id, const std::string& detail) {
  std::printf("%s info %s\n", id, detail.c_str());
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

std::string fixed10(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10f", x);
  return buf;
}

std::vector<std::uint64_t> seed_range(std::uint64_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::uint64_t i = 0; i < n; ++i) s[i] = i + 1;
  return s;
}

SolverConfig kt_config(int w_max, int k_max) {
  SolverConfig cfg;
  cfg.w_max = w_max;
  cfg.k_max = k_max;
  return cfg;
}

struct KtOutcome {
  std::optional<FixedPointResult> result;
  std::string error;
};

KtOutcome solve_kt(const Lattice& lat, const DisorderSample& dis, const ClassicalGroundState& gs,
                   double h, const SolverConfig& cfg) {
  KtOutcome out;
  try {
    out.result = solve_fixed_point(make_problem(lat, dis, gs, h, cfg), cfg);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

// 1. Unique classical minimizer on d=2 L=6 for 100 gaussian seeds, under a minute.
bool ac1() {
  const double kGapFloor = 1e-9;  // in units of J = 1
  const double kSeconds = 60.0;
  const auto t0 = Clock::now();
  const Lattice lat = build_lattice(2, 6);
  int unique = 0;
  double min_gap = 1e300;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const ClassicalGroundState gs = solve_classical(lat, sample_disorder(lat, seed));
    if (gs.unique && gs.gap1 > kGapFloor) ++unique;
    min_gap = std::min(min_gap, gs.gap1);
  }
  const double t = seconds_since(t0);
  return report("AC1", unique == 100 && t < kSeconds,
                std::to_string(unique) + "/100 unique, min gap1 " + fmt(min_gap) + ", " +
                    fmt(t) + " s");
}

// 2. Strictly positive excitation energy for every X with w(X) <= 4.
bool ac2() {
  const Lattice lat = build_lattice(2, 6);
  const std::vector<SubsetKey> keys = enumerate_truncation(lat, 4);
  std::size_t violations = 0, mismatches = 0;
  double min_excitation = 1e300;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const DisorderSample dis = sample_disorder(lat, seed);
    const ClassicalGroundState gs = solve_classical(lat, dis);
    const std::vector<double> table = classical_energies(lat, dis);
    for (SubsetKey x : keys) {
      const double e = excitation_energy(gs, dis, lat, x);
      const double direct = table[gs.D.bits() ^ x.bits()] - gs.E_cl;
      if (!(e > 0.0) || !(direct > 0.0)) ++violations;
      if (std::abs(e - direct) > 1e-12 * (1.0 + std::abs(gs.E_cl))) ++mismatches;
      min_excitation = std::min(min_excitation, e);
    }
  }
  return report("AC2", violations == 0 && mismatches == 0,
                std::to_string(keys.size()) + " sets x 100 seeds, " + std::to_string(violations) +
                    " non-positive, " + std::to_string(mismatches) +
                    " disagree with the energy table, min " + fmt(min_excitation));
}

// 3. One interior site: asinh coefficient and two-level energy.
bool ac3() {
  const double kKtTol = 1e-10;
  const double kEdTol = 1e-12;
  double worst_g = 0.0, worst_kt = 0.0, worst_ed = 0.0;
  bool ok = true;
  for (int d : {1, 2}) {
    const Lattice lat = single_site_lattice(d);
    for (std::uint64_t seed : {1, 2, 3}) {
      const DisorderSample dis = sample_disorder(lat, seed);
      const ClassicalGroundState gs = solve_classical(lat, dis);
      double jhat = 0.0, frozen = 0.0;
      for (int b = 0; b < lat.num_bonds(); ++b) {
        if (lat.bond(b).kind == BondKind::FrozenFrozen) {
          frozen -= dis[b];
        } else {
          jhat += dis[b] * gs.s_bond(b);
        }
      }
      for (double ratio : {0.05, 0.1, 0.2}) {
        const double h = ratio * jhat;
        const double exact = frozen - std::sqrt(jhat * jhat + h * h);
        const KtOutcome kt = solve_kt(lat, dis, gs, h, kt_config(1, 16));
        if (!kt.result) {
          ok = false;
          continue;
        }
        worst_g = std::max(worst_g, std::abs(kt.result->state.g[0] - std::asinh(-ratio)));
        worst_kt = std::max(worst_kt, std::abs(kt.result->energy - exact));
        const SpectralResult ed = ground_state_ed(build_hamiltonian(lat, dis, h));
        worst_ed = std::max(worst_ed, std::abs(ed.E0 - exact));
      }
    }
  }
  ok = ok && worst_g <= kKtTol && worst_kt <= kKtTol && worst_ed <= kEdTol;
  return report("AC3", ok,
                "max |g - asinh(-h/J)| " + fmt(worst_g) + ", max |E_kt - E| " + fmt(worst_kt) +
                    ", max |E_ed - E| " + fmt(worst_ed));
}

struct EnergyCell {
  double ed = 0.0;
  std::optional<double> kt4, kt5;
  std::optional<double> overlap4;
  std::string error;
};

// Shared by criteria 4 and 5: d=2 L=6, seeds 1..20, h in {0.05, 0.1}.
std::vector<EnergyCell> energy_cells(bool with_w5, const std::vector<double>& fields) {
  const Lattice lat = build_lattice(2, 6);
  const std::vector<std::uint64_t> seeds = seed_range(20);
  std::vector<EnergyCell> cells(seeds.size() * fields.size());
  parallel_for(cells.size(), [&](std::size_t i) {
    const std::uint64_t seed = seeds[i / fields.size()];
    const double h = fields[i % fields.size()];
    const DisorderSample dis = sample_disorder(lat, seed);
    const ClassicalGroundState gs = solve_classical(lat, dis);
    EnergyCell& c = cells[i];
    const SpectralResult ed = ground_state_ed(build_hamiltonian(lat, dis, h));
    c.ed = ed.E0;
    const KtOutcome k4 = solve_kt(lat, dis, gs, h, kt_config(4, 6));
    if (k4.result) {
      c.kt4 = k4.result->energy;
      c.overlap4 = overlap(ed, wavefunction_amplitudes(k4.result->state));
    } else {
      c.error = k4.error;
    }
    if (with_w5) {
      const KtOutcome k5 = solve_kt(lat, dis, gs, h, kt_config(5, 6));
      if (k5.result) c.kt5 = k5.result->energy;
    }
  });
  return cells;
}

// 4. Relative energy error <= 1e-3 and improvement from w_max 4 to 5.
bool ac4() {
  const double kRelTol = 1e-3;
  const int kMonotoneSeeds = 18;
  const double kSeconds = 600.0;
  const std::vector<double> fields = {0.05, 0.1};
  const auto t0 = Clock::now();
  const std::vector<EnergyCell> cells = energy_cells(true, fields);
  const double t = seconds_since(t0);

  int within = 0, monotone_seeds = 0;
  double worst = 0.0;
  for (std::size_t s = 0; s < 20; ++s) {
    bool monotone = true;
    for (std::size_t k = 0; k < fields.size(); ++k) {
      const EnergyCell& c = cells[s * fields.size() + k];
      std::string line = "seed " + std::to_string(s + 1) + " h=" + format_double(fields[k]);
      if (!c.kt4) {
        monotone = false;
        worst = std::max(worst, std::numeric_limits<double>::infinity());
        note("AC4", line + " w4 failed: " + c.error);
        continue;
      }
      const double e4 = std::abs(*c.kt4 - c.ed) / std::abs(c.ed);
      worst = std::max(worst, e4);
      if (e4 <= kRelTol) ++within;
      line += " rel err w4 " + fmt(e4);
      if (c.kt5) {
        const double e5 = std::abs(*c.kt5 - c.ed) / std::abs(c.ed);
        line += " w5 " + fmt(e5);
        if (!(e5 < e4)) monotone = false;
      } else {
        line += " w5 failed";
        monotone = false;
      }
      note("AC4", line);
    }
    monotone_seeds += monotone;
  }
  const int cells_total = static_cast<int>(cells.size());
  const bool ok = within == cells_total && monotone_seeds >= kMonotoneSeeds && t < kSeconds;
  return report("AC4", ok,
                std::to_string(within) + "/" + std::to_string(cells_total) +
                    " cells within 1e-3 (worst " + fmt(worst) + "), error shrinks at w_max 5 on " +
                    std::to_string(monotone_seeds) + "/20 seeds, " + fmt(t) + " s");
}

// 5. Ground-state overlap >= 0.999 at h = 0.05.
bool ac5() {
  const double kOverlap = 0.999;
  const std::vector<EnergyCell> cells = energy_cells(false, {0.05});
  int good = 0;
  double worst = 1.0, worst_converged = 1.0;
  for (std::size_t s = 0; s < cells.size(); ++s) {
    const double ov = cells[s].overlap4.value_or(0.0);
    if (cells[s].overlap4) {
      worst_converged = std::min(worst_converged, ov);
    } else {
      note("AC5", "seed " + std::to_string(s + 1) + " failed: " + cells[s].error);
    }
    worst = std::min(worst, ov);
    good += ov >= kOverlap;
  }
  note("AC5", "min overlap over converged seeds " + fixed10(worst_converged));
  return report("AC5", good == 20,
                std::to_string(good) + "/20 seeds, min overlap " + fixed10(worst));
}

// 6. Contraction ratio <= 1/2 on 100 probe pairs per seed, F(0) norm and ball.
bool ac6() {
  const double kRatio = 0.5;
  const double kIdentityTol = 1e-12;
  const int kProbes = 100;
  const double h = 0.1;
  const Lattice lat = build_lattice(2, 6);
  const SolverConfig cfg = kt_config(4, 6);
  const double M = 1.0 / (2.0 * h);
  const double delta = admissible_radius(M);
  struct SeedStats {
    double worst_ratio = 0.0, worst_ball = 0.0, f0_error = 0.0;
  };
  std::vector<SeedStats> stats(5);
  parallel_for(stats.size(), [&](std::size_t i) {
    const std::uint64_t seed = i + 1;
    const DisorderSample dis = sample_disorder(lat, seed);
    const auto problem = make_problem(lat, dis, solve_classical(lat, dis), h, cfg);
    SolverConfig c = cfg;
    c.M = M;
    SeedStats& st = stats[i];
    const double f0 = kt_norm(apply_F(KTState::zero(problem), c), M);
    st.f0_error = std::abs(f0 - 2.0 / M) / (2.0 / M);
    std::mt19937_64 rng(1000 + seed);
    for (int p = 0; p < kProbes; ++p) {
      const KTState g = random_admissible_state(problem, M, delta, rng);
      const KTState g2 = random_admissible_state(problem, M, delta, rng);
      st.worst_ratio = std::max(st.worst_ratio, contraction_check(g, g2, c));
      st.worst_ball = std::max({st.worst_ball, kt_norm(apply_F(g, c), M) / delta,
                                kt_norm(apply_F(g2, c), M) / delta});
    }
  });
  double ratio = 0.0, ball = 0.0, f0 = 0.0;
  for (const SeedStats& st : stats) {
    ratio = std::max(ratio, st.worst_ratio);
    ball = std::max(ball, st.worst_ball);
    f0 = std::max(f0, st.f0_error);
  }
  return report("AC6", ratio <= kRatio && ball <= 1.0 && f0 <= kIdentityTol,
                "500 probe pairs, max ratio " + fmt(ratio) + ", max |F(g)|/delta " + fmt(ball) +
                    ", |F(0)| rel error vs 2/M " + fmt(f0));
}

// 7. Root of e^x (1 + x) = 3/2.
bool ac7() {
  const double x = delta_over_Delta_root();
  const double residual = std::abs(std::exp(x) * (1.0 + x) - 1.5);
  char buf[64];
  std::snprintf(buf, sizeof buf, "x = %.15f, residual ", x);
  return report("AC7", residual < 1e-12, buf + fmt(residual));
}

// 8. Connected correlation decreasing in beta and below 1e-6 at beta = 50.
bool ac8() {
  const double kBound = 1e-6;
  const double kSlack = 1e-14;
  const auto t0 = Clock::now();
  const Lattice lat = build_lattice(2, 4);
  const double h = 0.1;
  const std::vector<double> betas = {1.0, 5.0, 10.0, 25.0, 50.0};
  int checked = 0, decreasing = 0, small = 0;
  double worst = 0.0, worst_scaled = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const DisorderSample dis = sample_disorder(lat, seed);
    const FrozenHamiltonian hf = build_hamiltonian(lat, dis, h);
    for (int b = 0; b < lat.num_bonds(); ++b) {
      if (lat.bond(b).kind == BondKind::FrozenFrozen) continue;
      const int site = lat.is_interior(lat.bond(b).i) ? lat.bond(b).i : lat.bond(b).j;
      for (const Observable& f : {bond_z(lat, b), site_z(lat, site)}) {
        const std::vector<double> v = lemma1_check(hf, lat, b, f, betas);
        bool dec = true;
        for (std::size_t k = 1; k < v.size(); ++k) dec = dec && std::abs(v[k]) <= std::abs(v[k - 1]) + kSlack;
        ++checked;
        decreasing += dec;
        small += std::abs(v.back()) < kBound;
        worst = std::max(worst, std::abs(v.back()));
        worst_scaled = std::max(worst_scaled, betas.back() * std::abs(v.back()));
      }
    }
  }
  note("AC8", "max beta*|value| at beta=50: " + fmt(worst_scaled));
  const double t = seconds_since(t0);
  return report("AC8", decreasing == checked && small == checked && t < 60.0,
                std::to_string(checked) + " (bond, f) pairs on 5 seeds: " + std::to_string(decreasing) +
                    " decreasing, " + std::to_string(small) + " below 1e-6 at beta=50 (max " +
                    fmt(worst) + "), " + fmt(t) + " s");
}

// 9. Steiner weight equals the brute-force minimum over connected supersets.
bool ac9() {
  const Lattice lat = build_lattice(2, 6);
  const int n = lat.num_interior();
  const auto& graph = lat.interior_graph();
  const std::uint32_t full = (1u << n) - 1;
  std::vector<char> connected(std::size_t{1} << n, 0);
  for (std::uint32_t s = 1; s <= full; ++s) {
    const std::uint32_t start = s & -s;
    std::uint32_t seen = start, frontier = start;
    while (frontier) {
      const int v = std::countr_zero(frontier);
      frontier &= frontier - 1;
      for (int u : graph[v]) {
        const std::uint32_t bit = 1u << u;
        if ((s & bit) && !(seen & bit)) {
          seen |= bit;
          frontier |= bit;
        }
      }
    }
    connected[s] = seen == s;
  }
  WeightOracle oracle(lat);
  int sets = 0, mismatches = 0;
  for (std::uint32_t x = 1; x <= full; ++x) {
    if (std::popcount(x) > 4) continue;
    int best = n + 1;
    const std::uint32_t rest = full & ~x;
    for (std::uint32_t add = rest;; add = (add - 1) & rest) {
      if (connected[x | add]) best = std::min(best, std::popcount(x | add));
      if (add == 0) break;
    }
    ++sets;
    mismatches += oracle.weight(SubsetKey(x)) != best;
  }
  return report("AC9", mismatches == 0 && sets == 2516,
                std::to_string(sets) + " sets with |X| <= 4, " + std::to_string(mismatches) +
                    " mismatches");
}

// 10. E0 even in h; h^2 coefficient against second-order perturbation theory.
bool ac10() {
  const double kParity = 1e-10;
  const double kCoefficient = 0.01;
  const Lattice lat = build_lattice(2, 6);
  const SolverConfig cfg = kt_config(4, 6);
  const std::vector<std::uint64_t> seeds = seed_range(20);
  struct SeedStats {
    double parity = 0.0, coefficient = 0.0;
    double parity_converged = 0.0;
    std::string error;
  };
  std::vector<SeedStats> stats(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    const DisorderSample dis = sample_disorder(lat, seeds[i]);
    const ClassicalGroundState gs = solve_classical(lat, dis);
    SeedStats& st = stats[i];
    auto energy = [&](double h) -> std::optional<double> {
      const KtOutcome r = solve_kt(lat, dis, gs, h, cfg);
      if (!r.result) {
        st.error = "h=" + format_double(h) + ": " + r.error;
        return std::nullopt;
      }
      return r.result->energy;
    };
    for (double h : {0.05, 0.1}) {
      const auto plus = energy(h), minus = energy(-h);
      if (plus && minus) {
        st.parity = std::max(st.parity, std::abs(*plus - *minus));
        st.parity_converged = std::max(st.parity_converged, std::abs(*plus - *minus));
      } else {
        st.parity = std::numeric_limits<double>::infinity();
      }
    }
    // Second order from the classical energy table: -sum over single flips of 1/dE.
    const std::vector<double> table = classical_energies(lat, dis);
    double expected = 0.0;
    for (int k = 0; k < lat.num_interior(); ++k) {
      expected -= 1.0 / (table[gs.D.bits() ^ (std::uint64_t{1} << k)] - gs.E_cl);
    }
    const double h = 0.01;
    const auto e1 = energy(h), e2 = energy(2.0 * h);
    if (!e1 || !e2) {
      st.coefficient = std::numeric_limits<double>::infinity();
      return;
    }
    const double q1 = (*e1 - gs.E_cl) / (h * h), q2 = (*e2 - gs.E_cl) / (4.0 * h * h);
    const double fitted = (4.0 * q1 - q2) / 3.0;
    st.coefficient = std::abs(fitted - expected) / std::abs(expected);
  });
  double parity = 0.0, coefficient = 0.0, parity_converged = 0.0, coefficient_converged = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (!stats[i].error.empty()) note("AC10", "seed " + std::to_string(seeds[i]) + " " + stats[i].error);
    parity = std::max(parity, stats[i].parity);
    coefficient = std::max(coefficient, stats[i].coefficient);
    parity_converged = std::max(parity_converged, stats[i].parity_converged);
    if (std::isfinite(stats[i].coefficient)) {
      coefficient_converged = std::max(coefficient_converged, stats[i].coefficient);
    }
  }
  note("AC10", "over converged solves: max parity gap " + fmt(parity_converged) +
                   ", max h^2 coefficient error " + fmt(coefficient_converged));
  return report("AC10", parity <= kParity && coefficient <= kCoefficient,
                "20 seeds at h = 0.05, 0.1: max |E(h) - E(-h)| " + fmt(parity) +
                    ", max relative error of h^2 coefficient " + fmt(coefficient));
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--only N]\n", argv[0]);
      return 1;
    }
  }
  const std::vector<std::function<bool()>> criteria = {ac1, ac2, ac3, ac4, ac5,
                                                       ac6, ac7, ac8, ac9, ac10};
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 1;
  }
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (only != 0 && static_cast<int>(k) + 1 != only) continue;
    try {
      all = criteria[k]() && all;
    } catch (const std::exception& e) {
      report(("AC" + std::to_string(k + 1)).c_str(), false, std::string("exception: ") + e.what());
      all = false;
    }
  }
  return all ? 0 : 1;
}
