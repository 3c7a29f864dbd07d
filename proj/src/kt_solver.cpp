#include "ktlab/kt_solver.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "ktlab/walsh.hpp"

namespace ktlab {

namespace {

std::string describe(SubsetKey x) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (int k : x.indices()) {
    os << (first ? "" : ",") << k;
    first = false;
  }
  os << '}';
  return os.str();
}

// Σ_{k=2}^{k_max} x^k / k!
double exp2_series(double x, int k_max) {
  if (k_max < 2) return 0.0;
  double acc = 0.0;
  for (int k = k_max; k >= 2; --k) acc = (acc + 1.0) * x / k;
  // acc = x/2 (1 + x/3 (1 + ...)); one more factor of x gives x^2/2 + ...
  return acc * x;
}

bool use_spectral(const KTProblem& p, const SolverConfig& cfg) {
  switch (cfg.route) {
    case ExpansionRoute::Spectral:
      if (p.lattice().num_interior() > 26) {
        throw std::invalid_argument("spectral route limited to 26 interior spins");
      }
      return true;
    case ExpansionRoute::Sparse:
      return false;
    case ExpansionRoute::Auto:
      return p.lattice().num_interior() <= cfg.spectral_max_interior;
  }
  return false;
}

ExpansionSums spectral_sums(const KTState& state) {
  const KTProblem& p = *state.problem;
  const Lattice& lat = p.lattice();
  const std::size_t n_states = std::size_t{1} << lat.num_interior();

  // phi(σ) = Σ_X g(X) σ_X on every configuration.
  std::vector<double> phi(n_states, 0.0);
  for (std::size_t idx = 0; idx < p.num_keys(); ++idx) phi[p.key(idx).bits()] = state.g[idx];
  walsh_hadamard(phi);

  // Flipping the interior endpoints of c negates exactly the σ_X with
  // c ∈ ∂X, so half the difference isolates Σ_{X: c∈∂X} g(X) σ_X.
  std::vector<double> total(n_states, 0.0);
  for (int c = 0; c < lat.num_bonds(); ++c) {
    const std::uint64_t mask = lat.flip_mask(c).bits();
    const double coupling = p.disorder()[c] * p.ground().s_bond(c);
    if (mask == 0 || coupling == 0.0 || p.keys_through(c).empty()) continue;
    for (std::size_t s = 0; s < n_states; ++s) {
      const double local = 0.5 * (phi[s] - phi[s ^ mask]);
      total[s] += coupling * exp2_series(local, p.k_max());
    }
  }
  walsh_hadamard(total);

  ExpansionSums out;
  const double scale = 1.0 / static_cast<double>(n_states);
  out.empty = total[0] * scale;
  out.keys.resize(p.num_keys());
  for (std::size_t idx = 0; idx < p.num_keys(); ++idx) {
    out.keys[idx] = total[p.key(idx).bits()] * scale;
  }
  return out;
}

ExpansionSums sparse_sums(const KTState& state, std::size_t term_cap) {
  const KTProblem& p = *state.problem;
  ExpansionSums out;
  out.keys.assign(p.num_keys(), 0.0);
  for (int c = 0; c < p.lattice().num_bonds(); ++c) {
    const double coupling = p.disorder()[c] * p.ground().s_bond(c);
    if (coupling == 0.0 || p.keys_through(c).empty()) continue;
    for (const auto& [y, coeff] : bond_local_exponential(c, state, term_cap)) {
      if (y.empty()) {
        out.empty += coupling * coeff;
      } else {
        out.keys[*p.index_of(y)] += coupling * coeff;
      }
    }
  }
  return out;
}

void require_well_posed(const KTProblem& p, const SolverConfig& cfg) {
  if (!p.ground().unique) {
    throw DegenerateGroundStateError(
        "classical ground state is degenerate; the expansion is undefined");
  }
  if (p.num_keys() > 0) {
    const std::size_t weakest = p.weakest_key();
    if (p.denominator(weakest) <= cfg.degenerate_threshold) {
      std::ostringstream os;
      os << "non-positive excitation denominator " << p.denominator(weakest)
         << " for X = " << describe(p.key(weakest));
      throw DegenerateGroundStateError(os.str());
    }
  }
}

}  // namespace

double resolve_M(const SolverConfig& cfg, double h) {
  if (cfg.M > 0.0) return cfg.M;
  return h == 0.0 ? 1.0 : 1.0 / (2.0 * std::abs(h));
}

KTProblem::KTProblem(Lattice lat, DisorderSample dis, ClassicalGroundState gs,
                     double h, int w_max, int k_max, const TruncationOptions& topts)
    : lat_(std::move(lat)),
      dis_(std::move(dis)),
      gs_(std::move(gs)),
      h_(h),
      w_max_(w_max),
      k_max_(k_max) {
  if (static_cast<int>(dis_.values.size()) != lat_.num_bonds() ||
      static_cast<int>(gs_.bond_sign.size()) != lat_.num_bonds()) {
    throw std::invalid_argument("disorder or ground state does not match the lattice");
  }
  keys_ = enumerate_truncation(lat_, w_max_, topts);
  WeightOracle oracle(lat_);
  weights_.reserve(keys_.size());
  denominators_.reserve(keys_.size());
  keys_through_.resize(lat_.num_bonds());
  for (std::size_t idx = 0; idx < keys_.size(); ++idx) {
    const SubsetKey x = keys_[idx];
    weights_.push_back(oracle.weight(x));
    index_.emplace(x, idx);
    double den = 0.0;
    for (int b = 0; b < lat_.num_bonds(); ++b) {
      if (in_boundary(lat_, b, x)) {
        den += dis_[b] * gs_.s_bond(b);
        keys_through_[b].push_back(idx);
      }
    }
    denominators_.push_back(den);
    if (den < denominators_[weakest_]) weakest_ = idx;
  }
  for (int b = 0; b < lat_.num_bonds(); ++b) classical_energy_ -= dis_[b] * gs_.s_bond(b);
}

std::optional<std::size_t> KTProblem::index_of(SubsetKey x) const {
  auto it = index_.find(x);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

KTState KTState::zero(std::shared_ptr<const KTProblem> problem) {
  KTState s;
  s.g.assign(problem->num_keys(), 0.0);
  s.problem = std::move(problem);
  return s;
}

double KTState::at(SubsetKey x) const {
  auto idx = problem->index_of(x);
  return idx ? g[*idx] : 0.0;
}

std::size_t KTState::active_keys() const {
  return static_cast<std::size_t>(
      std::count_if(g.begin(), g.end(), [](double v) { return v != 0.0; }));
}

KTState operator-(const KTState& a, const KTState& b) {
  if (a.problem != b.problem) throw std::invalid_argument("states from different problems");
  KTState out = a;
  for (std::size_t i = 0; i < out.g.size(); ++i) out.g[i] -= b.g[i];
  return out;
}

KTState operator*(double s, const KTState& a) {
  KTState out = a;
  for (double& v : out.g) v *= s;
  return out;
}

SetPolynomial bond_local_exponential(int bond, const KTState& state,
                                     std::size_t term_cap) {
  const KTProblem& p = *state.problem;
  SetPolynomial base;
  for (std::size_t idx : p.keys_through(bond)) {
    if (state.g[idx] != 0.0) base[p.key(idx)] = state.g[idx];
  }
  SetPolynomial result;
  if (base.empty() || p.k_max() < 2) return result;

  SetPolynomial power = base;
  double factorial = 1.0;
  for (int k = 2; k <= p.k_max(); ++k) {
    SetPolynomial next;
    next.reserve(power.size() * 2);
    for (const auto& [y, cy] : power) {
      for (const auto& [x, cx] : base) {
        next[sym_diff(y, x)] += cy * cx;
      }
      if (next.size() > term_cap) {
        throw std::length_error("set polynomial exceeds the term cap at order " +
                                std::to_string(k));
      }
    }
    power = std::move(next);
    factorial *= k;
    for (const auto& [y, cy] : power) {
      if (y.empty() || p.index_of(y)) result[y] += cy / factorial;
    }
  }
  return result;
}

ExpansionSums expansion_sums(const KTState& state, const SolverConfig& cfg) {
  return use_spectral(*state.problem, cfg) ? spectral_sums(state)
                                           : sparse_sums(state, cfg.sparse_term_cap);
}

KTState apply_F(const KTState& state, const SolverConfig& cfg) {
  const KTProblem& p = *state.problem;
  require_well_posed(p, cfg);
  const ExpansionSums sums = expansion_sums(state, cfg);
  KTState out = KTState::zero(state.problem);
  for (std::size_t idx = 0; idx < p.num_keys(); ++idx) {
    const double field = p.key(idx).size() == 1 ? p.h() : 0.0;
    out.g[idx] = -(sums.keys[idx] + field) / p.denominator(idx);
  }
  return out;
}

double ground_energy(const KTState& state, const SolverConfig& cfg) {
  return state.problem->classical_energy() - expansion_sums(state, cfg).empty;
}

namespace {

// sup_c Σ_{X: c∈∂X} weight(X) |g(X)| (|h|M)^{-w(X)}
template <typename KeyWeight>
double weighted_sup(const KTState& state, double M, KeyWeight&& key_weight) {
  const KTProblem& p = *state.problem;
  const double hm = std::abs(p.h()) * M;
  if (hm == 0.0) {
    bool all_zero = std::all_of(state.g.begin(), state.g.end(),
                                [](double v) { return v == 0.0; });
    return all_zero ? 0.0 : std::numeric_limits<double>::infinity();
  }
  std::vector<double> scaled(p.num_keys());
  for (std::size_t idx = 0; idx < p.num_keys(); ++idx) {
    scaled[idx] = key_weight(idx) * std::abs(state.g[idx]) * std::pow(hm, -p.weight(idx));
    if (std::isnan(scaled[idx])) return std::numeric_limits<double>::quiet_NaN();
  }
  double best = 0.0;
  for (int c = 0; c < p.lattice().num_bonds(); ++c) {
    double sum = 0.0;
    for (std::size_t idx : p.keys_through(c)) sum += scaled[idx];
    best = std::max(best, sum);
  }
  return best;
}

}  // namespace

double kt_norm(const KTState& state, double M) {
  if (!(M > 0.0)) throw std::invalid_argument("norm scale M must be > 0");
  const KTProblem& p = *state.problem;
  return weighted_sup(state, M, [&](std::size_t idx) { return p.denominator(idx); });
}

double averaged_gap(const KTState& state, double M) {
  const double norm = kt_norm(state, M);
  if (norm == 0.0) return 0.0;
  const double plain = weighted_sup(state, M, [](std::size_t) { return 1.0; });
  return norm / plain;
}

double contraction_constant(double x) { return std::exp(x) * (1.0 + x) - 1.0; }

double delta_over_Delta_root() {
  // e^x (1 + x) is increasing on [0, ∞); bracket [0, 1] holds the root.
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (std::exp(mid) * (1.0 + mid) < 1.5) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double f_lo = std::abs(std::exp(lo) * (1.0 + lo) - 1.5);
  const double f_hi = std::abs(std::exp(hi) * (1.0 + hi) - 1.5);
  return f_lo <= f_hi ? lo : hi;
}

double contraction_check(const KTState& g, const KTState& g_prime,
                         const SolverConfig& cfg) {
  const double M = resolve_M(cfg, g.problem->h());
  const double den = kt_norm(g - g_prime, M);
  if (den == 0.0) throw std::invalid_argument("contraction ratio undefined for g = g'");
  return kt_norm(apply_F(g, cfg) - apply_F(g_prime, cfg), M) / den;
}

KTState random_admissible_state(std::shared_ptr<const KTProblem> problem, double M,
                                double radius, std::mt19937_64& rng) {
  if (problem->h() == 0.0) throw std::invalid_argument("probes need h != 0");
  if (problem->num_keys() == 0) throw std::invalid_argument("empty truncation");
  const std::size_t n_keys = problem->num_keys();
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, n_keys - 1);

  KTState s = KTState::zero(std::move(problem));
  const double log_n = std::log(static_cast<double>(n_keys));
  const auto support = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::exp(unit(rng) * log_n)));
  for (std::size_t q = 0; q < support; ++q) s.g[pick(rng)] = normal(rng);
  const double norm = kt_norm(s, M);
  if (norm == 0.0) s.g[pick(rng)] = 1.0;
  // (0, 1]: never the zero state
  const double fraction = 1.0 - unit(rng);
  return (fraction * radius / kt_norm(s, M)) * s;
}

FixedPointResult solve_fixed_point(std::shared_ptr<const KTProblem> problem,
                                   const SolverConfig& cfg) {
  const double h = problem->h();
  const double M = resolve_M(cfg, h);
  if (std::abs(h) * M > 1.0 + 1e-15) {
    std::ostringstream os;
    os << "|h| M = " << std::abs(h) * M << " exceeds 1";
    throw PreconditionError(os.str());
  }
  ContractionDiagnostics diag;
  diag.M = M;
  diag.delta = admissible_radius(M);

  KTState state = KTState::zero(problem);
  double previous_step = 0.0;
  bool converged = false;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    KTState next = apply_F(state, cfg);
    TraceRow row;
    row.iteration = it;
    row.step_norm = kt_norm(next - state, M);
    row.energy = ground_energy(next, cfg);
    row.norm_g = kt_norm(next, M);
    row.active_keys = next.active_keys();
    diag.trace.push_back(row);
    if (it > 1 && previous_step > 1e-8 * kt_norm(state, M)) {
      diag.empirical_lipschitz =
          std::max(diag.empirical_lipschitz, row.step_norm / previous_step);
    }
    previous_step = row.step_norm;
    state = std::move(next);
    diag.iterations = it;
    if (!std::isfinite(row.step_norm)) break;
    if (row.step_norm < cfg.tol) {
      converged = true;
      break;
    }
  }
  diag.norm_g = kt_norm(state, M);
  diag.Delta = averaged_gap(state, M);
  diag.K = diag.Delta > 0.0 ? contraction_constant(diag.delta / diag.Delta) : 0.0;
  if (!converged) {
    diag.residual = diag.trace.empty() ? 0.0 : diag.trace.back().step_norm;
    std::ostringstream os;
    os << "fixed-point iteration did not converge in " << diag.iterations
       << " iterations (last step " << diag.residual << ", tol " << cfg.tol << ")";
    throw NonConvergenceError(os.str(), std::move(diag));
  }
  diag.residual = kt_norm(apply_F(state, cfg) - state, M);
  diag.within_ball = diag.norm_g <= diag.delta * (1.0 + 1e-12);

  FixedPointResult result;
  result.energy = ground_energy(state, cfg);
  result.state = std::move(state);
  result.diagnostics = std::move(diag);
  return result;
}

std::shared_ptr<const KTProblem> make_problem(const Lattice& lat,
                                              const DisorderSample& dis,
                                              const ClassicalGroundState& gs,
                                              double h, const SolverConfig& cfg) {
  return std::make_shared<const KTProblem>(lat, dis, gs, h, cfg.w_max, cfg.k_max);
}

Amplitudes wavefunction_amplitudes(const KTState& state, int max_interior) {
  const KTProblem& p = *state.problem;
  const int n = p.lattice().num_interior();
  if (n > max_interior) {
    throw std::invalid_argument("interior has " + std::to_string(n) +
                                " spins; amplitude table capped at " +
                                std::to_string(max_interior));
  }
  const std::size_t n_states = std::size_t{1} << n;
  std::vector<double> phi(n_states, 0.0);
  for (std::size_t idx = 0; idx < p.num_keys(); ++idx) phi[p.key(idx).bits()] = state.g[idx];
  walsh_hadamard(phi);

  Amplitudes amp;
  amp.raw.resize(n_states);
  const std::uint64_t d_bits = p.ground().D.bits();
  double norm2 = 0.0;
  for (std::size_t s = 0; s < n_states; ++s) {
    const double sign = (std::popcount(s & d_bits) & 1) ? -1.0 : 1.0;
    amp.raw[s] = sign * std::exp(-0.5 * phi[s]);
    norm2 += amp.raw[s] * amp.raw[s];
  }
  amp.normalized = amp.raw;
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : amp.normalized) v *= inv;
  return amp;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "iteration,step_norm,E0,norm_g,active_keys\n";
  os << std::setprecision(17);
  for (const TraceRow& r : trace) {
    os << r.iteration << ',' << r.step_norm << ',' << r.energy << ',' << r.norm_g << ','
       << r.active_keys << '\n';
  }
}

}  // namespace ktlab
