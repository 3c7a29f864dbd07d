#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ktlab/classical.hpp"
#include "ktlab/disorder.hpp"
#include "ktlab/lattice.hpp"

namespace ktlab {

/// How the exp⁽²⁾ coefficients are produced.
///
/// `Sparse` multiplies set-indexed polynomials by symmetric-difference
/// convolution bond by bond. `Spectral` evaluates the same polynomials on
/// every configuration through a Walsh-Hadamard transform, where the XOR
/// convolution becomes a pointwise product; it needs a dense table of 2^n
/// entries. `Auto` picks `Spectral` when the interior is small enough.
enum class ExpansionRoute { Auto, Spectral, Sparse };

struct SolverConfig {
  /// Norm scale. Non-positive selects the automatic choice M = 1/(2|h|).
  double M = 0.0;
  int w_max = 4;
  int k_max = 6;
  double tol = 1e-12;
  int max_iter = 200;
  ExpansionRoute route = ExpansionRoute::Auto;
  int spectral_max_interior = 20;
  /// Largest intermediate polynomial the sparse route may build.
  std::size_t sparse_term_cap = 4'000'000;
  /// Σ_{b∈∂X} J_b s⁺_b at or below this aborts the solve.
  double degenerate_threshold = 1e-10;
};

/// M actually used for a given field: cfg.M, or 1/(2|h|) (1 when h = 0).
double resolve_M(const SolverConfig& cfg, double h);
inline double admissible_radius(double M) { return 4.0 / M; }

class DegenerateGroundStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Immutable data shared by every iterate: the system, the field, the
/// truncated key set with weights w(X) and denominators Σ_{b∈∂X} J_b s⁺_b,
/// and for each bond the keys whose boundary contains it.
class KTProblem {
 public:
  KTProblem(Lattice lat, DisorderSample dis, ClassicalGroundState gs, double h,
            int w_max, int k_max, const TruncationOptions& topts = {});

  const Lattice& lattice() const { return lat_; }
  const DisorderSample& disorder() const { return dis_; }
  const ClassicalGroundState& ground() const { return gs_; }
  double h() const { return h_; }
  int w_max() const { return w_max_; }
  int k_max() const { return k_max_; }

  std::size_t num_keys() const { return keys_.size(); }
  const std::vector<SubsetKey>& keys() const { return keys_; }
  SubsetKey key(std::size_t idx) const { return keys_[idx]; }
  int weight(std::size_t idx) const { return weights_[idx]; }
  double denominator(std::size_t idx) const { return denominators_[idx]; }
  std::optional<std::size_t> index_of(SubsetKey x) const;
  /// Key indices X with c ∈ ∂X.
  const std::vector<std::size_t>& keys_through(int bond) const {
    return keys_through_[bond];
  }
  /// -Σ_b J_b s⁺_b.
  double classical_energy() const { return classical_energy_; }
  /// Index of the key with the smallest denominator.
  std::size_t weakest_key() const { return weakest_; }

 private:
  Lattice lat_;
  DisorderSample dis_;
  ClassicalGroundState gs_;
  double h_;
  int w_max_;
  int k_max_;
  std::vector<SubsetKey> keys_;
  std::vector<int> weights_;
  std::vector<double> denominators_;
  std::unordered_map<SubsetKey, std::size_t, SubsetKeyHash> index_;
  std::vector<std::vector<std::size_t>> keys_through_;
  double classical_energy_ = 0.0;
  std::size_t weakest_ = 0;
};

/// Coefficient function g over the problem's truncated keys; keys outside
/// the truncation are zero.
struct KTState {
  std::shared_ptr<const KTProblem> problem;
  std::vector<double> g;

  static KTState zero(std::shared_ptr<const KTProblem> problem);
  double at(SubsetKey x) const;
  std::size_t active_keys() const;
};

KTState operator-(const KTState& a, const KTState& b);
KTState operator*(double s, const KTState& a);

/// Set-indexed polynomial Σ_Y c_Y σ_Y.
using SetPolynomial = std::unordered_map<SubsetKey, double, SubsetKeyHash>;

/// exp⁽²⁾(Σ_{X: c∈∂X} g(X) σ_X) for one bond, expanded to order k_max by
/// symmetric-difference convolution and restricted to ∅ and truncation keys.
SetPolynomial bond_local_exponential(int bond, const KTState& state,
                                     std::size_t term_cap = 4'000'000);

/// Σ_c J_c s⁺_c exp⁽²⁾_c projected on ∅ and on every truncation key.
struct ExpansionSums {
  double empty = 0.0;
  std::vector<double> keys;
};
ExpansionSums expansion_sums(const KTState& state, const SolverConfig& cfg);

/// One application of the fixed-point map.
KTState apply_F(const KTState& state, const SolverConfig& cfg);

/// E₀ = -Σ_b J_b s⁺_b - Σ_c J_c s⁺_c [exp⁽²⁾_c]_∅.
double ground_energy(const KTState& state, const SolverConfig& cfg = {});

/// sup_c Σ_{X: c∈∂X} (Σ_{b∈∂X} J_b s⁺_b) |g(X)| (|h|M)^{-w(X)}.
/// With h = 0 the zero function has norm 0 and anything else is unbounded.
double kt_norm(const KTState& state, double M);

/// Averaged gap Δ(g): the norm divided by the same sup without the
/// denominators. Zero for g = 0.
double averaged_gap(const KTState& state, double M);
/// K = e^x (1 + x) - 1.
double contraction_constant(double delta_over_gap);

/// Unique positive root of e^x (1 + x) = 3/2 (where K = 1/2).
double delta_over_Delta_root();

/// ‖F(g) - F(g')‖ / ‖g - g'‖. Throws when g = g'.
double contraction_check(const KTState& g, const KTState& g_prime,
                         const SolverConfig& cfg);

/// Random state with 0 < ‖g‖ ≤ radius for contraction probes: Gaussian
/// entries on a random support whose size is log-uniform in [1, #keys],
/// rescaled to a uniform fraction of the radius. Requires h ≠ 0.
KTState random_admissible_state(std::shared_ptr<const KTProblem> problem, double M,
                                double radius, std::mt19937_64& rng);

struct TraceRow {
  int iteration = 0;
  double step_norm = 0.0;  // ‖g_{n+1} - g_n‖
  double energy = 0.0;     // E₀(g_{n+1})
  double norm_g = 0.0;     // ‖g_{n+1}‖
  std::size_t active_keys = 0;
};

struct ContractionDiagnostics {
  double M = 0.0;
  double delta = 0.0;
  double norm_g = 0.0;
  double Delta = 0.0;
  double K = 0.0;
  /// Largest ‖F(g_n) - F(g_{n-1})‖ / ‖g_n - g_{n-1}‖ along the iteration.
  double empirical_lipschitz = 0.0;
  double residual = 0.0;  // ‖F(g*) - g*‖
  bool within_ball = true;
  int iterations = 0;
  std::vector<TraceRow> trace;
};

struct FixedPointResult {
  KTState state;
  ContractionDiagnostics diagnostics;
  double energy = 0.0;
};

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, ContractionDiagnostics diag)
      : std::runtime_error(what), diagnostics_(std::move(diag)) {}
  const ContractionDiagnostics& diagnostics() const { return diagnostics_; }

 private:
  ContractionDiagnostics diagnostics_;
};

/// Iterates g_{n+1} = F(g_n) from g_0 = 0 until the step norm drops below
/// cfg.tol. Requires |h| M ≤ 1.
FixedPointResult solve_fixed_point(std::shared_ptr<const KTProblem> problem,
                                   const SolverConfig& cfg);

/// Builds a problem with cfg.w_max and cfg.k_max.
std::shared_ptr<const KTProblem> make_problem(const Lattice& lat,
                                              const DisorderSample& dis,
                                              const ClassicalGroundState& gs,
                                              double h, const SolverConfig& cfg);

struct Amplitudes {
  std::vector<double> raw;         // σ_D ψ(σ), indexed by interior bits
  std::vector<double> normalized;  // unit 2-norm copy
};

/// Amplitudes of the ansatz in the rotated frame, for interiors up to 20 spins.
Amplitudes wavefunction_amplitudes(const KTState& state, int max_interior = 20);

/// Writes trace rows as comma-separated values with a header line.
void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace);

}  // namespace ktlab
