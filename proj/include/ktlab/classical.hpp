#pragma once

#include <cstdint>
#include <vector>

#include "ktlab/disorder.hpp"
#include "ktlab/lattice.hpp"

namespace ktlab {

/// Spin assignment on all sites of Σ⁺: boundary-shell sites are +1.
///
/// Interior configurations are also addressed by a bit pattern (bit k set
/// means interior site k is -1); every enumeration in the library uses it.
class SpinConfig {
 public:
  SpinConfig() = default;
  static SpinConfig from_bits(const Lattice& lat, std::uint64_t interior_bits);

  int operator[](int site) const { return spins_[site]; }
  std::uint64_t interior_bits() const { return bits_; }
  int num_sites() const { return static_cast<int>(spins_.size()); }

 private:
  std::vector<int> spins_;
  std::uint64_t bits_ = 0;
};

/// -Σ_b J_b σ_i σ_j for the configuration with the given interior bits.
double classical_energy(const Lattice& lat, const DisorderSample& dis,
                        std::uint64_t interior_bits);

struct ClassicalOptions {
  int max_interior = 24;
  /// Uniqueness threshold, in units of the coupling spread J.
  double tie_tolerance = 1e-12;
};

struct ClassicalGroundState {
  SpinConfig s_plus;
  SubsetKey D;                   // interior sites with s⁺ = -1
  double E_cl = 0.0;
  double E_second = 0.0;         // lowest energy of any other configuration
  double gap1 = 0.0;             // E_second - E_cl
  SubsetKey lowest_excitation;   // flip set reaching E_second
  bool unique = false;
  std::vector<int> bond_sign;    // s⁺_b per bond

  int s_bond(int b) const { return bond_sign[b]; }
};

/// Exhaustive minimization over Σ⁺. Ties within the tolerance are reported
/// through `unique == false`, never resolved silently.
ClassicalGroundState solve_classical(const Lattice& lat, const DisorderSample& dis,
                                     const ClassicalOptions& opts = {});

/// Energies of all 2^n interior configurations, indexed by interior bits.
std::vector<double> classical_energies(const Lattice& lat, const DisorderSample& dis,
                                       int max_interior = 22);

/// Σ_{b∈∂X} J_b s⁺_b, half of the classical excitation energy of flipping X.
double boundary_coupling(const Lattice& lat, const DisorderSample& dis,
                         const ClassicalGroundState& gs, SubsetKey x);

/// 2 Σ_{b∈∂X} J_b s⁺_b = E(s⁺ with X flipped) - E_cl.
double excitation_energy(const ClassicalGroundState& gs, const DisorderSample& dis,
                         const Lattice& lat, SubsetKey x);

struct BondConsistencyReport {
  int plaquettes = 0;
  int plaquette_violations = 0;
  double beta = 0.0;
  double max_bond_deviation = 0.0;  // max_b |<σ_b^z>_β - s⁺_b| at h = 0
  double tolerance = 0.0;
  bool passed = false;
};

/// Plaquette identity on s⁺ plus agreement of the zero-temperature bond
/// values with the β-Gibbs expectation of the classical model.
BondConsistencyReport verify_bond_consistency(const Lattice& lat,
                                              const DisorderSample& dis,
                                              const ClassicalGroundState& gs,
                                              double beta = 50.0,
                                              double tolerance = 1e-6);

/// Thermal expectation of σ_b^z for every bond in the h = 0 model.
std::vector<double> classical_bond_expectations(const Lattice& lat,
                                                const DisorderSample& dis,
                                                double beta);

}  // namespace ktlab
