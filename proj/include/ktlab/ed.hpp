#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "ktlab/disorder.hpp"
#include "ktlab/kt_solver.hpp"
#include "ktlab/lattice.hpp"

namespace ktlab {

/// Frozen-boundary Hamiltonian on the interior spins in the σ^z basis:
/// diagonal classical energies (boundary spins pinned to +1, frozen-frozen
/// bonds included as a constant) and -h between configurations that differ
/// at one interior site. Basis states are indexed by interior bits.
class FrozenHamiltonian {
 public:
  FrozenHamiltonian(int num_interior, double h, std::vector<double> diagonal);

  int num_spins() const { return n_; }
  std::size_t dim() const { return diagonal_.size(); }
  double h() const { return h_; }
  const std::vector<double>& diagonal() const { return diagonal_; }

  double entry(std::size_t row, std::size_t col) const;
  /// out = H v, matrix-free.
  void apply(std::span<const double> v, std::span<double> out) const;
  Eigen::MatrixXd dense() const;

 private:
  int n_;
  double h_;
  std::vector<double> diagonal_;
};

FrozenHamiltonian build_hamiltonian(const Lattice& lat, const DisorderSample& dis,
                                    double h, int max_interior = 22);

struct EdOptions {
  /// Dimensions up to this use a dense eigensolver.
  std::size_t dense_max_dim = 1024;
  double residual_tol = 1e-10;
  int max_iterations = 500;
  int max_basis = 48;
};

struct SpectralResult {
  double E0 = 0.0;
  double E1 = 0.0;
  double gap = 0.0;
  std::vector<double> ground_vector;  // unit norm, σ^z basis
  double residual = 0.0;              // ‖H v - E0 v‖
  int iterations = 0;
  bool dense = false;
};

class EigensolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two lowest eigenpairs: dense solve for small dimensions, otherwise a
/// block Davidson iteration preconditioned by the classical diagonal.
SpectralResult ground_state_ed(const FrozenHamiltonian& hf, const EdOptions& opts = {});

struct FullSpectrum {
  Eigen::VectorXd energies;  // ascending
  Eigen::MatrixXd vectors;   // columns
};

/// Complete eigendecomposition, refused beyond `max_dim` states.
FullSpectrum full_spectrum(const FrozenHamiltonian& hf, std::size_t max_dim = 4096);

/// Operators written as dense matrices in the σ^z basis.
using Observable = Eigen::MatrixXd;
Observable identity_observable(const FrozenHamiltonian& hf);
Observable bond_z(const Lattice& lat, int bond);
Observable site_z(const Lattice& lat, int site);
Observable zz(const Lattice& lat, int site_a, int site_b);

double thermal_expectation(const FullSpectrum& spec, const Observable& a, double beta);

/// Duhamel two-point function (A, B) = ∫_0^1 dt <e^{βtH} A e^{-βtH} B>.
double duhamel(const FullSpectrum& spec, const Observable& a, const Observable& b,
               double beta);

/// (σ_b^z, f) - <σ_b^z><f> for each β of the schedule.
std::vector<double> lemma1_check(const FrozenHamiltonian& hf, const Lattice& lat,
                                 int bond, const Observable& f,
                                 std::span<const double> betas);

/// Maps a σ^z-basis vector to the rotated (σ^x) frame: the normalized
/// Walsh-Hadamard transform.
std::vector<double> to_rotated_frame(std::span<const double> v);

/// |<a|b>| / (‖a‖ ‖b‖).
double overlap(std::span<const double> a, std::span<const double> b);

/// Overlap of the ED ground vector, rotated to the σ^x frame, with ansatz
/// amplitudes.
double overlap(const SpectralResult& sr, const Amplitudes& amplitudes);

}  // namespace ktlab
