#include "ktlab/ed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "ktlab/classical.hpp"
#include "ktlab/walsh.hpp"

namespace ktlab {

FrozenHamiltonian::FrozenHamiltonian(int num_interior, double h,
                                     std::vector<double> diagonal)
    : n_(num_interior), h_(h), diagonal_(std::move(diagonal)) {
  if (diagonal_.size() != (std::size_t{1} << n_)) {
    throw std::invalid_argument("diagonal length must be 2^n");
  }
}

double FrozenHamiltonian::entry(std::size_t row, std::size_t col) const {
  if (row == col) return diagonal_[row];
  return std::has_single_bit(row ^ col) ? -h_ : 0.0;
}

void FrozenHamiltonian::apply(std::span<const double> v, std::span<double> out) const {
  const std::size_t n_states = dim();
  for (std::size_t s = 0; s < n_states; ++s) {
    double acc = diagonal_[s] * v[s];
    double flips = 0.0;
    for (int k = 0; k < n_; ++k) flips += v[s ^ (std::size_t{1} << k)];
    out[s] = acc - h_ * flips;
  }
}

Eigen::MatrixXd FrozenHamiltonian::dense() const {
  const auto n_states = static_cast<Eigen::Index>(dim());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_states, n_states);
  for (Eigen::Index s = 0; s < n_states; ++s) {
    m(s, s) = diagonal_[s];
    for (int k = 0; k < n_; ++k) m(s, s ^ (Eigen::Index{1} << k)) = -h_;
  }
  return m;
}

FrozenHamiltonian build_hamiltonian(const Lattice& lat, const DisorderSample& dis,
                                    double h, int max_interior) {
  if (lat.num_interior() > max_interior) {
    throw std::invalid_argument("interior has " + std::to_string(lat.num_interior()) +
                                " spins; exact diagonalization capped at " +
                                std::to_string(max_interior));
  }
  return FrozenHamiltonian(lat.num_interior(), h,
                           classical_energies(lat, dis, max_interior));
}

namespace {

using Vec = Eigen::VectorXd;

SpectralResult dense_ground(const FrozenHamiltonian& hf) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hf.dense());
  if (solver.info() != Eigen::Success) throw EigensolverError("dense eigensolver failed");
  SpectralResult r;
  r.dense = true;
  r.E0 = solver.eigenvalues()(0);
  r.E1 = hf.dim() > 1 ? solver.eigenvalues()(1) : r.E0;
  r.gap = r.E1 - r.E0;
  Vec v = solver.eigenvectors().col(0);
  r.ground_vector.assign(v.data(), v.data() + v.size());
  return r;
}

Vec apply(const FrozenHamiltonian& hf, const Vec& v) {
  Vec out(v.size());
  hf.apply(std::span<const double>(v.data(), v.size()),
           std::span<double>(out.data(), out.size()));
  return out;
}

// Adds t to the basis after two Gram-Schmidt passes; false if t is dependent.
bool append_orthonormal(std::vector<Vec>& basis, Vec t) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const Vec& b : basis) t -= b.dot(t) * b;
  }
  const double norm = t.norm();
  if (norm < 1e-12) return false;
  basis.push_back(t / norm);
  return true;
}

SpectralResult davidson(const FrozenHamiltonian& hf, const EdOptions& opts) {
  const auto n_states = static_cast<Eigen::Index>(hf.dim());
  const std::vector<double>& diag = hf.diagonal();
  constexpr int kWanted = 2;

  std::vector<Eigen::Index> order(n_states);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const int n_start = static_cast<int>(std::min<Eigen::Index>(n_states, kWanted + 2));
  std::partial_sort(order.begin(), order.begin() + n_start, order.end(),
                    [&](Eigen::Index a, Eigen::Index b) { return diag[a] < diag[b]; });

  std::vector<Vec> basis, images;
  for (int i = 0; i < n_start; ++i) {
    Vec e = Vec::Zero(n_states);
    e(order[i]) = 1.0;
    append_orthonormal(basis, e);
  }
  for (const Vec& b : basis) images.push_back(apply(hf, b));

  double scale = 1.0;
  for (double d : diag) scale = std::max(scale, std::abs(d));

  SpectralResult r;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const auto m = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd projected(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = i; j < m; ++j) {
        projected(i, j) = projected(j, i) = basis[i].dot(images[j]);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(projected);

    std::vector<Vec> ritz(kWanted), residuals(kWanted);
    std::vector<double> theta(kWanted), res_norm(kWanted);
    for (int k = 0; k < kWanted; ++k) {
      theta[k] = small.eigenvalues()(k);
      ritz[k] = Vec::Zero(n_states);
      Vec image = Vec::Zero(n_states);
      for (Eigen::Index i = 0; i < m; ++i) {
        ritz[k] += small.eigenvectors()(i, k) * basis[i];
        image += small.eigenvectors()(i, k) * images[i];
      }
      residuals[k] = image - theta[k] * ritz[k];
      res_norm[k] = residuals[k].norm();
    }
    r.iterations = it;
    if (res_norm[0] < opts.residual_tol && res_norm[1] < opts.residual_tol) {
      r.E0 = theta[0];
      r.E1 = theta[1];
      r.gap = r.E1 - r.E0;
      r.ground_vector.assign(ritz[0].data(), ritz[0].data() + n_states);
      return r;
    }

    if (m + kWanted > opts.max_basis) {
      // Restart from the current Ritz vectors of the lowest few pairs.
      std::vector<Vec> kept;
      const Eigen::Index keep = std::min<Eigen::Index>(m, kWanted + 2);
      for (Eigen::Index k = 0; k < keep; ++k) {
        Vec x = Vec::Zero(n_states);
        for (Eigen::Index i = 0; i < m; ++i) x += small.eigenvectors()(i, k) * basis[i];
        append_orthonormal(kept, x);
      }
      basis = std::move(kept);
      images.clear();
      for (const Vec& b : basis) images.push_back(apply(hf, b));
    }

    bool grew = false;
    for (int k = 0; k < kWanted; ++k) {
      if (res_norm[k] < opts.residual_tol) continue;
      Vec t(n_states);
      for (Eigen::Index s = 0; s < n_states; ++s) {
        double den = theta[k] - diag[s];
        if (std::abs(den) < 1e-8 * scale) den = std::copysign(1e-8 * scale, den);
        t(s) = residuals[k](s) / den;
      }
      if (append_orthonormal(basis, t)) {
        images.push_back(apply(hf, basis.back()));
        grew = true;
      } else if (append_orthonormal(basis, residuals[k])) {
        images.push_back(apply(hf, basis.back()));
        grew = true;
      }
    }
    if (!grew) break;
  }
  throw EigensolverError("Davidson iteration did not converge in " +
                         std::to_string(opts.max_iterations) + " iterations");
}

}  // namespace

SpectralResult ground_state_ed(const FrozenHamiltonian& hf, const EdOptions& opts) {
  SpectralResult r = hf.dim() <= std::max<std::size_t>(opts.dense_max_dim, 4)
                         ? dense_ground(hf)
                         : davidson(hf, opts);
  // Fix the sign so the largest component is positive.
  auto largest = std::max_element(r.ground_vector.begin(), r.ground_vector.end(),
                                  [](double a, double b) { return std::abs(a) < std::abs(b); });
  if (*largest < 0.0) {
    for (double& x : r.ground_vector) x = -x;
  }
  std::vector<double> hv(hf.dim());
  hf.apply(r.ground_vector, hv);
  double res2 = 0.0;
  for (std::size_t s = 0; s < hf.dim(); ++s) {
    const double d = hv[s] - r.E0 * r.ground_vector[s];
    res2 += d * d;
  }
  r.residual = std::sqrt(res2);
  return r;
}

FullSpectrum full_spectrum(const FrozenHamiltonian& hf, std::size_t max_dim) {
  if (hf.dim() > max_dim) {
    throw std::invalid_argument("full spectrum refused for dimension " +
                                std::to_string(hf.dim()) + " > " + std::to_string(max_dim));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hf.dense());
  if (solver.info() != Eigen::Success) throw EigensolverError("dense eigensolver failed");
  return FullSpectrum{solver.eigenvalues(), solver.eigenvectors()};
}

Observable identity_observable(const FrozenHamiltonian& hf) {
  const auto n = static_cast<Eigen::Index>(hf.dim());
  return Observable::Identity(n, n);
}

namespace {

Observable diagonal_sign(const Lattice& lat, std::uint64_t mask) {
  const auto n = Eigen::Index{1} << lat.num_interior();
  Observable a = Observable::Zero(n, n);
  for (Eigen::Index s = 0; s < n; ++s) {
    a(s, s) = (std::popcount(static_cast<std::uint64_t>(s) & mask) & 1) ? -1.0 : 1.0;
  }
  return a;
}

std::uint64_t site_mask(const Lattice& lat, int site) {
  const int k = lat.interior_index(site);
  return k < 0 ? 0 : std::uint64_t{1} << k;
}

}  // namespace

Observable bond_z(const Lattice& lat, int bond) {
  return diagonal_sign(lat, lat.flip_mask(bond).bits());
}

Observable site_z(const Lattice& lat, int site) {
  return diagonal_sign(lat, site_mask(lat, site));
}

Observable zz(const Lattice& lat, int site_a, int site_b) {
  return diagonal_sign(lat, site_mask(lat, site_a) ^ site_mask(lat, site_b));
}

namespace {

Eigen::VectorXd boltzmann(const FullSpectrum& spec, double beta) {
  const double e0 = spec.energies(0);
  Eigen::VectorXd w = (-(beta) * (spec.energies.array() - e0)).exp();
  return w / w.sum();
}

// (e^{-βE_n} - e^{-βE_m}) / (β (E_m - E_n)) relative to e^{-βE_0}; symmetric.
double duhamel_kernel(double em, double en, double beta) {
  const double low = std::min(em, en);
  const double x = beta * std::abs(em - en);
  const double phi = x < 1e-10 ? 1.0 - 0.5 * x : -std::expm1(-x) / x;
  return std::exp(-beta * low) * phi;
}

}  // namespace

double thermal_expectation(const FullSpectrum& spec, const Observable& a, double beta) {
  const Eigen::VectorXd p = boltzmann(spec, beta);
  const Eigen::MatrixXd rotated = spec.vectors.transpose() * a * spec.vectors;
  return p.dot(rotated.diagonal());
}

double duhamel(const FullSpectrum& spec, const Observable& a, const Observable& b,
               double beta) {
  const Eigen::MatrixXd ar = spec.vectors.transpose() * a * spec.vectors;
  const Eigen::MatrixXd br = spec.vectors.transpose() * b * spec.vectors;
  const Eigen::Index n = spec.energies.size();
  const double e0 = spec.energies(0);
  double z = 0.0;
  for (Eigen::Index m = 0; m < n; ++m) z += std::exp(-beta * (spec.energies(m) - e0));
  double acc = 0.0;
  for (Eigen::Index m = 0; m < n; ++m) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double amn = ar(m, k) * br(k, m);
      if (amn == 0.0) continue;
      acc += amn * duhamel_kernel(spec.energies(m) - e0, spec.energies(k) - e0, beta);
    }
  }
  return acc / z;
}

std::vector<double> lemma1_check(const FrozenHamiltonian& hf, const Lattice& lat,
                                 int bond, const Observable& f,
                                 std::span<const double> betas) {
  const FullSpectrum spec = full_spectrum(hf);
  const Observable sb = bond_z(lat, bond);
  std::vector<double> out;
  out.reserve(betas.size());
  for (double beta : betas) {
    out.push_back(duhamel(spec, sb, f, beta) -
                  thermal_expectation(spec, sb, beta) * thermal_expectation(spec, f, beta));
  }
  return out;
}

std::vector<double> to_rotated_frame(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  walsh_hadamard(out);
  const double scale = 1.0 / std::sqrt(static_cast<double>(out.size()));
  for (double& x : out) x *= scale;
  return out;
}

double overlap(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("overlap: dimension mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw std::invalid_argument("overlap: zero vector");
  return std::min(1.0, std::abs(ab) / std::sqrt(aa * bb));
}

double overlap(const SpectralResult& sr, const Amplitudes& amplitudes) {
  return overlap(to_rotated_frame(sr.ground_vector), amplitudes.normalized);
}

}  // namespace ktlab
