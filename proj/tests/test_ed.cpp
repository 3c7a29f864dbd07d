#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "ktlab/classical.hpp"
#include "ktlab/ed.hpp"
#include "ktlab/kt_solver.hpp"

using namespace ktlab;

namespace {

// Hamiltonian written directly in the rotated frame: bonds flip their
// interior endpoints, the field is diagonal.
Eigen::MatrixXd rotated_hamiltonian(const Lattice& lat, const DisorderSample& dis, double h) {
  const int n = lat.num_interior();
  const Eigen::Index N = Eigen::Index{1} << n;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
  for (Eigen::Index s = 0; s < N; ++s) {
    for (int k = 0; k < n; ++k) H(s, s) -= h * ((s >> k & 1) ? -1.0 : 1.0);
    for (int b = 0; b < lat.num_bonds(); ++b) {
      H(s, s ^ static_cast<Eigen::Index>(lat.flip_mask(b).bits())) -= dis[b];
    }
  }
  return H;
}

// Duhamel function by Gauss-Legendre quadrature of the imaginary-time integral.
double duhamel_quadrature(const Eigen::MatrixXd& H, const Eigen::MatrixXd& A,
                          const Eigen::MatrixXd& B, double beta) {
  static const double x[] = {-0.9739065285171717, -0.8650633666889845, -0.6794095682990244,
                             -0.4333953941292472, -0.1488743389816312, 0.1488743389816312,
                             0.4333953941292472,  0.6794095682990244,  0.8650633666889845,
                             0.9739065285171717};
  static const double w[] = {0.0666713443086881, 0.1494513491505806, 0.2190863625159820,
                             0.2692667193099963, 0.2955242247147529, 0.2955242247147529,
                             0.2692667193099963, 0.2190863625159820, 0.1494513491505806,
                             0.0666713443086881};
  const double shift = H.diagonal().minCoeff();
  const Eigen::MatrixXd Hs =
      H - shift * Eigen::MatrixXd::Identity(H.rows(), H.cols());
  const double z = (-beta * Hs).exp().trace();
  double acc = 0.0;
  for (int panel = 0; panel < 8; ++panel) {
    for (int q = 0; q < 10; ++q) {
      const double t = (panel + 0.5 + 0.5 * x[q]) / 8.0;
      const Eigen::MatrixXd left = (-beta * (1.0 - t) * Hs).exp();
      const Eigen::MatrixXd right = (-beta * t * Hs).exp();
      acc += w[q] / 16.0 * (left * A * right * B).trace();
    }
  }
  return acc / z;
}

double frozen_constant(const Lattice& lat, const DisorderSample& dis) {
  double c = 0.0;
  for (int b = 0; b < lat.num_bonds(); ++b) {
    if (lat.bond(b).kind == BondKind::FrozenFrozen) c -= dis[b];
  }
  return c;
}

}  // namespace

TEST_SUITE("ed") {

TEST_CASE("single interior site is a two-level system") {
  const Lattice lat = single_site_lattice(2);
  const DisorderSample dis = sample_disorder(lat, 4);
  double jhat = 0.0;
  for (int b = 0; b < lat.num_bonds(); ++b) {
    if (lat.bond(b).kind != BondKind::FrozenFrozen) jhat += dis[b];
  }
  const double c = frozen_constant(lat, dis);
  const double h = 0.3;
  const FrozenHamiltonian hf = build_hamiltonian(lat, dis, h);
  const Eigen::MatrixXd m = hf.dense();
  REQUIRE(m.rows() == 2);
  CHECK(m(0, 0) == doctest::Approx(c - jhat).epsilon(1e-15));
  CHECK(m(1, 1) == doctest::Approx(c + jhat).epsilon(1e-15));
  CHECK(m(0, 1) == -h);
  CHECK(m(1, 0) == -h);
  const SpectralResult r = ground_state_ed(hf);
  CHECK(std::abs(r.E0 - (c - std::sqrt(jhat * jhat + h * h))) < 1e-12);
  CHECK(r.gap == doctest::Approx(2.0 * std::sqrt(jhat * jhat + h * h)).epsilon(1e-13));
}

TEST_CASE("matrix structure") {
  const Lattice lat = build_lattice(2, 4);
  const DisorderSample dis = sample_disorder(lat, 2);
  const double h = 0.17;
  const FrozenHamiltonian hf = build_hamiltonian(lat, dis, h);
  const Eigen::MatrixXd m = hf.dense();
  CHECK((m - m.transpose()).norm() == 0.0);
  for (Eigen::Index s = 0; s < m.rows(); ++s) {
    int couplings = 0;
    for (Eigen::Index t = 0; t < m.cols(); ++t) {
      if (t == s || m(s, t) == 0.0) continue;
      CHECK(m(s, t) == -h);
      ++couplings;
    }
    CHECK(couplings == lat.num_interior());
    CHECK(hf.entry(s, s) == m(s, s));
  }
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(m.rows(), -1.0, 2.0);
  std::vector<double> out(m.rows());
  hf.apply(std::span<const double>(v.data(), v.size()), out);
  const Eigen::VectorXd ref = m * v;
  for (Eigen::Index s = 0; s < m.rows(); ++s) CHECK(out[s] == doctest::Approx(ref(s)).epsilon(1e-14));
  CHECK_THROWS_AS(build_hamiltonian(lat, dis, h, 3), std::invalid_argument);
}

TEST_CASE("zero field reproduces the classical spectrum") {
  const Lattice lat = build_lattice(2, 4);
  for (std::uint64_t seed : {1, 2, 3}) {
    const DisorderSample dis = sample_disorder(lat, seed);
    const FrozenHamiltonian hf = build_hamiltonian(lat, dis, 0.0);
    std::vector<double> classical = classical_energies(lat, dis);
    std::sort(classical.begin(), classical.end());
    const FullSpectrum spec = full_spectrum(hf);
    for (std::size_t k = 0; k < classical.size(); ++k) {
      CHECK(spec.energies(static_cast<Eigen::Index>(k)) == doctest::Approx(classical[k]).epsilon(1e-14));
    }
    const ClassicalGroundState gs = solve_classical(lat, dis);
    const SpectralResult r = ground_state_ed(hf);
    CHECK(r.E0 == doctest::Approx(gs.E_cl).epsilon(1e-14));
    CHECK(r.gap == doctest::Approx(gs.gap1).epsilon(1e-12));
  }
}

TEST_CASE("gap moves continuously with the field") {
  const Lattice lat = build_lattice(2, 4);
  const DisorderSample dis = sample_disorder(lat, 5);
  const ClassicalGroundState gs = solve_classical(lat, dis);
  const SpectralResult r = ground_state_ed(build_hamiltonian(lat, dis, 1e-3));
  CHECK(std::abs(r.gap - gs.gap1) < 1e-3);
  CHECK(r.gap > 0.0);
}

TEST_CASE("Davidson agrees with the dense solver") {
  EdOptions iterative;
  iterative.dense_max_dim = 0;
  for (auto [d, L, seed] : {std::tuple{3, 4, 1}, std::tuple{1, 12, 2}, std::tuple{2, 6, 3}}) {
    const Lattice lat = build_lattice(d, L);
    const DisorderSample dis = sample_disorder(lat, seed);
    const FrozenHamiltonian hf = build_hamiltonian(lat, dis, 0.2);
    const SpectralResult it = ground_state_ed(hf, iterative);
    CHECK_FALSE(it.dense);
    CHECK(it.residual < 1e-10);
    double norm2 = 0.0;
    for (double x : it.ground_vector) norm2 += x * x;
    CHECK(std::abs(norm2 - 1.0) < 1e-12);
    if (hf.dim() <= 1024) {
      const SpectralResult dense = ground_state_ed(hf);
      CHECK(dense.dense);
      CHECK(std::abs(it.E0 - dense.E0) < 1e-10);
      CHECK(std::abs(it.E1 - dense.E1) < 1e-9);
      CHECK(overlap(it.ground_vector, dense.ground_vector) == doctest::Approx(1.0).epsilon(1e-10));
    } else {
      CHECK(it.E0 <= it.E1);
      CHECK(it.E0 < solve_classical(lat, dis).E_cl);
    }
  }
}

TEST_CASE("Duhamel function: identities") {
  const Lattice lat = build_lattice(2, 4);
  const DisorderSample dis = sample_disorder(lat, 7);
  const FrozenHamiltonian hf = build_hamiltonian(lat, dis, 0.3);
  const FullSpectrum spec = full_spectrum(hf);
  const Observable id = identity_observable(hf);
  for (double beta : {0.5, 3.0, 40.0}) {
    CHECK(duhamel(spec, id, id, beta) == doctest::Approx(1.0).epsilon(1e-13));
    const Observable a = bond_z(lat, 5), b = site_z(lat, lat.interior_site(0));
    CHECK(duhamel(spec, a, b, beta) == doctest::Approx(duhamel(spec, b, a, beta)).epsilon(1e-12));
    CHECK(duhamel(spec, a, a, beta) >= 0.0);
    // Bogoliubov bound: (A, A) <= <A^2> = 1.
    CHECK(duhamel(spec, a, a, beta) <= 1.0 + 1e-12);
  }
}

TEST_CASE("Duhamel function matches imaginary-time quadrature") {
  const Lattice lat = build_lattice(2, 4);
  const DisorderSample dis = sample_disorder(lat, 9);
  const double h = 0.4;
  const FrozenHamiltonian hf = build_hamiltonian(lat, dis, h);
  const FullSpectrum spec = full_spectrum(hf);
  const Eigen::MatrixXd H = hf.dense();
  const Observable a = bond_z(lat, 7);
  const Observable b = zz(lat, lat.interior_site(0), lat.interior_site(3));
  for (double beta : {0.3, 1.0, 2.5}) {
    CHECK(duhamel(spec, a, b, beta) ==
          doctest::Approx(duhamel_quadrature(H, a, b, beta)).epsilon(1e-10));
  }
}

TEST_CASE("commuting observables at zero field give classical correlations") {
  const Lattice lat = build_lattice(2, 4);
  const DisorderSample dis = sample_disorder(lat, 3);
  const FullSpectrum spec = full_spectrum(build_hamiltonian(lat, dis, 0.0));
  const std::vector<double> e = classical_energies(lat, dis);
  const double beta = 2.0;
  const int b1 = 4, b2 = 9;
  double z = 0.0, corr = 0.0;
  const double e_min = *std::min_element(e.begin(), e.end());
  for (std::uint64_t s = 0; s < e.size(); ++s) {
    const double w = std::exp(-beta * (e[s] - e_min));
    const int s1 = (std::popcount(s & lat.flip_mask(b1).bits()) & 1) ? -1 : 1;
    const int s2 = (std::popcount(s & lat.flip_mask(b2).bits()) & 1) ? -1 : 1;
    z += w;
    corr += w * s1 * s2;
  }
  CHECK(duhamel(spec, bond_z(lat, b1), bond_z(lat, b2), beta) ==
        doctest::Approx(corr / z).epsilon(1e-12));
}

TEST_CASE("zero-field bond autocorrelation tends to one") {
  const Lattice lat = build_lattice(2, 4);
  const DisorderSample dis = sample_disorder(lat, 1);
  const FullSpectrum spec = full_spectrum(build_hamiltonian(lat, dis, 0.0));
  for (int b = 0; b < lat.num_bonds(); ++b) {
    CHECK(duhamel(spec, bond_z(lat, b), bond_z(lat, b), 60.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("connected correlation: identity and zero field") {
  const Lattice lat = build_lattice(2, 4);
  const DisorderSample dis = sample_disorder(lat, 1);
  const ClassicalGroundState gs = solve_classical(lat, dis);
  const std::vector<double> betas = {1.0, 5.0, 10.0, 25.0, 50.0};
  const FrozenHamiltonian hf0 = build_hamiltonian(lat, dis, 0.0);
  const FrozenHamiltonian hf = build_hamiltonian(lat, dis, 0.1);
  for (int b = 0; b < lat.num_bonds(); ++b) {
    for (double v : lemma1_check(hf, lat, b, identity_observable(hf), betas)) {
      CHECK(std::abs(v) < 1e-13);
    }
    // At h = 0 the value is 1 - <s_b>^2, exponentially small in beta * gap.
    const auto v = lemma1_check(hf0, lat, b, bond_z(lat, b), betas);
    const FullSpectrum spec = full_spectrum(hf0);
    for (std::size_t k = 0; k < betas.size(); ++k) {
      const double m = thermal_expectation(spec, bond_z(lat, b), betas[k]);
      CHECK(v[k] == doctest::Approx(1.0 - m * m).epsilon(1e-9));
      CHECK(v[k] <= 4.0 * 16.0 * std::exp(-betas[k] * gs.gap1) + 1e-14);
    }
  }
}

TEST_CASE("connected correlation is the field derivative over beta") {
  const Lattice lat = build_lattice(2, 4);
  const DisorderSample dis = sample_disorder(lat, 2);
  const double h = 0.1;
  const FrozenHamiltonian hf = build_hamiltonian(lat, dis, h);
  const double eps = 1e-5;
  for (int b : {4, 10}) {
    const int site = lat.is_interior(lat.bond(b).i) ? lat.bond(b).i : lat.bond(b).j;
    for (const Observable& f : {bond_z(lat, b), site_z(lat, site)}) {
      for (double beta : {1.0, 10.0}) {
        const std::vector<double> betas = {beta};
        const double value = lemma1_check(hf, lat, b, f, betas)[0];
        auto expectation = [&](double shift) {
          DisorderSample moved = dis;
          moved.values[b] += shift;
          return thermal_expectation(full_spectrum(build_hamiltonian(lat, moved, h)), f, beta);
        };
        const double derivative = (expectation(eps) - expectation(-eps)) / (2.0 * eps);
        CHECK(value == doctest::Approx(derivative / beta).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("low-temperature expectations approach the ground state") {
  const Lattice lat = build_lattice(2, 4);
  const DisorderSample dis = sample_disorder(lat, 6);
  const FrozenHamiltonian hf = build_hamiltonian(lat, dis, 0.2);
  const FullSpectrum spec = full_spectrum(hf);
  const SpectralResult gs = ground_state_ed(hf);
  const double beta = 40.0;
  for (int b = 0; b < lat.num_bonds(); ++b) {
    const Observable a = bond_z(lat, b);
    const Eigen::Map<const Eigen::VectorXd> v(gs.ground_vector.data(), gs.ground_vector.size());
    const double ground = v.dot(a * v);
    CHECK(std::abs(thermal_expectation(spec, a, beta) - ground) <=
          2.0 * 16.0 * std::exp(-beta * gs.gap) + 1e-12);
  }
  CHECK_THROWS_AS(full_spectrum(hf, 8), std::invalid_argument);
}

TEST_CASE("overlap") {
  const std::vector<double> a = {1.0, 2.0, -1.0, 0.5};
  const std::vector<double> b = {2.0, 4.0, -2.0, 1.0};
  const std::vector<double> c = {2.0, -1.0, 0.0, 0.0};
  CHECK(overlap(a, a) == doctest::Approx(1.0));
  CHECK(overlap(a, b) == doctest::Approx(1.0));
  CHECK(overlap(a, c) == 0.0);
  const std::vector<double> short_vec = {1.0};
  CHECK_THROWS_AS(overlap(a, short_vec), std::invalid_argument);
  const std::vector<double> zero = {0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(overlap(a, zero), std::invalid_argument);
  const std::vector<double> r = to_rotated_frame(a);
  double na = 0.0, nr = 0.0;
  for (double x : a) na += x * x;
  for (double x : r) nr += x * x;
  CHECK(nr == doctest::Approx(na));
}

TEST_CASE("rotated-frame Hamiltonian: same spectrum, rotated ground vector") {
  const Lattice lat = build_lattice(2, 4);
  for (std::uint64_t seed : {1, 2, 3}) {
    const DisorderSample dis = sample_disorder(lat, seed);
    const double h = 0.15;
    const FrozenHamiltonian hf = build_hamiltonian(lat, dis, h);
    const Eigen::MatrixXd Ht = rotated_hamiltonian(lat, dis, h);
    CHECK((Ht - Ht.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Ht);
    const FullSpectrum spec = full_spectrum(hf);
    CHECK((solver.eigenvalues() - spec.energies).cwiseAbs().maxCoeff() < 1e-12);

    const SpectralResult r = ground_state_ed(hf);
    const Eigen::VectorXd v0 = solver.eigenvectors().col(0);
    const std::vector<double> rotated_ref(v0.data(), v0.data() + v0.size());
    CHECK(overlap(to_rotated_frame(r.ground_vector), rotated_ref) ==
          doctest::Approx(1.0).epsilon(1e-12));

    const ClassicalGroundState gs = solve_classical(lat, dis);
    SolverConfig cfg;
    cfg.w_max = 4;
    cfg.k_max = 12;
    const FixedPointResult kt = solve_fixed_point(make_problem(lat, dis, gs, h, cfg), cfg);
    const Amplitudes amp = wavefunction_amplitudes(kt.state);
    CHECK(overlap(amp.normalized, rotated_ref) > 1.0 - 1e-9);
    CHECK(overlap(r, amp) > 1.0 - 1e-9);
    CHECK(kt.energy == doctest::Approx(r.E0).epsilon(1e-10));
  }
}

}  // TEST_SUITE
