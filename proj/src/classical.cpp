#include "ktlab/classical.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ktlab {

namespace {

// Per interior site: couplings to interior neighbours and the summed
// coupling to frozen (+1) neighbours.
struct LocalTerms {
  std::vector<std::vector<std::pair<int, double>>> interior;
  std::vector<double> frozen;
};

LocalTerms local_terms(const Lattice& lat, const DisorderSample& dis) {
  const int n = lat.num_interior();
  LocalTerms t;
  t.interior.resize(n);
  t.frozen.assign(n, 0.0);
  for (int b = 0; b < lat.num_bonds(); ++b) {
    const Bond& bond = lat.bond(b);
    int a = lat.interior_index(bond.i);
    int c = lat.interior_index(bond.j);
    if (a >= 0 && c >= 0) {
      t.interior[a].emplace_back(c, dis[b]);
      t.interior[c].emplace_back(a, dis[b]);
    } else if (a >= 0) {
      t.frozen[a] += dis[b];
    } else if (c >= 0) {
      t.frozen[c] += dis[b];
    }
  }
  return t;
}

int spin_of(std::uint64_t bits, int k) { return ((bits >> k) & 1U) ? -1 : 1; }

// Energy change from flipping interior site k in `bits`.
double flip_delta(const LocalTerms& t, std::uint64_t bits, int k) {
  double field = t.frozen[k];
  for (auto [other, J] : t.interior[k]) field += J * spin_of(bits, other);
  return 2.0 * spin_of(bits, k) * field;
}

// Visits every configuration with its energy. Energies are recomputed from
// scratch at the start of each 1024-configuration block and updated along a
// Gray code inside it, which bounds rounding drift.
template <typename Visit>
void for_each_energy(const Lattice& lat, const DisorderSample& dis, Visit&& visit) {
  const int n = lat.num_interior();
  const LocalTerms terms = local_terms(lat, dis);
  const int low_bits = std::min(n, 10);
  const std::uint64_t block = std::uint64_t{1} << low_bits;
  const std::uint64_t blocks = std::uint64_t{1} << (n - low_bits);
  for (std::uint64_t hi = 0; hi < blocks; ++hi) {
    std::uint64_t bits = hi << low_bits;
    double e = classical_energy(lat, dis, bits);
    visit(bits, e);
    for (std::uint64_t t = 1; t < block; ++t) {
      int k = std::countr_zero(t);
      e += flip_delta(terms, bits, k);
      bits ^= std::uint64_t{1} << k;
      visit(bits, e);
    }
  }
}

}  // namespace

SpinConfig SpinConfig::from_bits(const Lattice& lat, std::uint64_t interior_bits) {
  SpinConfig c;
  c.bits_ = interior_bits;
  c.spins_.assign(lat.num_sites(), 1);
  for (int k = 0; k < lat.num_interior(); ++k) {
    c.spins_[lat.interior_site(k)] = spin_of(interior_bits, k);
  }
  return c;
}

double classical_energy(const Lattice& lat, const DisorderSample& dis,
                        std::uint64_t interior_bits) {
  double e = 0.0;
  for (int b = 0; b < lat.num_bonds(); ++b) {
    // Boundary endpoints are +1; the bond is unsatisfied by an odd number of
    // flipped interior endpoints.
    int flipped = std::popcount(lat.flip_mask(b).bits() & interior_bits);
    e -= dis[b] * ((flipped & 1) ? -1.0 : 1.0);
  }
  return e;
}

ClassicalGroundState solve_classical(const Lattice& lat, const DisorderSample& dis,
                                     const ClassicalOptions& opts) {
  const int n = lat.num_interior();
  if (n > opts.max_interior) {
    throw std::invalid_argument("interior has " + std::to_string(n) +
                                " spins; exhaustive solve is capped at " +
                                std::to_string(opts.max_interior));
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double e1 = kInf, e2 = kInf;
  std::uint64_t c1 = 0, c2 = 0;
  for_each_energy(lat, dis, [&](std::uint64_t bits, double e) {
    if (e < e1 || (e == e1 && bits < c1)) {
      e2 = e1;
      c2 = c1;
      e1 = e;
      c1 = bits;
    } else if (e < e2 || (e == e2 && bits < c2)) {
      e2 = e;
      c2 = bits;
    }
  });

  ClassicalGroundState gs;
  gs.s_plus = SpinConfig::from_bits(lat, c1);
  gs.D = SubsetKey(c1);
  gs.E_cl = classical_energy(lat, dis, c1);
  if (n == 0 || e2 == kInf) {
    gs.E_second = kInf;
    gs.gap1 = kInf;
  } else {
    gs.E_second = classical_energy(lat, dis, c2);
    gs.gap1 = gs.E_second - gs.E_cl;
    gs.lowest_excitation = SubsetKey(c1 ^ c2);
  }
  gs.unique = gs.gap1 > opts.tie_tolerance * dis.J;
  gs.bond_sign.resize(lat.num_bonds());
  for (int b = 0; b < lat.num_bonds(); ++b) {
    const Bond& bond = lat.bond(b);
    gs.bond_sign[b] = gs.s_plus[bond.i] * gs.s_plus[bond.j];
  }
  return gs;
}

std::vector<double> classical_energies(const Lattice& lat, const DisorderSample& dis,
                                       int max_interior) {
  const int n = lat.num_interior();
  if (n > max_interior) {
    throw std::invalid_argument("interior has " + std::to_string(n) +
                                " spins; energy table is capped at " +
                                std::to_string(max_interior));
  }
  std::vector<double> out(std::size_t{1} << n);
  for_each_energy(lat, dis, [&](std::uint64_t bits, double e) { out[bits] = e; });
  return out;
}

double boundary_coupling(const Lattice& lat, const DisorderSample& dis,
                         const ClassicalGroundState& gs, SubsetKey x) {
  double sum = 0.0;
  for (int b = 0; b < lat.num_bonds(); ++b) {
    if (in_boundary(lat, b, x)) sum += dis[b] * gs.s_bond(b);
  }
  return sum;
}

double excitation_energy(const ClassicalGroundState& gs, const DisorderSample& dis,
                         const Lattice& lat, SubsetKey x) {
  return 2.0 * boundary_coupling(lat, dis, gs, x);
}

std::vector<double> classical_bond_expectations(const Lattice& lat,
                                                const DisorderSample& dis,
                                                double beta) {
  const std::vector<double> energies = classical_energies(lat, dis);
  const double e_min = *std::min_element(energies.begin(), energies.end());
  std::vector<double> acc(lat.num_bonds(), 0.0);
  double z = 0.0;
  for (std::uint64_t bits = 0; bits < energies.size(); ++bits) {
    double weight = std::exp(-beta * (energies[bits] - e_min));
    if (weight == 0.0) continue;
    z += weight;
    for (int b = 0; b < lat.num_bonds(); ++b) {
      int flipped = std::popcount(lat.flip_mask(b).bits() & bits);
      acc[b] += (flipped & 1) ? -weight : weight;
    }
  }
  for (double& a : acc) a /= z;
  return acc;
}

BondConsistencyReport verify_bond_consistency(const Lattice& lat,
                                              const DisorderSample& dis,
                                              const ClassicalGroundState& gs,
                                              double beta, double tolerance) {
  if (!gs.unique) {
    throw std::invalid_argument("bond consistency requires a unique ground state");
  }
  BondConsistencyReport report;
  report.beta = beta;
  report.tolerance = tolerance;

  auto bond_between = [&](int a, int c) {
    for (int b : lat.incident_bonds(a)) {
      const Bond& bond = lat.bond(b);
      if (bond.i == c || bond.j == c) return b;
    }
    return -1;
  };
  const int d = lat.dim();
  for (int i = 0; i < lat.num_sites(); ++i) {
    for (int e = 0; e < d; ++e) {
      for (int f = e + 1; f < d; ++f) {
        std::vector<int> cj = lat.coords(i), ck = lat.coords(i), cl = lat.coords(i);
        cj[e] += 1;
        ck[f] += 1;
        cl[e] += 1;
        cl[f] += 1;
        int j = lat.site_at(cj), k = lat.site_at(ck), l = lat.site_at(cl);
        if (j < 0 || k < 0 || l < 0) continue;
        int product = gs.s_bond(bond_between(i, j)) * gs.s_bond(bond_between(j, l)) *
                      gs.s_bond(bond_between(l, k)) * gs.s_bond(bond_between(k, i));
        ++report.plaquettes;
        if (product != 1) ++report.plaquette_violations;
      }
    }
  }
  if (report.plaquette_violations > 0) {
    throw std::logic_error("plaquette product violated on a spin configuration");
  }

  const std::vector<double> thermal = classical_bond_expectations(lat, dis, beta);
  for (int b = 0; b < lat.num_bonds(); ++b) {
    report.max_bond_deviation =
        std::max(report.max_bond_deviation, std::abs(thermal[b] - gs.s_bond(b)));
  }
  report.passed = report.max_bond_deviation <= tolerance;
  return report;
}

}  // namespace ktlab
