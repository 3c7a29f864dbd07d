#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ktlab/lattice.hpp"

namespace ktlab {

/// `Constant` sets every coupling to J0; it exists for ferromagnetic and
/// degenerate test fixtures.
enum class Distribution { Gaussian, Uniform, Constant };

std::string to_string(Distribution dist);
Distribution parse_distribution(std::string_view name);

/// One realization of the couplings J_b, indexed like Lattice::bonds().
struct DisorderSample {
  std::uint64_t seed = 0;
  Distribution distribution = Distribution::Gaussian;
  double J0 = 0.0;
  double J = 1.0;
  int dim = 0;
  int size = 0;
  std::vector<double> values;

  double operator[](int bond) const { return values[bond]; }
};

/// Coupling for one bond, a pure function of (seed, bond index, law).
///
/// Counter-based: the bond index is hashed together with the seed, so any
/// subset of bonds can be generated in any order with identical results.
double coupling_value(std::uint64_t seed, std::uint64_t bond_index,
                      Distribution dist, double J0, double J);

DisorderSample sample_disorder(const Lattice& lat, std::uint64_t seed,
                               Distribution dist = Distribution::Gaussian,
                               double J0 = 0.0, double J = 1.0);

/// Wraps explicit per-bond values (hand-built fixtures).
DisorderSample make_disorder(const Lattice& lat, std::vector<double> values);

inline constexpr int kDisorderSchemaVersion = 1;

void write_sample(std::ostream& os, const Lattice& lat, const DisorderSample& dis);
void save_sample(const std::filesystem::path& path, const Lattice& lat,
                 const DisorderSample& dis);

/// Parses a sample file and validates it against `lat`.
///
/// Throws std::runtime_error for malformed input and for a lattice-shape
/// mismatch (d, L, bond count or bond endpoints).
DisorderSample read_sample(std::istream& is, const Lattice& lat);
DisorderSample load_sample(const std::filesystem::path& path, const Lattice& lat);

}  // namespace ktlab
