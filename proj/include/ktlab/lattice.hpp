#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

namespace ktlab {

/// Subset of interior sites, stored as a bit pattern over interior indices.
///
/// Bit k set means interior site k belongs to the set. The representation is
/// canonical, so equality and hashing are by value and the symmetric
/// difference is a single XOR.
class SubsetKey {
 public:
  constexpr SubsetKey() = default;
  constexpr explicit SubsetKey(std::uint64_t bits) : bits_(bits) {}

  static SubsetKey from_indices(const std::vector<int>& interior_indices);
  static constexpr SubsetKey singleton(int interior_index) {
    return SubsetKey(std::uint64_t{1} << interior_index);
  }

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr bool contains(int interior_index) const {
    return (bits_ >> interior_index) & 1U;
  }
  constexpr bool is_subset_of(SubsetKey other) const {
    return (bits_ & ~other.bits_) == 0;
  }

  /// Sorted interior indices.
  std::vector<int> indices() const;

  friend constexpr bool operator==(SubsetKey, SubsetKey) = default;
  friend constexpr bool operator<(SubsetKey a, SubsetKey b) {
    return a.bits_ < b.bits_;
  }

 private:
  std::uint64_t bits_ = 0;
};

constexpr SubsetKey sym_diff(SubsetKey x, SubsetKey y) {
  return SubsetKey(x.bits() ^ y.bits());
}

struct SubsetKeyHash {
  std::size_t operator()(SubsetKey key) const noexcept {
    std::uint64_t z = key.bits() + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return static_cast<std::size_t>(z ^ (z >> 31));
  }
};

enum class BondKind { InteriorInterior, InteriorBoundary, FrozenFrozen };

struct Bond {
  int i = 0;  // site index, i < j
  int j = 0;
  BondKind kind = BondKind::InteriorInterior;
};

/// Open hypercubic box Z^d ∩ (-L/2, L/2]^d with its outer shell frozen.
///
/// Sites are ordered lexicographically by coordinate (first axis slowest).
/// Interior sites (the box of side L-2) are additionally numbered 0..n-1 in
/// site order; SubsetKey bits and configuration bit patterns use that
/// numbering. Immutable after construction.
class Lattice {
 public:
  int dim() const { return dim_; }
  int size() const { return size_; }
  int num_sites() const { return static_cast<int>(coords_.size()); }
  int num_interior() const { return static_cast<int>(interior_sites_.size()); }
  int num_bonds() const { return static_cast<int>(bonds_.size()); }

  const std::vector<int>& coords(int site) const { return coords_[site]; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  const Bond& bond(int b) const { return bonds_[b]; }
  /// Bond indices incident to a site.
  const std::vector<int>& incident_bonds(int site) const {
    return adjacency_[site];
  }

  bool is_interior(int site) const { return interior_index_[site] >= 0; }
  /// Interior numbering of a site, or -1 for boundary-shell sites.
  int interior_index(int site) const { return interior_index_[site]; }
  int interior_site(int interior_index) const {
    return interior_sites_[interior_index];
  }
  /// Site index for a coordinate vector, or -1 when outside the box.
  int site_at(const std::vector<int>& coords) const;

  /// Interior endpoints of a bond as a subset; flipping this set is the
  /// action of the bond's σ^x σ^x term with the boundary frozen.
  SubsetKey flip_mask(int b) const { return flip_masks_[b]; }
  /// Interior neighbours of each interior site (interior numbering).
  const std::vector<std::vector<int>>& interior_graph() const {
    return interior_graph_;
  }
  SubsetKey all_interior() const;

  /// Any box with side ≥ 3 and at most 64 interior sites. `build_lattice`
  /// is the checked entry point; odd sides are reachable only through here.
  static Lattice box(int d, int L);

 private:
  Lattice() = default;

  int dim_ = 0;
  int size_ = 0;
  std::vector<std::vector<int>> coords_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<int> interior_index_;
  std::vector<int> interior_sites_;
  std::vector<SubsetKey> flip_masks_;
  std::vector<std::vector<int>> interior_graph_;
};

/// Checked constructor: d ≥ 1, L even and ≥ 4.
Lattice build_lattice(int d, int L);

/// One interior site with 2d frozen neighbours (the L = 3 box).
Lattice single_site_lattice(int d = 1);

/// Bonds with exactly one endpoint in X (indices into lat.bonds()).
std::vector<int> bond_boundary(const Lattice& lat, SubsetKey x);

/// True when bond b has exactly one endpoint in X. Boundary endpoints are
/// never in X, so only the interior endpoints matter.
inline bool in_boundary(const Lattice& lat, int b, SubsetKey x) {
  return std::popcount(lat.flip_mask(b).bits() & x.bits()) == 1;
}

/// True when X induces a connected subgraph of the interior grid.
bool is_connected(const Lattice& lat, SubsetKey x);

/// Size of the smallest connected set of interior sites containing X.
///
/// Node-weighted Steiner problem solved with the Dreyfus-Wagner recursion on
/// the interior grid: w(X) = (minimum Steiner tree edge count) + 1. Results
/// are memoized; the cache is guarded for concurrent use.
class WeightOracle {
 public:
  explicit WeightOracle(const Lattice& lat);

  int weight(SubsetKey x) const;
  /// Shortest-path distance between interior sites inside the interior grid.
  int distance(int a, int b) const { return dist_[a * n_ + b]; }

 private:
  int steiner_weight(SubsetKey x) const;

  const Lattice* lat_;
  int n_;
  std::vector<int> dist_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<SubsetKey, int, SubsetKeyHash> cache_;
};

/// Convenience wrapper around a throwaway oracle.
int connected_weight(const Lattice& lat, SubsetKey x);

struct TruncationOptions {
  std::size_t max_keys = 2'000'000;
};

/// All nonempty X ⊆ interior with w(X) ≤ w_max, ordered by (|X|, bits).
std::vector<SubsetKey> enumerate_truncation(const Lattice& lat, int w_max,
                                            const TruncationOptions& opts = {});

}  // namespace ktlab
