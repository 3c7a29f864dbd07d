#include "ktlab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace ktlab {

SubsetKey SubsetKey::from_indices(const std::vector<int>& interior_indices) {
  std::uint64_t bits = 0;
  for (int k : interior_indices) {
    if (k < 0 || k >= 64) {
      throw std::out_of_range("SubsetKey: interior index " + std::to_string(k) +
                              " outside [0, 64)");
    }
    bits |= std::uint64_t{1} << k;
  }
  return SubsetKey(bits);
}

std::vector<int> SubsetKey::indices() const {
  std::vector<int> out;
  out.reserve(size());
  for (std::uint64_t b = bits_; b != 0; b &= b - 1) {
    out.push_back(std::countr_zero(b));
  }
  return out;
}

Lattice Lattice::box(int d, int L) {
  if (d < 1) throw std::invalid_argument("lattice dimension must be >= 1");
  if (L < 3) throw std::invalid_argument("lattice side must be >= 3");
  double total = std::pow(static_cast<double>(L), d);
  if (total > 1e7) throw std::invalid_argument("lattice too large");

  const int lo = static_cast<int>(std::floor(-L / 2.0)) + 1;
  const int inner_lo = static_cast<int>(std::floor(-(L - 2) / 2.0)) + 1;
  const int inner_hi = static_cast<int>(std::floor((L - 2) / 2.0));

  Lattice lat;
  lat.dim_ = d;
  lat.size_ = L;
  const int n_sites = static_cast<int>(total);
  lat.coords_.resize(n_sites, std::vector<int>(d));
  lat.interior_index_.assign(n_sites, -1);
  for (int s = 0; s < n_sites; ++s) {
    int rem = s;
    bool interior = true;
    for (int k = d - 1; k >= 0; --k) {
      int x = lo + rem % L;
      rem /= L;
      lat.coords_[s][k] = x;
      if (x < inner_lo || x > inner_hi) interior = false;
    }
    if (interior) {
      lat.interior_index_[s] = static_cast<int>(lat.interior_sites_.size());
      lat.interior_sites_.push_back(s);
    }
  }
  if (lat.interior_sites_.empty()) {
    throw std::invalid_argument("lattice has no interior sites");
  }
  if (lat.interior_sites_.size() > 64) {
    throw std::invalid_argument("lattice has " +
                                std::to_string(lat.interior_sites_.size()) +
                                " interior sites; at most 64 are supported");
  }

  lat.adjacency_.resize(n_sites);
  lat.interior_graph_.resize(lat.interior_sites_.size());
  int stride = 1;
  std::vector<int> strides(d);
  for (int k = d - 1; k >= 0; --k) {
    strides[k] = stride;
    stride *= L;
  }
  for (int s = 0; s < n_sites; ++s) {
    for (int k = 0; k < d; ++k) {
      if (lat.coords_[s][k] == lo + L - 1) continue;
      int t = s + strides[k];
      Bond bond{s, t, BondKind::InteriorInterior};
      bool si = lat.is_interior(s);
      bool ti = lat.is_interior(t);
      if (si && ti) {
        bond.kind = BondKind::InteriorInterior;
        lat.interior_graph_[lat.interior_index_[s]].push_back(
            lat.interior_index_[t]);
        lat.interior_graph_[lat.interior_index_[t]].push_back(
            lat.interior_index_[s]);
      } else if (si || ti) {
        bond.kind = BondKind::InteriorBoundary;
      } else {
        bond.kind = BondKind::FrozenFrozen;
      }
      std::uint64_t mask = 0;
      if (si) mask |= std::uint64_t{1} << lat.interior_index_[s];
      if (ti) mask |= std::uint64_t{1} << lat.interior_index_[t];
      int b = static_cast<int>(lat.bonds_.size());
      lat.bonds_.push_back(bond);
      lat.flip_masks_.emplace_back(mask);
      lat.adjacency_[s].push_back(b);
      lat.adjacency_[t].push_back(b);
    }
  }
  for (auto& nbrs : lat.interior_graph_) std::sort(nbrs.begin(), nbrs.end());
  return lat;
}

int Lattice::site_at(const std::vector<int>& coords) const {
  if (static_cast<int>(coords.size()) != dim_) return -1;
  const int lo = static_cast<int>(std::floor(-size_ / 2.0)) + 1;
  int s = 0;
  for (int k = 0; k < dim_; ++k) {
    int off = coords[k] - lo;
    if (off < 0 || off >= size_) return -1;
    s = s * size_ + off;
  }
  return s;
}

SubsetKey Lattice::all_interior() const {
  const int n = num_interior();
  return SubsetKey(n == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1);
}

Lattice build_lattice(int d, int L) {
  if (d < 1) throw std::invalid_argument("lattice dimension must be >= 1");
  if (L < 4 || L % 2 != 0) {
    throw std::invalid_argument("lattice side L must be even and >= 4, got " +
                                std::to_string(L));
  }
  return Lattice::box(d, L);
}

Lattice single_site_lattice(int d) { return Lattice::box(d, 3); }

std::vector<int> bond_boundary(const Lattice& lat, SubsetKey x) {
  std::vector<int> out;
  if (x.empty()) return out;
  for (int b = 0; b < lat.num_bonds(); ++b) {
    if (in_boundary(lat, b, x)) out.push_back(b);
  }
  return out;
}

bool is_connected(const Lattice& lat, SubsetKey x) {
  if (x.empty()) return false;
  const auto& graph = lat.interior_graph();
  std::uint64_t seen = x.bits() & (~x.bits() + 1);
  std::vector<int> stack{std::countr_zero(x.bits())};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int u : graph[v]) {
      std::uint64_t bit = std::uint64_t{1} << u;
      if ((x.bits() & bit) && !(seen & bit)) {
        seen |= bit;
        stack.push_back(u);
      }
    }
  }
  return seen == x.bits();
}

WeightOracle::WeightOracle(const Lattice& lat)
    : lat_(&lat), n_(lat.num_interior()) {
  constexpr int kInf = std::numeric_limits<int>::max() / 4;
  dist_.assign(static_cast<std::size_t>(n_) * n_, kInf);
  const auto& graph = lat.interior_graph();
  for (int src = 0; src < n_; ++src) {
    std::deque<int> queue{src};
    dist_[src * n_ + src] = 0;
    while (!queue.empty()) {
      int v = queue.front();
      queue.pop_front();
      for (int u : graph[v]) {
        if (dist_[src * n_ + u] == kInf) {
          dist_[src * n_ + u] = dist_[src * n_ + v] + 1;
          queue.push_back(u);
        }
      }
    }
  }
}

int WeightOracle::weight(SubsetKey x) const {
  if (x.empty()) {
    throw std::invalid_argument("connected weight of the empty set is undefined");
  }
  if (!x.is_subset_of(lat_->all_interior())) {
    throw std::invalid_argument("subset contains non-interior sites");
  }
  if (x.size() == 1) return 1;
  {
    std::shared_lock lock(mutex_);
    auto it = cache_.find(x);
    if (it != cache_.end()) return it->second;
  }
  int w = steiner_weight(x);
  std::unique_lock lock(mutex_);
  cache_.emplace(x, w);
  return w;
}

int WeightOracle::steiner_weight(SubsetKey x) const {
  const std::vector<int> terms = x.indices();
  const int k = static_cast<int>(terms.size()) - 1;  // last terminal is root
  const int root = terms.back();
  const std::size_t n_masks = std::size_t{1} << k;
  constexpr int kInf = std::numeric_limits<int>::max() / 4;
  std::vector<int> dp(n_masks * n_, kInf);
  auto at = [&](std::size_t mask, int v) -> int& { return dp[mask * n_ + v]; };

  for (int t = 0; t < k; ++t) {
    for (int v = 0; v < n_; ++v) at(std::size_t{1} << t, v) = distance(terms[t], v);
  }
  std::vector<int> merged(n_);
  for (std::size_t mask = 1; mask < n_masks; ++mask) {
    if (std::popcount(mask) < 2) continue;
    const std::size_t low = mask & (~mask + 1);
    for (int v = 0; v < n_; ++v) {
      int best = kInf;
      // Sub-masks containing the lowest bit visit each split once.
      for (std::size_t sub = (mask - 1) & mask; sub != 0; sub = (sub - 1) & mask) {
        if (!(sub & low)) continue;
        best = std::min(best, at(sub, v) + at(mask ^ sub, v));
      }
      merged[v] = best;
    }
    for (int v = 0; v < n_; ++v) {
      int best = merged[v];
      for (int u = 0; u < n_; ++u) best = std::min(best, merged[u] + distance(u, v));
      at(mask, v) = best;
    }
  }
  return at(n_masks - 1, root) + 1;
}

int connected_weight(const Lattice& lat, SubsetKey x) {
  return WeightOracle(lat).weight(x);
}

std::vector<SubsetKey> enumerate_truncation(const Lattice& lat, int w_max,
                                            const TruncationOptions& opts) {
  std::vector<SubsetKey> out;
  if (w_max <= 0) return out;
  const auto& graph = lat.interior_graph();

  // Connected interior sets of size <= w_max, grown one neighbour at a time.
  std::unordered_set<std::uint64_t> all_connected;
  std::vector<std::uint64_t> level;
  for (int v = 0; v < lat.num_interior(); ++v) level.push_back(std::uint64_t{1} << v);
  all_connected.insert(level.begin(), level.end());
  for (int size = 2; size <= w_max && !level.empty(); ++size) {
    std::unordered_set<std::uint64_t> next;
    for (std::uint64_t set : level) {
      for (std::uint64_t b = set; b != 0; b &= b - 1) {
        for (int u : graph[std::countr_zero(b)]) {
          std::uint64_t bit = std::uint64_t{1} << u;
          if (!(set & bit)) next.insert(set | bit);
        }
      }
      if (next.size() > opts.max_keys) {
        throw std::length_error("truncation enumeration exceeds key cap");
      }
    }
    level.assign(next.begin(), next.end());
    all_connected.insert(level.begin(), level.end());
  }

  std::unordered_set<std::uint64_t> keys;
  for (std::uint64_t set : all_connected) {
    for (std::uint64_t sub = set; sub != 0; sub = (sub - 1) & set) {
      keys.insert(sub);
    }
    if (keys.size() > opts.max_keys) {
      throw std::length_error("truncation enumeration exceeds key cap");
    }
  }
  out.reserve(keys.size());
  for (std::uint64_t k : keys) out.emplace_back(k);
  std::sort(out.begin(), out.end(), [](SubsetKey a, SubsetKey b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a.bits() < b.bits();
  });
  return out;
}

}  // namespace ktlab
