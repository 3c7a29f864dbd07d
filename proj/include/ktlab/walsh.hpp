#pragma once

#include <bit>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace ktlab {

/// In-place unnormalized Walsh-Hadamard transform over the XOR group:
/// out[s] = Σ_m in[m] (-1)^{popcount(s & m)}. Applying it twice multiplies by
/// the length, which must be a power of two.
inline void walsh_hadamard(std::span<double> a) {
  const std::size_t n = a.size();
  if (n == 0 || !std::has_single_bit(n)) {
    throw std::invalid_argument("walsh_hadamard: length must be a power of two");
  }
  for (std::size_t len = 1; len < n; len <<= 1) {
    for (std::size_t i = 0; i < n; i += len << 1) {
      for (std::size_t j = i; j < i + len; ++j) {
        const double u = a[j];
        const double v = a[j + len];
        a[j] = u + v;
        a[j + len] = u - v;
      }
    }
  }
}

}  // namespace ktlab
