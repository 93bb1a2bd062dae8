#ifndef RODRECON_HASH_HPP
#define RODRECON_HASH_HPP

#include <cstdint>
#include <cstring>

namespace rodrecon {

/// 64-bit FNV-1a running hash.
struct Fnv1a {
  std::uint64_t state = 0xcbf29ce484222325ull;

  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state ^= p[i];
      state *= 0x100000001b3ull;
    }
  }
  void update_doubles(const double* data, std::size_t n) {
    update(data, n * sizeof(double));
  }
  std::uint64_t digest() const { return state; }
};

}  // namespace rodrecon

#endif
