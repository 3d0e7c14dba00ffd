#pragma once

#include <bit>
#include <cstdint>

namespace cibpu {

inline constexpr std::uint64_t low_mask(unsigned bits) {
  return bits >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << bits) - 1);
}

// XOR-fold a value into `bits` bits by combining consecutive bit chunks.
inline constexpr std::uint64_t fold(std::uint64_t value, unsigned bits) {
  if (bits == 0) return 0;
  if (bits >= 64) return value;
  std::uint64_t out = 0;
  while (value != 0) {
    out ^= value & low_mask(bits);
    value >>= bits;
  }
  return out;
}

// Rotate left within a `bits`-wide word.
inline constexpr std::uint64_t rotl_n(std::uint64_t x, unsigned r, unsigned bits) {
  if (bits <= 1) return x;
  if (bits >= 64) return std::rotl(x, static_cast<int>(r % 64));
  r %= bits;
  if (r == 0) return x;
  return ((x << r) | (x >> (bits - r))) & low_mask(bits);
}

// splitmix64 finalizer: a bijection on 64-bit words that maps 0 to 0.
inline constexpr std::uint64_t fmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace cibpu
