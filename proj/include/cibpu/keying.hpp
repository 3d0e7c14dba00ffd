#pragma once

// Key derivation and the keyed index/content maps shared by CIPHT and CIBTB.
//
// Keys are a pure function of (thread id, device secret). The secret stands in
// for a per-chip PUF response; SipHash-2-4 (libsodium crypto_shorthash) stands
// in for the hardware key-derivation function.

#include <sodium.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <unordered_map>

#include "cibpu/bits.hpp"
#include "cibpu/error.hpp"

namespace cibpu {

enum class MappingMode { XorFold, MixedPermutation, IdealOracle };

inline std::string_view to_string(MappingMode m) {
  switch (m) {
    case MappingMode::XorFold: return "xor_fold";
    case MappingMode::MixedPermutation: return "mixed_permutation";
    case MappingMode::IdealOracle: return "ideal_oracle";
  }
  return "?";
}

inline MappingMode parse_mapping_mode(std::string_view s) {
  if (s == "xor_fold") return MappingMode::XorFold;
  if (s == "mixed_permutation") return MappingMode::MixedPermutation;
  if (s == "ideal_oracle") return MappingMode::IdealOracle;
  throw ConfigError("unknown mapping mode '" + std::string(s) + "'");
}

inline constexpr std::size_t kPhtSkews = 3;
inline constexpr std::size_t kBtbSkews = 2;

struct KeyBundle {
  std::array<std::uint64_t, kPhtSkews> pht_index_keys{};
  std::array<std::uint64_t, kPhtSkews> pht_content_keys{};
  std::array<std::uint64_t, kBtbSkews> btb_index_keys{};
  std::uint64_t btb_content_key = 0;

  // All nine keys in slot order (the order derive_keys assigns them).
  std::array<std::uint64_t, 9> all() const {
    return {pht_index_keys[0],   pht_index_keys[1],   pht_index_keys[2],
            pht_content_keys[0], pht_content_keys[1], pht_content_keys[2],
            btb_index_keys[0],   btb_index_keys[1],   btb_content_key};
  }

  bool operator==(const KeyBundle&) const = default;
};

namespace detail {

inline void store_le64(unsigned char* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

inline std::uint64_t load_le64(const unsigned char* in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{in[i]} << (8 * i);
  return v;
}

}  // namespace detail

// SipHash-2-4 of an arbitrary message under a 128-bit key.
inline std::uint64_t siphash24(const std::array<unsigned char, 16>& key,
                               const unsigned char* msg, std::size_t len) {
  static_assert(crypto_shorthash_KEYBYTES == 16 && crypto_shorthash_BYTES == 8);
  unsigned char out[crypto_shorthash_BYTES];
  crypto_shorthash(out, msg, len, key.data());
  return detail::load_le64(out);
}

// Keyed PRF over (thread id, slot). The 128-bit SipHash key is the secret
// followed by its fmix64 image. A zero output is re-drawn with a counter byte.
inline std::uint64_t key_prf(std::uint64_t device_secret, std::uint32_t thread_id,
                             std::uint8_t slot) {
  std::array<unsigned char, 16> key{};
  detail::store_le64(key.data(), device_secret);
  detail::store_le64(key.data() + 8, fmix64(device_secret));
  unsigned char msg[6] = {static_cast<unsigned char>(thread_id),
                          static_cast<unsigned char>(thread_id >> 8),
                          static_cast<unsigned char>(thread_id >> 16),
                          static_cast<unsigned char>(thread_id >> 24), slot, 0};
  for (;;) {
    std::uint64_t k = siphash24(key, msg, sizeof msg);
    if (k != 0) return k;
    ++msg[5];
  }
}

inline KeyBundle derive_keys(std::uint32_t thread_id, std::uint64_t device_secret) {
  if (device_secret == 0) throw ConfigError("device_secret must be non-zero");
  KeyBundle b;
  std::uint8_t slot = 0;
  for (auto& k : b.pht_index_keys) k = key_prf(device_secret, thread_id, slot++);
  for (auto& k : b.pht_content_keys) k = key_prf(device_secret, thread_id, slot++);
  for (auto& k : b.btb_index_keys) k = key_prf(device_secret, thread_id, slot++);
  b.btb_content_key = key_prf(device_secret, thread_id, slot++);
  return b;
}

// Fixed-round keyed permutation of a `bits`-wide word. Every step (xor with a
// round key, rotation, multiplication by an odd constant, xorshift) is a
// bijection modulo 2^bits, so the composition is too.
inline std::uint64_t keyed_permute(std::uint64_t x, std::uint64_t key, unsigned bits) {
  constexpr int kRounds = 4;
  const std::uint64_t mask = low_mask(bits);
  const unsigned shift = (bits + 1) / 2;
  x &= mask;
  for (int r = 0; r < kRounds; ++r) {
    const std::uint64_t rk = fmix64(key + 0x9e3779b97f4a7c15ULL * (r + 1));
    x ^= rk & mask;
    x = rotl_n(x, static_cast<unsigned>(rk >> 58) + 1, bits);
    x = (x * ((rk >> 11) | 1)) & mask;
    x ^= x >> shift;
  }
  return x;
}

// The PC and GHR folded into the index domain; the input every mode but
// IdealOracle is a bijection of.
inline std::uint64_t folded_input(std::uint64_t pc, std::uint64_t ghr, unsigned index_bits) {
  return fold(pc, index_bits) ^ fold(ghr, index_bits);
}

// Enc.I: map (pc, ghr) to an index of `index_bits` bits under `key`.
inline std::uint64_t enc_index(std::uint64_t pc, std::uint64_t ghr, std::uint64_t key,
                               unsigned index_bits, MappingMode mode) {
  const std::uint64_t mask = low_mask(index_bits);
  switch (mode) {
    case MappingMode::XorFold:
      return folded_input(pc, ghr, index_bits) ^ fold(key, index_bits);
    case MappingMode::MixedPermutation:
      return keyed_permute(folded_input(pc, ghr, index_bits), key, index_bits);
    case MappingMode::IdealOracle: {
      // Keyed hash of the full (pc, ghr) pair; not injective.
      std::uint64_t h = fmix64(pc ^ fmix64(key ^ 0x5851f42d4c957f2dULL));
      h = fmix64(h ^ (ghr * 0xd6e8feb86659fd93ULL) ^ key);
      return h & mask;
    }
  }
  return 0;
}

// Per-entry content key: content encryption is keyed by the bundle key and the
// branch PC, so two threads decrypting the same cell see independent pads.
// A zero content key yields a zero entry key (and so an identity cipher).
inline std::uint64_t content_entry_key(std::uint64_t content_key, std::uint64_t pc,
                                       unsigned field) {
  if (content_key == 0) return 0;
  return fmix64(content_key ^ fmix64((pc << 2) + field + 1));
}

// Enc.C / Dec.C: XOR with a keystream derived from `key`, truncated to `width`.
inline std::uint64_t enc_content(std::uint64_t payload, unsigned width, std::uint64_t key) {
  if (width > 64) throw ConfigError("content width exceeds the 64-bit keystream");
  const std::uint64_t mask = low_mask(width);
  if ((payload & ~mask) != 0) throw ConfigError("payload wider than declared width");
  return payload ^ (fmix64(key) & mask);
}

inline std::uint64_t dec_content(std::uint64_t cipher, unsigned width, std::uint64_t key) {
  return enc_content(cipher, width, key);
}

// Lazily derived per-thread bundles for one device secret.
class KeyStore {
 public:
  explicit KeyStore(std::uint64_t device_secret) : secret_(device_secret) {
    if (device_secret == 0) throw ConfigError("device_secret must be non-zero");
  }

  const KeyBundle& bundle(std::uint32_t thread_id) {
    auto it = cache_.find(thread_id);
    if (it == cache_.end()) it = cache_.emplace(thread_id, derive_keys(thread_id, secret_)).first;
    return it->second;
  }

  std::uint64_t device_secret() const { return secret_; }

 private:
  std::uint64_t secret_;
  std::unordered_map<std::uint32_t, KeyBundle> cache_;
};

}  // namespace cibpu
