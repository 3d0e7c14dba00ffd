#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "cibpu/error.hpp"
#include "cibpu/keying.hpp"

namespace cibpu {

inline constexpr std::uint64_t kDefaultSeed = 0x5eed2024c1b9ULL;
inline constexpr std::uint64_t kDefaultDeviceSecret = 0x0c1b95a17ULL;

// Structural parameters. Defaults are the published baseline configuration.
struct SimConfig {
  unsigned i_pht = 13;        // PHT index bits
  unsigned t_pht = 12;        // PHT tag bits
  unsigned pht_skews = 3;     // CIPHT replicas
  unsigned ghr_bits = 16;
  unsigned base_bits = 12;    // untagged bimodal fallback table
  unsigned i_btb = 12;        // log2 of total BTB sets (both skews together)
  unsigned t_btb = 12;        // BTB tag bits
  unsigned n_btb = 48;        // BTB target bits
  unsigned ways = 8;          // base BTB ways W
  unsigned extra_tags = 5;    // extra invalid tags per CIBTB set E
  std::uint64_t n_ball = 4096 * 8;  // CIBTB target-store entries
  MappingMode mapping = MappingMode::MixedPermutation;
  std::uint64_t device_secret = kDefaultDeviceSecret;
  std::uint64_t seed = kDefaultSeed;

  std::uint64_t n_bin() const { return std::uint64_t{1} << i_btb; }
  unsigned set_capacity() const { return ways + extra_tags; }
  // Index bits within one CIBTB skew (each skew holds n_bin / 2 sets).
  unsigned btb_skew_index_bits() const { return i_btb - 1; }

  void validate() const {
    require(i_pht >= 1 && i_pht <= 28, "i_pht must be in [1, 28]");
    require(t_pht >= 1 && t_pht <= 32, "t_pht must be in [1, 32]");
    require(pht_skews >= 1 && pht_skews <= kPhtSkews, "pht_skews must be in [1, 3]");
    require(ghr_bits <= 64, "ghr_bits must be <= 64");
    require(base_bits >= 1 && base_bits <= 24, "base_bits must be in [1, 24]");
    require(i_btb >= 1 && i_btb <= 24, "i_btb must be in [1, 24]");
    require(t_btb >= 1 && t_btb <= 32, "t_btb must be in [1, 32]");
    require(n_btb >= 1 && n_btb <= 64, "n_btb must be in [1, 64]");
    require(ways >= 1 && set_capacity() <= 255, "ways + extra_tags must be in [1, 255]");
    require(n_ball >= 1, "n_ball must be positive");
    require(n_ball < n_bin() * set_capacity(),
            "n_ball must be smaller than the number of tag slots (n_bin * (ways + extra_tags))");
    require(n_ball < (std::uint64_t{1} << 31), "n_ball too large");
    require(device_secret != 0, "device_secret must be non-zero");
  }
};

// Counters shared by the predictor structures and trace runs.
struct RunMetrics {
  std::uint64_t conditional_count = 0;
  std::uint64_t mispredictions = 0;
  std::uint64_t pht_lookups = 0;
  std::uint64_t pht_hits = 0;
  std::uint64_t btb_lookups = 0;
  std::uint64_t btb_hits = 0;
  std::uint64_t btb_misses = 0;
  std::uint64_t insertions = 0;
  std::uint64_t se_count = 0;
  std::uint64_t de_count = 0;
  std::uint64_t attacker_accesses = 0;

  bool operator==(const RunMetrics&) const = default;
};

using Rng = std::mt19937_64;

// Uniform draw in [0, n). Lemire's multiply-shift; deterministic across
// standard libraries, unlike std::uniform_int_distribution.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const unsigned __int128 m = static_cast<unsigned __int128>(rng()) * n;
  return static_cast<std::uint64_t>(m >> 64);
}

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace cibpu
