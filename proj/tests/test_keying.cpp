#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "cibpu/checks.hpp"
#include "cibpu/keying.hpp"

using namespace cibpu;

TEST(Keying, SipHashMatchesReferenceVectors) {
  // SipHash-2-4 vectors for key 00..0f and messages 00..(n-1).
  std::array<unsigned char, 16> key{};
  for (int i = 0; i < 16; ++i) key[i] = static_cast<unsigned char>(i);
  unsigned char msg[2] = {0, 1};
  EXPECT_EQ(siphash24(key, msg, 0), 0x726fdb47dd0e0e31ULL);
  EXPECT_EQ(siphash24(key, msg, 1), 0x74f839c593dc67fdULL);
  EXPECT_EQ(siphash24(key, msg, 2), 0x0d6c8009d9a94f5aULL);
}

TEST(Keying, DerivationIsDeterministic) {
  EXPECT_EQ(derive_keys(7, 0x1234), derive_keys(7, 0x1234));
  KeyStore ks(0x1234);
  EXPECT_EQ(ks.bundle(7), derive_keys(7, 0x1234));
}

TEST(Keying, DerivationMatchesPrfOverTidAndSlot) {
  // Reference derivation: slot i of the bundle is the PRF of (tid, i).
  const std::uint64_t secret = 0xfeedface;
  std::array<unsigned char, 16> key{};
  for (int i = 0; i < 8; ++i) {
    key[i] = static_cast<unsigned char>(secret >> (8 * i));
    key[8 + i] = static_cast<unsigned char>(fmix64(secret) >> (8 * i));
  }
  for (std::uint32_t tid : {0u, 1u, 0xdeadbeefu}) {
    const auto all = derive_keys(tid, secret).all();
    for (unsigned slot = 0; slot < 9; ++slot) {
      unsigned char msg[6] = {static_cast<unsigned char>(tid), static_cast<unsigned char>(tid >> 8),
                              static_cast<unsigned char>(tid >> 16),
                              static_cast<unsigned char>(tid >> 24),
                              static_cast<unsigned char>(slot), 0};
      EXPECT_EQ(all[slot], siphash24(key, msg, 6)) << "tid " << tid << " slot " << slot;
    }
  }
}

TEST(Keying, DistinctThreadsDifferInEveryKey) {
  for (std::uint64_t secret : {1ULL, 0x0c1b95a17ULL, ~0ULL}) {
    const auto a = derive_keys(0, secret).all();
    const auto b = derive_keys(1, secret).all();
    for (unsigned i = 0; i < 9; ++i) {
      EXPECT_NE(a[i], b[i]);
      EXPECT_NE(a[i], 0u);
    }
    std::set<std::uint64_t> uniq(a.begin(), a.end());
    EXPECT_EQ(uniq.size(), 9u);
  }
}

TEST(Keying, ZeroSecretRejected) {
  EXPECT_THROW(derive_keys(3, 0), ConfigError);
  EXPECT_THROW(KeyStore(0), ConfigError);
}

TEST(Keying, XorFoldExamples) {
  EXPECT_EQ(enc_index(0x5, 0, 0x3, 4, MappingMode::XorFold), 0x6u);
  for (std::uint64_t pc : {0x0ULL, 0x1234ULL, 0xabcdef012345ULL})
    EXPECT_EQ(enc_index(pc, 0x3c, 0, 10, MappingMode::XorFold), folded_input(pc, 0x3c, 10));
}

TEST(Keying, MixedPermutationIsBijectiveAt12Bits) {
  const auto v = enc_index(0x1A2B, 0x0F, 0x7C1, 12, MappingMode::MixedPermutation);
  EXPECT_LT(v, 4096u);
  EXPECT_EQ(v, keyed_permute(folded_input(0x1A2B, 0x0F, 12), 0x7C1, 12));
  std::vector<bool> seen(4096, false);
  for (std::uint64_t x = 0; x < 4096; ++x) {
    const auto y = keyed_permute(x, 0x7C1, 12);
    ASSERT_LT(y, 4096u);
    ASSERT_FALSE(seen[y]) << "collision at input " << x;
    seen[y] = true;
  }
}

TEST(Keying, KeyedModesInjectiveOverFoldedDomain) {
  for (MappingMode m : {MappingMode::XorFold, MappingMode::MixedPermutation}) {
    for (unsigned bits : {1u, 2u, 5u, 11u, 13u, 16u}) {
      for (std::uint64_t key : {1ULL, 0x9e3779b97f4a7c15ULL}) {
        std::vector<bool> seen(std::size_t{1} << bits, false);
        for (std::uint64_t x = 0; x < (std::uint64_t{1} << bits); ++x) {
          // pc = x with ghr = 0 has folded input x.
          const auto y = enc_index(x, 0, key, bits, m);
          ASSERT_FALSE(seen[y]) << to_string(m) << " bits " << bits;
          seen[y] = true;
        }
      }
    }
  }
}

TEST(Keying, IdealOracleLooksUniform) {
  // Chi-square over 256 cells for 2^16 consecutive PCs.
  std::vector<double> cells(256, 0);
  const int n = 1 << 16;
  for (int pc = 0; pc < n; ++pc) cells[enc_index(pc, 0, 0x55aa, 8, MappingMode::IdealOracle)] += 1;
  const double e = n / 256.0;
  double chi = 0;
  for (double c : cells) chi += (c - e) * (c - e) / e;
  EXPECT_LT(chi, 341.4);  // 255 dof, p = 0.9995
}

TEST(Keying, ContentCipher) {
  EXPECT_EQ(enc_content(0b10, 2, 0), 0b10u);
  EXPECT_EQ(content_roundtrip_failures(99, 200), 0u);
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t x = rng() & low_mask(48), k = rng();
    ASSERT_EQ(dec_content(enc_content(x, 48, k), 48, k), x);
  }
  EXPECT_THROW(enc_content(1, 65, 1), ConfigError);
  EXPECT_THROW(enc_content(4, 2, 1), ConfigError);
}

TEST(Keying, StateCiphertextsDifferAcrossThreads) {
  // For a fixed PC, the 2-bit state 0b11 under two independent thread keys
  // should differ with probability 3/4.
  Rng rng(17);
  const int n = 10000;
  int differ = 0;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t secret = rng() | 1;
    const std::uint64_t pc = rng() & low_mask(48);
    const auto k0 = content_entry_key(derive_keys(0, secret).pht_content_keys[0], pc, 1);
    const auto k1 = content_entry_key(derive_keys(1, secret).pht_content_keys[0], pc, 1);
    differ += enc_content(0b11, 2, k0) != enc_content(0b11, 2, k1);
  }
  const double frac = static_cast<double>(differ) / n;
  const double se = std::sqrt(0.75 * 0.25 / n);
  EXPECT_GE(frac, 0.75 - 3 * se);
  EXPECT_LE(frac, 0.75 + 3 * se);
}

TEST(Keying, ContentKeysDistinguishKeys) {
  Rng rng(3);
  int same = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t x = rng() & low_mask(48);
    same += enc_content(x, 48, rng()) == enc_content(x, 48, rng());
  }
  EXPECT_EQ(same, 0);
}
