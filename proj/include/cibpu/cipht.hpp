#pragma once

// CIPHT: a tagged 2-bit-counter PHT replicated into independently keyed skews.
// A lookup hits only if every skew holds a matching tag at its own encrypted
// index; a miss rewrites the targeted entry of every skew, so the replicas
// stay logically identical.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "cibpu/bits.hpp"
#include "cibpu/config.hpp"
#include "cibpu/keying.hpp"

namespace cibpu {

// Saturating 2-bit counter update.
inline constexpr std::uint8_t counter_step(std::uint8_t state, bool taken) {
  if (taken) return state >= 3 ? 3 : static_cast<std::uint8_t>(state + 1);
  return state == 0 ? 0 : static_cast<std::uint8_t>(state - 1);
}

inline constexpr std::uint8_t initial_counter(bool taken) { return taken ? 2 : 1; }

inline constexpr bool counter_taken(std::uint8_t state) { return state >= 2; }

struct PhtEntry {
  std::uint32_t tag_cipher = 0;
  std::uint8_t state_cipher = 0;
  bool valid = false;
};

struct PhtLookup {
  bool hit = false;
  std::optional<bool> taken;
};

struct PhtUpdateReport {
  bool hit = false;
  unsigned overwritten = 0;  // valid entries replaced on a miss, summed over skews
};

// Decrypted view of one skew's entry for a (pc, tid) at the current GHR.
struct PhtSkewView {
  std::uint64_t index = 0;
  bool valid = false;
  bool tag_match = false;
  std::uint32_t tag = 0;
  std::uint8_t state = 0;
};

class Cipht {
 public:
  static constexpr unsigned kTagField = 0;
  static constexpr unsigned kStateField = 1;

  explicit Cipht(const SimConfig& cfg)
      : cfg_(cfg), keys_(cfg.device_secret), ghr_mask_(low_mask(cfg.ghr_bits)) {
    cfg_.validate();
    for (unsigned s = 0; s < cfg_.pht_skews; ++s)
      skews_[s].assign(std::size_t{1} << cfg_.i_pht, PhtEntry{});
  }

  PhtLookup lookup(std::uint64_t pc, std::uint32_t tid) {
    const auto view = inspect(pc, tid);
    for (unsigned s = 0; s < cfg_.pht_skews; ++s)
      if (!view[s].tag_match) return {};
    return {true, counter_taken(view[0].state)};
  }

  PhtUpdateReport update(std::uint64_t pc, std::uint32_t tid, bool taken) {
    const KeyBundle& kb = keys_.bundle(tid);
    const auto view = inspect(pc, tid);
    bool hit = true;
    for (unsigned s = 0; s < cfg_.pht_skews; ++s) hit = hit && view[s].tag_match;

    PhtUpdateReport report{hit, 0};
    for (unsigned s = 0; s < cfg_.pht_skews; ++s) {
      PhtEntry& e = skews_[s][view[s].index];
      const std::uint64_t state_key = content_entry_key(kb.pht_content_keys[s], pc, kStateField);
      std::uint8_t state;
      if (hit) {
        state = counter_step(view[0].state, taken);
      } else {
        if (e.valid) ++report.overwritten;
        state = initial_counter(taken);
        const std::uint64_t tag_key = content_entry_key(kb.pht_content_keys[s], pc, kTagField);
        e.tag_cipher = static_cast<std::uint32_t>(enc_content(plain_tag(pc), cfg_.t_pht, tag_key));
        e.valid = true;
      }
      e.state_cipher = static_cast<std::uint8_t>(enc_content(state, 2, state_key));
    }
    ghr_ = ((ghr_ << 1) | (taken ? 1u : 0u)) & ghr_mask_;
    return report;
  }

  std::array<PhtSkewView, kPhtSkews> inspect(std::uint64_t pc, std::uint32_t tid) {
    const KeyBundle& kb = keys_.bundle(tid);
    std::array<PhtSkewView, kPhtSkews> out{};
    const std::uint64_t tag = plain_tag(pc);
    for (unsigned s = 0; s < cfg_.pht_skews; ++s) {
      PhtSkewView& v = out[s];
      v.index = enc_index(pc, ghr_, kb.pht_index_keys[s], cfg_.i_pht, cfg_.mapping);
      const PhtEntry& e = skews_[s][v.index];
      v.valid = e.valid;
      if (!e.valid) continue;
      const std::uint64_t ck = kb.pht_content_keys[s];
      v.tag = static_cast<std::uint32_t>(
          dec_content(e.tag_cipher, cfg_.t_pht, content_entry_key(ck, pc, kTagField)));
      v.state = static_cast<std::uint8_t>(
          dec_content(e.state_cipher, 2, content_entry_key(ck, pc, kStateField)));
      v.tag_match = v.tag == tag;
    }
    return out;
  }

  std::uint64_t plain_tag(std::uint64_t pc) const { return fold(pc >> cfg_.i_pht, cfg_.t_pht); }

  std::uint64_t ghr() const { return ghr_; }
  void set_ghr(std::uint64_t g) { ghr_ = g & ghr_mask_; }
  const SimConfig& config() const { return cfg_; }
  KeyStore& keys() { return keys_; }
  const std::vector<PhtEntry>& skew(unsigned s) const { return skews_.at(s); }

 private:
  SimConfig cfg_;
  KeyStore keys_;
  std::uint64_t ghr_mask_;
  std::uint64_t ghr_ = 0;
  std::array<std::vector<PhtEntry>, kPhtSkews> skews_;
};

}  // namespace cibpu
