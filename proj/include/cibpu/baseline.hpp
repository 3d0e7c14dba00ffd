#pragma once

// Conventional (unencrypted, set-associative) BTB and tagged gshare PHT.

#include <cstdint>
#include <optional>
#include <vector>

#include "cibpu/bits.hpp"
#include "cibpu/cipht.hpp"
#include "cibpu/config.hpp"
#include "cibpu/keying.hpp"

namespace cibpu {

enum class Replacement { Random, Lru };

struct ConvBtbConfig {
  unsigned index_bits = 12;
  unsigned tag_bits = 12;
  unsigned target_bits = 48;
  unsigned ways = 8;
  Replacement replacement = Replacement::Random;
  // Index map. XorFold with key 0 is the plain folded-PC index; a keyed
  // IdealOracle models a randomized mapping the attacker cannot compute.
  MappingMode mapping = MappingMode::XorFold;
  std::uint64_t index_key = 0;
  std::uint64_t seed = kDefaultSeed;

  static ConvBtbConfig from(const SimConfig& c) {
    ConvBtbConfig b;
    b.index_bits = c.i_btb;
    b.tag_bits = c.t_btb;
    b.target_bits = c.n_btb;
    b.ways = c.ways;
    b.seed = c.seed;
    return b;
  }
};

struct ConvBtbAccess {
  bool hit = false;
  std::optional<std::uint64_t> target;
  std::uint64_t set = 0;
  std::optional<unsigned> evicted_way;
  std::uint64_t evicted_tag = 0;
};

class ConvBtb {
 public:
  struct Entry {
    std::uint64_t tag = 0;
    std::uint64_t target = 0;
    std::uint64_t last_use = 0;
    bool valid = false;
  };

  explicit ConvBtb(const ConvBtbConfig& cfg) : cfg_(cfg), rng_(cfg.seed ^ 0xc0b7ULL) {
    require(cfg.index_bits <= 24, "conventional BTB index_bits must be <= 24");
    require(cfg.ways >= 1, "conventional BTB needs at least one way");
    require(cfg.tag_bits >= 1 && cfg.tag_bits <= 64, "tag_bits must be in [1, 64]");
    entries_.assign((std::size_t{1} << cfg.index_bits) * cfg.ways, Entry{});
  }

  std::uint64_t set_of(std::uint64_t pc) const {
    return enc_index(pc, 0, cfg_.index_key, cfg_.index_bits, cfg_.mapping);
  }
  std::uint64_t tag_of(std::uint64_t pc) const {
    return fold(pc >> cfg_.index_bits, cfg_.tag_bits);
  }

  // Probe, and when `is_update` also install/refresh (pc -> target). A miss
  // fills an invalid way first, otherwise replaces a way of the same set.
  ConvBtbAccess access(std::uint64_t pc, std::optional<std::uint64_t> target, bool is_update) {
    ConvBtbAccess r;
    r.set = set_of(pc);
    const std::uint64_t tag = tag_of(pc);
    Entry* set = &entries_[r.set * cfg_.ways];
    ++clock_;
    for (unsigned w = 0; w < cfg_.ways; ++w) {
      if (set[w].valid && set[w].tag == tag) {
        r.hit = true;
        r.target = set[w].target;
        set[w].last_use = clock_;
        if (is_update && target) set[w].target = *target & low_mask(cfg_.target_bits);
        return r;
      }
    }
    if (!is_update) return r;
    unsigned way = cfg_.ways;
    for (unsigned w = 0; w < cfg_.ways; ++w) {
      if (!set[w].valid) {
        way = w;
        break;
      }
    }
    if (way == cfg_.ways) {
      way = victim_way(set);
      r.evicted_way = way;
      r.evicted_tag = set[way].tag;
    }
    set[way] = Entry{tag, target.value_or(0) & low_mask(cfg_.target_bits), clock_, true};
    return r;
  }

  // Drop every entry (a fresh, identically keyed structure).
  void reset() {
    for (auto& e : entries_) e = Entry{};
    clock_ = 0;
  }

  const ConvBtbConfig& config() const { return cfg_; }

 private:
  unsigned victim_way(const Entry* set) {
    if (cfg_.replacement == Replacement::Random)
      return static_cast<unsigned>(uniform_below(rng_, cfg_.ways));
    unsigned lru = 0;
    for (unsigned w = 1; w < cfg_.ways; ++w)
      if (set[w].last_use < set[lru].last_use) lru = w;
    return lru;
  }

  ConvBtbConfig cfg_;
  Rng rng_;
  std::uint64_t clock_ = 0;
  std::vector<Entry> entries_;
};

struct ConvPhtAccess {
  bool hit = false;
  std::optional<bool> taken;
};

// Single tagged table indexed by folded PC xor folded GHR.
class ConvPht {
 public:
  struct Entry {
    std::uint32_t tag = 0;
    std::uint8_t state = 0;
    bool valid = false;
  };

  ConvPht(unsigned index_bits, unsigned tag_bits, unsigned ghr_bits)
      : index_bits_(index_bits), tag_bits_(tag_bits), ghr_mask_(low_mask(ghr_bits)) {
    require(index_bits >= 1 && index_bits <= 28, "PHT index_bits must be in [1, 28]");
    require(tag_bits >= 1 && tag_bits <= 32, "PHT tag_bits must be in [1, 32]");
    table_.assign(std::size_t{1} << index_bits, Entry{});
  }

  explicit ConvPht(const SimConfig& c) : ConvPht(c.i_pht, c.t_pht, c.ghr_bits) {}

  std::uint64_t index_of(std::uint64_t pc) const { return folded_input(pc, ghr_, index_bits_); }
  std::uint32_t tag_of(std::uint64_t pc) const {
    return static_cast<std::uint32_t>(fold(pc >> index_bits_, tag_bits_));
  }

  // Probe; with `is_update` apply the resolved direction and shift the GHR.
  ConvPhtAccess access(std::uint64_t pc, std::optional<bool> taken, bool is_update) {
    Entry& e = table_[index_of(pc)];
    const std::uint32_t tag = tag_of(pc);
    ConvPhtAccess r;
    if (e.valid && e.tag == tag) {
      r.hit = true;
      r.taken = counter_taken(e.state);
    }
    if (!is_update || !taken) return r;
    if (r.hit) {
      e.state = counter_step(e.state, *taken);
    } else {
      e = Entry{tag, initial_counter(*taken), true};
    }
    ghr_ = ((ghr_ << 1) | (*taken ? 1u : 0u)) & ghr_mask_;
    return r;
  }

  std::uint64_t ghr() const { return ghr_; }
  void set_ghr(std::uint64_t g) { ghr_ = g & ghr_mask_; }
  const Entry& entry_at(std::uint64_t index) const { return table_.at(index); }

 private:
  unsigned index_bits_;
  unsigned tag_bits_;
  std::uint64_t ghr_mask_;
  std::uint64_t ghr_ = 0;
  std::vector<Entry> table_;
};

// Untagged bimodal counters used as the fallback direction predictor. The
// index key is supplied per access so one table can serve several threads.
class BimodalTable {
 public:
  BimodalTable(unsigned bits, MappingMode mode)
      : bits_(bits), mode_(mode), counters_(std::size_t{1} << bits, 1) {}

  bool predict(std::uint64_t pc, std::uint64_t key = 0) const {
    return counter_taken(counters_[index_of(pc, key)]);
  }
  void update(std::uint64_t pc, bool taken, std::uint64_t key = 0) {
    auto& c = counters_[index_of(pc, key)];
    c = counter_step(c, taken);
  }

 private:
  std::uint64_t index_of(std::uint64_t pc, std::uint64_t key) const {
    return enc_index(pc, 0, key, bits_, mode_);
  }

  unsigned bits_;
  MappingMode mode_;
  std::vector<std::uint8_t> counters_;
};

}  // namespace cibpu
