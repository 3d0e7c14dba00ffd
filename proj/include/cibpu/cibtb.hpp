#pragma once

// CIBTB: decoupled Tag-Store / Target-Store BTB.
//
// Tag-Store: two skews of n_bin/2 sets, each set with ways + extra_tags slots.
// Target-Store: n_ball entries. A valid tag owns exactly one target through
// its forward pointer; the target points back through its reverse pointer.
// Lookup picks the less-loaded of the two candidate sets for a miss; insertion
// evicts a target globally (the one whose owning set is fuller), so a set only
// loses a tag to a newcomer of its own (a DE) when it is completely full.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cibpu/bits.hpp"
#include "cibpu/config.hpp"
#include "cibpu/error.hpp"
#include "cibpu/keying.hpp"

namespace cibpu {

enum class EvictionKind { None, SE, DE };

inline const char* to_string(EvictionKind k) {
  switch (k) {
    case EvictionKind::None: return "none";
    case EvictionKind::SE: return "SE";
    case EvictionKind::DE: return "DE";
  }
  return "?";
}

inline constexpr std::uint32_t kNil = 0xffffffffu;

struct TagEntry {
  std::uint32_t tag_cipher = 0;
  std::uint32_t fptr = kNil;
  bool valid() const { return fptr != kNil; }
};

struct TargetEntry {
  std::uint64_t target_cipher = 0;
  std::uint32_t rptr = kNil;
  bool live() const { return rptr != kNil; }
};

struct BtbLookup {
  bool hit = false;
  std::optional<std::uint64_t> target;
  std::uint32_t chosen_set = 0;                // miss: set picked for insertion
  std::array<std::uint32_t, kBtbSkews> candidate_sets{};
  std::uint32_t tag_slot = kNil;               // hit: slot holding the tag
};

struct AuditReport {
  std::uint64_t violations = 0;
  std::string first;
  bool ok() const { return violations == 0; }
};

class Cibtb {
 public:
  static constexpr unsigned kTagField = 0;
  static constexpr unsigned kTargetField = 1;

  explicit Cibtb(const SimConfig& cfg)
      : cfg_(cfg),
        keys_(cfg.device_secret),
        rng_(cfg.seed ^ 0xb7b5eedULL),
        ways_(cfg.set_capacity()),
        sets_per_skew_(static_cast<std::uint32_t>(cfg.n_bin() / 2)) {
    cfg_.validate();
    require(cfg_.i_btb >= 2, "CIBTB needs at least one set per skew (i_btb >= 2)");
    tags_.assign(static_cast<std::size_t>(cfg_.n_bin()) * ways_, TagEntry{});
    targets_.assign(cfg_.n_ball, TargetEntry{});
    valid_count_.assign(cfg_.n_bin(), 0);
    free_.reserve(cfg_.n_ball);
    for (std::uint64_t i = cfg_.n_ball; i-- > 0;) free_.push_back(static_cast<std::uint32_t>(i));
  }

  // Load-balancing index: probe both candidate sets for the encrypted tag;
  // on a miss choose Set0 when N0 <= N1, else Set1.
  BtbLookup lookup(std::uint64_t pc, std::uint32_t tid) {
    const KeyBundle& kb = keys_.bundle(tid);
    BtbLookup r;
    ++metrics_.btb_lookups;
    const unsigned bits = cfg_.btb_skew_index_bits();
    for (unsigned s = 0; s < kBtbSkews; ++s) {
      const auto idx = enc_index(pc, 0, kb.btb_index_keys[s], bits, cfg_.mapping);
      r.candidate_sets[s] = static_cast<std::uint32_t>(s * sets_per_skew_ + idx);
    }
    const std::uint32_t tag = tag_cipher(kb, pc);
    for (std::uint32_t set : r.candidate_sets) {
      const std::uint32_t base = set * ways_;
      for (unsigned w = 0; w < ways_; ++w) {
        const TagEntry& e = tags_[base + w];
        if (!e.valid() || e.tag_cipher != tag) continue;
        const TargetEntry& t = targets_.at(e.fptr);
        if (t.rptr != base + w)
          throw InvariantFault("CIBTB pointer integrity: fptr/rptr mismatch at tag slot " +
                               std::to_string(base + w));
        r.hit = true;
        r.tag_slot = base + w;
        r.target = dec_content(t.target_cipher, cfg_.n_btb, target_key(kb, pc));
        ++metrics_.btb_hits;
        return r;
      }
    }
    ++metrics_.btb_misses;
    const auto n0 = valid_count_[r.candidate_sets[0]];
    const auto n1 = valid_count_[r.candidate_sets[1]];
    r.chosen_set = n0 <= n1 ? r.candidate_sets[0] : r.candidate_sets[1];
    return r;
  }

  // Install a missed branch into `chosen_set` (from the preceding lookup).
  EvictionKind insert(std::uint64_t pc, std::uint32_t tid, std::uint64_t target,
                      std::uint32_t chosen_set) {
    if (chosen_set >= valid_count_.size()) throw ConfigError("chosen_set out of range");
    const KeyBundle& kb = keys_.bundle(tid);
    EvictionKind kind = EvictionKind::None;

    std::uint32_t slot;
    if (!free_.empty()) {
      slot = free_.back();
      free_.pop_back();
    } else {
      slot = pick_replacement_target();
      detach(slot);
      kind = EvictionKind::SE;
    }

    const std::uint32_t base = chosen_set * ways_;
    std::uint32_t way_slot = kNil;
    if (valid_count_[chosen_set] < ways_) {
      for (unsigned w = 0; w < ways_; ++w) {
        if (!tags_[base + w].valid()) {
          way_slot = base + w;
          break;
        }
      }
      if (way_slot == kNil) throw InvariantFault("CIBTB set count disagrees with its tags");
      ++valid_count_[chosen_set];
    } else {
      // Every slot of the chosen set is valid: displace one of them.
      way_slot = base + static_cast<std::uint32_t>(uniform_below(rng_, ways_));
      const std::uint32_t old = tags_[way_slot].fptr;
      if (old == kNil || targets_[old].rptr != way_slot)
        throw InvariantFault("CIBTB pointer integrity: DE victim not linked");
      targets_[old].rptr = kNil;
      free_.push_back(old);
      kind = EvictionKind::DE;
    }

    tags_[way_slot] = TagEntry{tag_cipher(kb, pc), slot};
    targets_[slot] = TargetEntry{
        enc_content(target & low_mask(cfg_.n_btb), cfg_.n_btb, target_key(kb, pc)), way_slot};

    ++metrics_.insertions;
    if (kind == EvictionKind::SE) ++metrics_.se_count;
    if (kind == EvictionKind::DE) ++metrics_.de_count;
    return kind;
  }

  // Rewrite the stored target of a hit entry.
  void update_target(const BtbLookup& hit, std::uint64_t pc, std::uint32_t tid,
                     std::uint64_t target) {
    if (!hit.hit) throw ConfigError("update_target needs a hit lookup");
    const KeyBundle& kb = keys_.bundle(tid);
    TargetEntry& t = targets_.at(tags_.at(hit.tag_slot).fptr);
    t.target_cipher = enc_content(target & low_mask(cfg_.n_btb), cfg_.n_btb, target_key(kb, pc));
  }

  // Evict the target in `slot` and the tag that owns it; the slot returns to
  // the free list.
  void invalidate_via_rptr(std::uint32_t slot) {
    if (slot >= targets_.size() || !targets_[slot].live())
      throw ConfigError("invalidate_via_rptr: slot is not live");
    detach(slot);
    free_.push_back(slot);
  }

  // Walk both stores and count every broken pointer or count invariant.
  AuditReport audit() const {
    AuditReport rep;
    auto fail = [&rep](std::string msg) {
      if (rep.violations++ == 0) rep.first = std::move(msg);
    };
    std::uint64_t valid_tags = 0;
    for (std::uint32_t set = 0; set < valid_count_.size(); ++set) {
      unsigned n = 0;
      for (unsigned w = 0; w < ways_; ++w) {
        const std::uint32_t id = set * ways_ + w;
        const TagEntry& e = tags_[id];
        if (!e.valid()) continue;
        ++n;
        if (e.fptr >= targets_.size()) {
          fail("tag " + std::to_string(id) + " fptr out of range");
        } else if (targets_[e.fptr].rptr != id) {
          fail("tag " + std::to_string(id) + " fptr target does not point back");
        }
      }
      valid_tags += n;
      if (n != valid_count_[set]) fail("set " + std::to_string(set) + " count mismatch");
      if (n > ways_) fail("set " + std::to_string(set) + " over capacity");
    }
    std::uint64_t live = 0;
    for (std::uint32_t i = 0; i < targets_.size(); ++i) {
      const TargetEntry& t = targets_[i];
      if (!t.live()) continue;
      ++live;
      if (t.rptr >= tags_.size() || tags_[t.rptr].fptr != i)
        fail("target " + std::to_string(i) + " rptr does not point back");
    }
    if (live != valid_tags) fail("live targets != valid tags");
    std::vector<bool> seen(targets_.size(), false);
    for (std::uint32_t f : free_) {
      if (f >= targets_.size() || seen[f] || targets_[f].live()) {
        fail("free list entry " + std::to_string(f) + " invalid");
        continue;
      }
      seen[f] = true;
    }
    if (free_.size() + live != targets_.size()) fail("free + live != n_ball");
    return rep;
  }

  const RunMetrics& metrics() const { return metrics_; }
  // Valid tags per set; sets [0, n_bin/2) belong to skew 0, the rest to skew 1.
  std::span<const std::uint8_t> set_occupancy() const { return valid_count_; }
  std::size_t free_targets() const { return free_.size(); }
  unsigned set_capacity() const { return ways_; }
  std::uint32_t sets_per_skew() const { return sets_per_skew_; }
  const SimConfig& config() const { return cfg_; }
  KeyStore& keys() { return keys_; }
  const TagEntry& tag_entry(std::uint32_t id) const { return tags_.at(id); }
  const TargetEntry& target_entry(std::uint32_t slot) const { return targets_.at(slot); }
  std::uint32_t set_of_tag(std::uint32_t tag_slot) const { return tag_slot / ways_; }

 private:
  std::uint32_t tag_cipher(const KeyBundle& kb, std::uint64_t pc) const {
    const std::uint64_t plain = fold(pc >> cfg_.i_btb, cfg_.t_btb);
    return static_cast<std::uint32_t>(
        enc_content(plain, cfg_.t_btb, content_entry_key(kb.btb_content_key, pc, kTagField)));
  }

  static std::uint64_t target_key(const KeyBundle& kb, std::uint64_t pc) {
    return content_entry_key(kb.btb_content_key, pc, kTargetField);
  }

  // Load-balancing replacement: two random targets, evict the one whose
  // owning set holds more valid tags (ties go to the first draw).
  std::uint32_t pick_replacement_target() {
    const auto r0 = static_cast<std::uint32_t>(uniform_below(rng_, targets_.size()));
    const auto r1 = static_cast<std::uint32_t>(uniform_below(rng_, targets_.size()));
    const auto m0 = valid_count_[owner_set(r0)];
    const auto m1 = valid_count_[owner_set(r1)];
    return m0 >= m1 ? r0 : r1;
  }

  std::uint32_t owner_set(std::uint32_t slot) const {
    const std::uint32_t tag = targets_[slot].rptr;
    if (tag == kNil || tag >= tags_.size())
      throw InvariantFault("CIBTB pointer integrity: target " + std::to_string(slot) +
                           " has no owner");
    return tag / ways_;
  }

  // Unlink a live target from its tag; the slot is left unowned.
  void detach(std::uint32_t slot) {
    const std::uint32_t tag = targets_[slot].rptr;
    if (tag == kNil || tag >= tags_.size() || tags_[tag].fptr != slot)
      throw InvariantFault("CIBTB pointer integrity: dangling rptr at target " +
                           std::to_string(slot));
    tags_[tag].fptr = kNil;
    --valid_count_[tag / ways_];
    targets_[slot].rptr = kNil;
  }

  SimConfig cfg_;
  KeyStore keys_;
  Rng rng_;
  unsigned ways_;
  std::uint32_t sets_per_skew_;
  std::vector<TagEntry> tags_;
  std::vector<TargetEntry> targets_;
  std::vector<std::uint8_t> valid_count_;
  std::vector<std::uint32_t> free_;
  RunMetrics metrics_;
};

}  // namespace cibpu
