#pragma once

// Attacker strategies: reuse-attack Monte Carlo at reduced widths,
// group-elimination eviction sets against a conventional BTB, and a random-PC
// insertion storm that counts dangerous evictions in CIBTB.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cibpu/analytics.hpp"
#include "cibpu/baseline.hpp"
#include "cibpu/binsballs.hpp"
#include "cibpu/cibtb.hpp"
#include "cibpu/cipht.hpp"
#include "cibpu/config.hpp"
#include "cibpu/error.hpp"

namespace cibpu {

enum class AttackKind { ReusePht, ReuseBtb, GemEviction, DeProbe };

inline const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::ReusePht: return "reuse_pht";
    case AttackKind::ReuseBtb: return "reuse_btb";
    case AttackKind::GemEviction: return "gem_eviction";
    case AttackKind::DeProbe: return "de_probe";
  }
  return "?";
}

inline AttackKind parse_attack_kind(std::string_view s) {
  if (s == "reuse_pht") return AttackKind::ReusePht;
  if (s == "reuse_btb") return AttackKind::ReuseBtb;
  if (s == "gem_eviction") return AttackKind::GemEviction;
  if (s == "de_probe") return AttackKind::DeProbe;
  throw ConfigError("unknown attack kind '" + std::string(s) + "'");
}

inline constexpr std::uint32_t kVictimTid = 1;
inline constexpr std::uint32_t kAttackerTid = 2;
inline constexpr unsigned kPcBits = 48;

struct AttackScenario {
  AttackKind kind = AttackKind::ReusePht;
  SimConfig reduced_config;
  unsigned trial_count = 10000;
  std::uint64_t seed = kDefaultSeed;
  // Per-trial attempt cap; 0 means 64x the analytic expectation.
  std::uint64_t per_trial_budget = 0;
  // Upper bound on expected total attempts (expectation x trials).
  double total_budget = 1e10;
};

struct AttackResult {
  AttackKind kind = AttackKind::ReusePht;
  std::vector<std::uint64_t> samples;  // attempts per trial
  std::vector<bool> success;
  std::uint64_t successes = 0;
  double mean = 0;    // over successful trials only
  double stddev = 0;  // over successful trials only
  std::uint64_t total_accesses = 0;
  BigUint analytic_attempts = 0;
  bool rejected = false;  // scenario exceeded the budget; nothing was simulated
};

inline BigUint reuse_expected_attempts(const AttackScenario& s) {
  const SimConfig& c = s.reduced_config;
  if (s.kind == AttackKind::ReusePht) return reuse_attempts_pht(c.i_pht, c.t_pht, c.pht_skews);
  if (s.kind == AttackKind::ReuseBtb)
    return reuse_attempts_btb(c.btb_skew_index_bits(), c.t_btb, c.n_btb);
  throw ConfigError("reuse expectation needs kind reuse_pht or reuse_btb");
}

namespace detail {

inline void finish_stats(AttackResult& r) {
  long double sum = 0, sq = 0;
  for (std::size_t i = 0; i < r.samples.size(); ++i)
    if (r.success[i]) sum += r.samples[i];
  if (r.successes == 0) return;
  r.mean = static_cast<double>(sum / r.successes);
  for (std::size_t i = 0; i < r.samples.size(); ++i)
    if (r.success[i]) sq += (r.samples[i] - r.mean) * (r.samples[i] - r.mean);
  r.stddev = r.successes > 1 ? std::sqrt(static_cast<double>(sq / (r.successes - 1))) : 0;
}

inline std::uint64_t random_secret(Rng& rng) {
  for (;;)
    if (std::uint64_t s = rng()) return s;
}

}  // namespace detail

// Victim installs one entry; the attacker issues fresh random PCs until its own
// decryption of some entry is consistent with the victim's content.
inline AttackResult simulate_reuse(const AttackScenario& s) {
  if (s.kind != AttackKind::ReusePht && s.kind != AttackKind::ReuseBtb)
    throw ConfigError("simulate_reuse needs kind reuse_pht or reuse_btb");
  AttackResult r;
  r.kind = s.kind;
  r.analytic_attempts = reuse_expected_attempts(s);
  const double expected = to_double(r.analytic_attempts);
  if (expected * s.trial_count > s.total_budget) {
    r.rejected = true;
    return r;
  }
  const std::uint64_t cap =
      s.per_trial_budget ? s.per_trial_budget : static_cast<std::uint64_t>(64 * expected) + 64;
  s.reduced_config.validate();

  Rng rng(s.seed);
  r.samples.reserve(s.trial_count);
  r.success.reserve(s.trial_count);
  for (unsigned trial = 0; trial < s.trial_count; ++trial) {
    SimConfig cfg = s.reduced_config;
    cfg.device_secret = detail::random_secret(rng);
    cfg.seed = rng();
    std::uint64_t attempts = 0;
    bool ok = false;
    if (s.kind == AttackKind::ReusePht) {
      Cipht pht(cfg);
      const std::uint64_t vpc = rng() & low_mask(kPcBits);
      pht.update(vpc, kVictimTid, (rng() & 1) != 0);
      // The victim installed at GHR 0; read its state and probe at the same history.
      pht.set_ghr(0);
      const std::uint8_t vstate = pht.inspect(vpc, kVictimTid)[0].state;
      while (attempts < cap) {
        ++attempts;
        const auto view = pht.inspect(rng() & low_mask(kPcBits), kAttackerTid);
        bool all = true;
        for (unsigned k = 0; k < cfg.pht_skews && all; ++k)
          all = view[k].tag_match && view[k].state == vstate;
        if (all) {
          ok = true;
          break;
        }
      }
    } else {
      Cibtb btb(cfg);
      const std::uint64_t vpc = rng() & low_mask(kPcBits);
      const std::uint64_t vtarget = rng() & low_mask(cfg.n_btb);
      const BtbLookup vl = btb.lookup(vpc, kVictimTid);
      btb.insert(vpc, kVictimTid, vtarget, vl.chosen_set);
      while (attempts < cap) {
        ++attempts;
        const BtbLookup al = btb.lookup(rng() & low_mask(kPcBits), kAttackerTid);
        if (al.hit && *al.target == vtarget) {
          ok = true;
          break;
        }
      }
    }
    r.samples.push_back(attempts);
    r.success.push_back(ok);
    r.successes += ok ? 1 : 0;
    r.total_accesses += attempts;
  }
  detail::finish_stats(r);
  return r;
}

struct GemResult {
  std::uint64_t accesses = 0;        // build + reduction
  std::uint64_t build_accesses = 0;  // collecting the initial candidate pool
  std::uint64_t target_pc = 0;
  std::size_t pool_size = 0;
  std::vector<std::uint64_t> eviction_set;
};

// Replay `lines` after installing `target` in a freshly reset BTB and report
// whether the target was evicted. Costs lines.size() + 2 accesses.
inline bool gem_evicts(ConvBtb& scratch, std::uint64_t target, std::span<const std::uint64_t> lines,
                       std::uint64_t& accesses) {
  scratch.reset();
  scratch.access(target, 0, true);
  for (std::uint64_t pc : lines) scratch.access(pc, 0, true);
  accesses += lines.size() + 2;
  return !scratch.access(target, std::nullopt, false).hit;
}

// Group elimination: split the pool into `group_count` groups and drop the
// first group whose removal keeps the target evicted, until `ways` lines remain.
inline std::vector<std::uint64_t> gem_reduce(ConvBtb& scratch, std::uint64_t target,
                                             std::vector<std::uint64_t> pool, unsigned group_count,
                                             std::uint64_t& accesses) {
  const unsigned ways = scratch.config().ways;
  if (group_count < 2) throw ConfigError("GEM needs at least two groups");
  if (!gem_evicts(scratch, target, pool, accesses))
    throw ConfigError("GEM: candidate pool insufficient (does not evict the target)");
  std::vector<std::uint64_t> rest;
  while (pool.size() > ways) {
    const std::size_t n = pool.size();
    const std::size_t groups = std::min<std::size_t>(group_count, n);
    bool removed = false;
    for (std::size_t g = 0; g < groups && !removed; ++g) {
      const std::size_t lo = g * n / groups, hi = (g + 1) * n / groups;
      rest.clear();
      rest.insert(rest.end(), pool.begin(), pool.begin() + lo);
      rest.insert(rest.end(), pool.begin() + hi, pool.end());
      if (gem_evicts(scratch, target, rest, accesses)) {
        pool.swap(rest);
        removed = true;
      }
    }
    if (!removed) throw ConfigError("GEM: candidate pool insufficient (no removable group)");
  }
  return pool;
}

// Eviction set for a victim already installed in `btb`: stream random PCs
// into `btb` until the victim's line is evicted, then reduce that pool.
inline GemResult gem_find_eviction_set(ConvBtb& btb, std::uint64_t victim_pc, unsigned group_count,
                                       Rng& rng, std::uint64_t max_build = 0) {
  const ConvBtbConfig& cfg = btb.config();
  if (max_build == 0) max_build = std::uint64_t{64} * cfg.ways << cfg.index_bits;
  const std::uint64_t vset = btb.set_of(victim_pc);
  const std::uint64_t vtag = btb.tag_of(victim_pc);
  GemResult r;
  r.target_pc = victim_pc;
  std::vector<std::uint64_t> pool;
  bool evicted = false;
  while (r.build_accesses < max_build) {
    std::uint64_t pc = rng() & low_mask(kPcBits);
    if (pc == victim_pc) continue;
    ++r.build_accesses;
    pool.push_back(pc);
    const ConvBtbAccess a = btb.access(pc, 0, true);
    if (a.evicted_way && a.set == vset && a.evicted_tag == vtag) {
      evicted = true;
      break;
    }
  }
  if (!evicted) throw ConfigError("GEM: victim eviction never observed within the access budget");
  r.pool_size = pool.size();
  ConvBtb scratch(cfg);
  std::uint64_t reduce = 0;
  r.eviction_set = gem_reduce(scratch, victim_pc, std::move(pool), group_count, reduce);
  r.accesses = r.build_accesses + reduce;
  return r;
}

// Attack on the attacker's own first conflict: stream random PCs into a fresh
// BTB until the first eviction, target the evicted line, reduce the pool.
inline GemResult gem_first_conflict(const ConvBtbConfig& cfg, unsigned group_count, Rng& rng,
                                    std::uint64_t max_build = 0) {
  if (max_build == 0) max_build = std::uint64_t{64} * cfg.ways << cfg.index_bits;
  ConvBtb btb(cfg);
  std::unordered_map<std::uint64_t, std::uint64_t> resident;  // (set, tag) -> pc
  auto key = [&](std::uint64_t set, std::uint64_t tag) { return (set << 40) ^ tag; };
  GemResult r;
  std::vector<std::uint64_t> pool;
  std::optional<std::uint64_t> target;
  while (r.build_accesses < max_build && !target) {
    const std::uint64_t pc = rng() & low_mask(kPcBits);
    ++r.build_accesses;
    const ConvBtbAccess a = btb.access(pc, 0, true);
    if (a.hit) continue;
    if (a.evicted_way) {
      auto it = resident.find(key(a.set, a.evicted_tag));
      if (it == resident.end()) throw InvariantFault("GEM: evicted line was never inserted");
      target = it->second;
    }
    resident[key(a.set, btb.tag_of(pc))] = pc;
    pool.push_back(pc);
  }
  if (!target) throw ConfigError("GEM: no eviction observed within the access budget");
  std::erase(pool, *target);
  r.target_pc = *target;
  r.pool_size = pool.size();
  ConvBtb scratch(cfg);
  std::uint64_t reduce = 0;
  r.eviction_set = gem_reduce(scratch, *target, std::move(pool), group_count, reduce);
  r.accesses = r.build_accesses + reduce;
  return r;
}

struct DeProbeResult {
  std::uint64_t insertions = 0;
  std::uint64_t accesses = 0;
  std::uint64_t de_count = 0;
  std::uint64_t se_count = 0;
  std::optional<std::uint64_t> first_de_at;  // 1-based insertion number
  std::array<OccupancyHistogram, 2> census;  // per skew, when requested
  RunMetrics metrics;
};

struct DeProbeOptions {
  std::uint64_t census_interval = 0;  // 0: no census
  std::uint64_t warmup = 0;           // insertions before the census starts
  std::uint32_t tid = kAttackerTid;
};

// Random-PC insertion storm: every miss installs a random target.
inline DeProbeResult de_probe(Cibtb& btb, std::uint64_t budget_insertions, Rng& rng,
                              const DeProbeOptions& opt = {}) {
  DeProbeResult r;
  const std::uint64_t n_btb_mask = low_mask(btb.config().n_btb);
  const std::uint64_t de_before = btb.metrics().de_count;
  const std::uint64_t se_before = btb.metrics().se_count;
  while (r.insertions < budget_insertions) {
    const std::uint64_t pc = rng() & low_mask(kPcBits);
    ++r.accesses;
    const BtbLookup l = btb.lookup(pc, opt.tid);
    if (l.hit) continue;
    const EvictionKind k = btb.insert(pc, opt.tid, rng() & n_btb_mask, l.chosen_set);
    ++r.insertions;
    if (k == EvictionKind::DE && !r.first_de_at) r.first_de_at = r.insertions;
    if (opt.census_interval && r.insertions > opt.warmup &&
        (r.insertions - opt.warmup - 1) % opt.census_interval == 0) {
      const auto occ = btb.set_occupancy();
      const std::uint32_t half = btb.sets_per_skew();
      for (std::uint32_t s = 0; s < occ.size(); ++s) r.census[s < half ? 0 : 1].add(occ[s]);
    }
  }
  r.de_count = btb.metrics().de_count - de_before;
  r.se_count = btb.metrics().se_count - se_before;
  r.metrics = btb.metrics();
  r.metrics.attacker_accesses = r.accesses;
  return r;
}

}  // namespace cibpu
