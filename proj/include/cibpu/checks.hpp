#pragma once

// Randomized property checks shared by the selftest command and the test
// suites: pointer audits, skew replication coherence, cipher round trips and
// birth-death balance residuals.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cibpu/analytics.hpp"
#include "cibpu/binsballs.hpp"
#include "cibpu/cibtb.hpp"
#include "cibpu/cipht.hpp"
#include "cibpu/config.hpp"
#include "cibpu/keying.hpp"

namespace cibpu {

struct StressReport {
  std::uint64_t ops = 0;
  std::uint64_t audits = 0;
  AuditReport audit;
  RunMetrics metrics;
};

// Random mix of lookups, inserts, target updates and rptr invalidations over a
// small PC pool, with a full audit every `audit_every` operations and at the end.
inline StressReport cibtb_stress(const SimConfig& cfg, std::uint64_t ops, std::uint64_t seed,
                                 std::uint64_t audit_every = 10000) {
  Cibtb btb(cfg);
  Rng rng(seed);
  const std::uint64_t pool = 4 * cfg.n_ball + 16;
  StressReport rep;
  auto merge = [&rep](const AuditReport& a) {
    if (a.violations && rep.audit.violations == 0) rep.audit.first = a.first;
    rep.audit.violations += a.violations;
    ++rep.audits;
  };
  for (std::uint64_t i = 0; i < ops; ++i) {
    const std::uint64_t pc = 0x1000 + 4 * uniform_below(rng, pool);
    const auto tid = static_cast<std::uint32_t>(uniform_below(rng, 3));
    const std::uint64_t u = uniform_below(rng, 100);
    if (u < 5) {
      if (btb.free_targets() < cfg.n_ball) {
        // Pick a live slot by probing from a random start.
        std::uint32_t s = static_cast<std::uint32_t>(uniform_below(rng, cfg.n_ball));
        while (!btb.target_entry(s).live()) s = (s + 1) % cfg.n_ball;
        btb.invalidate_via_rptr(s);
      }
    } else {
      const BtbLookup l = btb.lookup(pc, tid);
      if (l.hit) {
        if (u < 20) btb.update_target(l, pc, tid, rng());
      } else {
        btb.insert(pc, tid, rng(), l.chosen_set);
      }
    }
    if (audit_every && (i + 1) % audit_every == 0) merge(btb.audit());
  }
  merge(btb.audit());
  rep.ops = ops;
  rep.metrics = btb.metrics();
  return rep;
}

// After every CIPHT update, all skews must agree on the decrypted tag and state
// of the updated branch. Returns the number of disagreements.
inline std::uint64_t cipht_coherence_violations(const SimConfig& cfg, std::uint64_t ops,
                                                std::uint64_t seed) {
  Cipht pht(cfg);
  Rng rng(seed);
  std::uint64_t bad = 0;
  for (std::uint64_t i = 0; i < ops; ++i) {
    const std::uint64_t pc = 0x2000 + 4 * uniform_below(rng, 256);
    const auto tid = static_cast<std::uint32_t>(uniform_below(rng, 2));
    const std::uint64_t ghr = pht.ghr();
    pht.update(pc, tid, uniform_below(rng, 4) != 0);
    const std::uint64_t after = pht.ghr();
    pht.set_ghr(ghr);
    const auto v = pht.inspect(pc, tid);
    pht.set_ghr(after);
    for (unsigned s = 0; s < cfg.pht_skews; ++s)
      if (!v[s].tag_match || v[s].state != v[0].state) ++bad;
  }
  return bad;
}

// dec(enc(x)) == x for random payloads at every width in [1, 64].
inline std::uint64_t content_roundtrip_failures(std::uint64_t seed, unsigned per_width) {
  Rng rng(seed);
  std::uint64_t bad = 0;
  for (unsigned w = 1; w <= 64; ++w) {
    for (unsigned i = 0; i < per_width; ++i) {
      const std::uint64_t x = rng() & low_mask(w);
      const std::uint64_t k = rng();
      if (dec_content(enc_content(x, w, k), w, k) != x) ++bad;
    }
  }
  return bad;
}

struct BalanceResidual {
  unsigned n = 0;
  double mean = 0;  // up - down flux per insertion, averaged over batches
  double se = 0;    // batch-means standard error
  double z() const { return se > 0 ? mean / se : (mean == 0 ? 0 : INFINITY); }
};

// Up/down flux balance between occupancy N and N+1 for each batch of a
// two-skew run. `by_skew` uses the tie-aware per-skew up flux; otherwise the
// symmetric pooled form.
inline std::vector<BalanceResidual> balance_residuals(const TwoSkewResult& r, long double n_ball,
                                                      long double n_bin, unsigned n_lo,
                                                      unsigned n_hi, bool by_skew = true) {
  std::vector<BalanceResidual> out;
  std::vector<std::vector<double>> per_batch(n_hi - n_lo + 1);
  for (const auto& b : r.batches) {
    if (b[0].total_observations == 0 || b[1].total_observations == 0) continue;
    const SteadyStateDist d0 = histogram_probs(b[0]);
    const SteadyStateDist d1 = histogram_probs(b[1]);
    OccupancyHistogram both = b[0];
    both.merge(b[1]);
    const SteadyStateDist pooled = histogram_probs(both);
    for (unsigned n = n_lo; n <= n_hi; ++n) {
      const long double up = by_skew ? transition_up_by_skew(d0, d1, n) : transition_up(pooled, n);
      const long double down = transition_down(pooled, n, n_ball, n_bin);
      per_batch[n - n_lo].push_back(static_cast<double>(up - down));
    }
  }
  for (unsigned n = n_lo; n <= n_hi; ++n) {
    const auto& v = per_batch[n - n_lo];
    BalanceResidual br;
    br.n = n;
    if (!v.empty()) {
      double s = 0, sq = 0;
      for (double x : v) s += x;
      br.mean = s / v.size();
      for (double x : v) sq += (x - br.mean) * (x - br.mean);
      br.se = v.size() > 1 ? std::sqrt(sq / (v.size() - 1) / v.size()) : 0;
    }
    out.push_back(br);
  }
  return out;
}

}  // namespace cibpu
