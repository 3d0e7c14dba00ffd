#pragma once

// Bins-and-balls engine: sets are bins, installed targets are balls, attacker
// accesses are throws. Mirrors the CIBTB insertion path without tags, keys or
// pointers so that long runs stay cheap.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cibpu/config.hpp"
#include "cibpu/dist.hpp"
#include "cibpu/error.hpp"

namespace cibpu {

struct BinsConfig {
  std::uint64_t n_bin = 4096;
  std::uint64_t n_ball = 4096 * 8;
  unsigned capacity = 13;
  bool two_skew = true;
  std::uint64_t seed = kDefaultSeed;
  // Insertions before the occupancy census starts; 0 means n_ball.
  std::uint64_t warmup = 0;
  // Census period in insertions; 0 means n_bin.
  std::uint64_t census_interval = 0;
  // Number of equal time batches kept for batch-means error estimates.
  unsigned batches = 20;
  // Log the load comparison of the first this-many insertions.
  std::uint64_t decision_log_limit = 0;

  std::uint64_t effective_warmup() const { return warmup ? warmup : n_ball; }
  std::uint64_t effective_census_interval() const { return census_interval ? census_interval : n_bin; }
};

struct OccupancyHistogram {
  std::vector<std::uint64_t> counts;
  std::uint64_t total_observations = 0;

  void add(unsigned n, std::uint64_t times = 1) {
    if (n >= counts.size()) counts.resize(n + 1, 0);
    counts[n] += times;
    total_observations += times;
  }
  void merge(const OccupancyHistogram& o) {
    if (o.counts.size() > counts.size()) counts.resize(o.counts.size(), 0);
    for (std::size_t i = 0; i < o.counts.size(); ++i) counts[i] += o.counts[i];
    total_observations += o.total_observations;
  }
};

inline SteadyStateDist histogram_probs(const OccupancyHistogram& h) {
  if (h.total_observations == 0) throw ConfigError("empty occupancy histogram");
  SteadyStateDist d;
  d.source = DistSource::Empirical;
  d.p.resize(h.counts.size());
  const long double total = static_cast<long double>(h.total_observations);
  for (std::size_t i = 0; i < h.counts.size(); ++i) d.p[i] = h.counts[i] / total;
  return d;
}

// `N,count,probability` rows with a header line.
inline std::string histogram_csv(const OccupancyHistogram& h) {
  const SteadyStateDist d = histogram_probs(h);
  std::ostringstream os;
  os.precision(17);
  os << "N,count,probability\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    os << i << ',' << h.counts[i] << ',' << static_cast<double>(d.p[i]) << '\n';
  return os.str();
}

struct OverflowResult {
  std::vector<std::uint64_t> throws;  // per trial
  double mean = 0;
  double stddev = 0;
};

// Throw balls uniformly until some bin holds capacity + 1 balls; repeat.
inline OverflowResult run_conventional_overflow(const BinsConfig& cfg, std::uint64_t trials) {
  require(!cfg.two_skew, "run_conventional_overflow needs two_skew = false");
  require(cfg.n_bin >= 1, "n_bin must be positive");
  Rng rng(cfg.seed);
  std::vector<std::uint32_t> load(cfg.n_bin);
  OverflowResult r;
  r.throws.reserve(trials);
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::fill(load.begin(), load.end(), 0);
    std::uint64_t n = 0;
    for (;;) {
      ++n;
      if (++load[uniform_below(rng, cfg.n_bin)] > cfg.capacity) break;
    }
    r.throws.push_back(n);
  }
  if (!r.throws.empty()) {
    long double sum = 0, sq = 0;
    for (auto x : r.throws) sum += x;
    r.mean = static_cast<double>(sum / r.throws.size());
    for (auto x : r.throws) sq += (x - r.mean) * (x - r.mean);
    r.stddev = r.throws.size() > 1 ? std::sqrt(static_cast<double>(sq / (r.throws.size() - 1))) : 0;
  }
  return r;
}

struct InsertionDecision {
  unsigned load0 = 0;
  unsigned load1 = 0;
  unsigned chosen_skew = 0;
};

struct TwoSkewResult {
  OccupancyHistogram histogram;                 // both skews
  std::array<OccupancyHistogram, 2> per_skew;
  std::vector<std::array<OccupancyHistogram, 2>> batches;
  std::uint64_t insertions = 0;
  std::uint64_t steady_insertions = 0;
  std::uint64_t de_count = 0;
  std::uint64_t steady_de_count = 0;
  std::uint64_t se_count = 0;
  std::optional<std::uint64_t> first_de_at;     // 1-based insertion number
  std::uint64_t live_balls = 0;
  std::uint64_t free_slots = 0;
  std::vector<InsertionDecision> decisions;

  double attacks_per_de() const {
    return steady_de_count ? static_cast<double>(steady_insertions) / steady_de_count
                           : std::numeric_limits<double>::infinity();
  }
};

// Two skews of n_bin/2 bins. Each insertion draws one bin per skew and picks
// the less loaded (ties to skew 0). Once all n_ball slots are live, a slot is
// freed first: two uniform candidate balls, the one in the fuller bin is
// removed (ties to the first). If the chosen bin is then still at capacity,
// one of its balls is displaced: a DE.
inline TwoSkewResult run_two_skew(const BinsConfig& cfg, std::uint64_t insertions) {
  require(cfg.two_skew, "run_two_skew needs two_skew = true");
  require(cfg.n_bin >= 2 && cfg.n_bin % 2 == 0, "n_bin must be even and >= 2");
  require(cfg.capacity >= 1 && cfg.capacity <= 1024, "capacity must be in [1, 1024]");
  require(cfg.n_ball >= 1 && cfg.n_ball <= cfg.n_bin * cfg.capacity,
          "n_ball must be in [1, n_bin * capacity]");
  require(cfg.batches >= 1, "batches must be positive");

  const std::uint64_t half = cfg.n_bin / 2;
  const unsigned cap = cfg.capacity;
  const std::uint64_t warmup = cfg.effective_warmup();
  const std::uint64_t census = cfg.effective_census_interval();
  Rng rng(cfg.seed);

  std::vector<std::uint32_t> load(cfg.n_bin, 0);
  std::vector<std::uint32_t> members(cfg.n_bin * cap);  // ball ids per bin
  std::vector<std::uint32_t> ball_bin(cfg.n_ball, 0);
  std::vector<std::uint32_t> ball_pos(cfg.n_ball, 0);
  std::vector<std::uint32_t> free_slots;
  free_slots.reserve(cfg.n_ball);
  for (std::uint64_t i = cfg.n_ball; i-- > 0;) free_slots.push_back(static_cast<std::uint32_t>(i));

  auto remove_ball = [&](std::uint32_t ball) {
    const std::uint32_t bin = ball_bin[ball];
    const std::uint32_t pos = ball_pos[ball];
    const std::uint32_t last = members[bin * cap + load[bin] - 1];
    members[bin * cap + pos] = last;
    ball_pos[last] = pos;
    --load[bin];
  };
  auto place_ball = [&](std::uint32_t ball, std::uint32_t bin) {
    members[bin * cap + load[bin]] = ball;
    ball_bin[ball] = bin;
    ball_pos[ball] = load[bin];
    ++load[bin];
  };

  TwoSkewResult r;
  r.batches.resize(cfg.batches);
  const std::uint64_t steady_total = insertions > warmup ? insertions - warmup : 0;

  for (std::uint64_t t = 0; t < insertions; ++t) {
    const auto b0 = static_cast<std::uint32_t>(uniform_below(rng, half));
    const auto b1 = static_cast<std::uint32_t>(half + uniform_below(rng, half));
    const bool pick0 = load[b0] <= load[b1];
    const std::uint32_t chosen = pick0 ? b0 : b1;
    if (t < cfg.decision_log_limit) r.decisions.push_back({load[b0], load[b1], pick0 ? 0u : 1u});

    std::uint32_t slot;
    if (!free_slots.empty()) {
      slot = free_slots.back();
      free_slots.pop_back();
    } else {
      const auto r0 = static_cast<std::uint32_t>(uniform_below(rng, cfg.n_ball));
      const auto r1 = static_cast<std::uint32_t>(uniform_below(rng, cfg.n_ball));
      slot = load[ball_bin[r0]] >= load[ball_bin[r1]] ? r0 : r1;
      remove_ball(slot);
      ++r.se_count;
    }

    const bool steady = t >= warmup;
    if (load[chosen] >= cap) {
      const std::uint32_t victim = members[chosen * cap + uniform_below(rng, load[chosen])];
      remove_ball(victim);
      free_slots.push_back(victim);
      ++r.de_count;
      if (steady) ++r.steady_de_count;
      if (!r.first_de_at) r.first_de_at = t + 1;
    }
    place_ball(slot, chosen);

    if (steady) {
      ++r.steady_insertions;
      if ((t - warmup) % census == 0) {
        const std::size_t batch = static_cast<std::size_t>((t - warmup) * cfg.batches / steady_total);
        auto& bh = r.batches[batch];
        for (std::uint64_t b = 0; b < cfg.n_bin; ++b) {
          const unsigned skew = b < half ? 0 : 1;
          bh[skew].add(load[b]);
        }
      }
    }
  }
  r.insertions = insertions;
  for (const auto& b : r.batches) {
    for (unsigned s = 0; s < 2; ++s) {
      r.per_skew[s].merge(b[s]);
      r.histogram.merge(b[s]);
    }
  }
  r.free_slots = free_slots.size();
  r.live_balls = std::accumulate(load.begin(), load.end(), std::uint64_t{0});
  return r;
}

}  // namespace cibpu
