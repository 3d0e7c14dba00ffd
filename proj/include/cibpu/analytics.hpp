#pragma once

// Closed-form and numerical security estimates: reuse-attack attempt counts,
// the Poisson first-eviction model for a conventional BTB, and the
// birth-death steady state of the two-skew load-balanced BTB.

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cibpu/dist.hpp"
#include "cibpu/error.hpp"

namespace cibpu {

using BigUint = boost::multiprecision::cpp_int;

inline BigUint pow2(unsigned e) {
  BigUint v = 1;
  return v << e;
}

// Reuse attack on the skewed PHT: index, tag and 2-bit state must all line
// up in every skew.
inline BigUint reuse_attempts_pht(unsigned i_bits, unsigned t_bits, unsigned skews = 3) {
  return pow2((i_bits + t_bits + 2) * skews);
}

// Reuse attack on the BTB: index, tag and the full target must line up.
inline BigUint reuse_attempts_btb(unsigned i_bits, unsigned t_bits, unsigned n_bits) {
  return pow2(i_bits + t_bits + n_bits);
}

inline double to_double(const BigUint& v) { return v.convert_to<double>(); }

// P(N balls in a given bin) after L uniform throws into n_bin bins, Poisson limit.
inline long double poisson_occupancy(long double L, std::uint64_t n_bin, unsigned N) {
  if (n_bin == 0) throw ConfigError("n_bin must be positive");
  if (L < 0) throw ConfigError("L must be non-negative");
  const long double lambda = L / static_cast<long double>(n_bin);
  if (lambda == 0) return N == 0 ? 1.0L : 0.0L;
  return std::exp(-lambda + N * std::log(lambda) - std::lgamma(N + 1.0L));
}

// Exact binomial form of the same probability.
inline long double binomial_occupancy(std::uint64_t L, std::uint64_t n_bin, unsigned N) {
  if (n_bin == 0) throw ConfigError("n_bin must be positive");
  if (N > L) return 0;
  const long double p = 1.0L / n_bin;
  if (p == 1) return N == L ? 1.0L : 0.0L;
  const long double log_choose =
      std::lgamma(L + 1.0L) - std::lgamma(N + 1.0L) - std::lgamma(L - N + 1.0L);
  return std::exp(log_choose + N * std::log(p) + (L - N) * std::log1p(-p));
}

// Number of throws L at which the expected count of overflowing bins
// (n_bin * Poisson(L/n_bin, W+1)) equals `expected_de`, on the rising branch
// lambda < W + 1.
inline double solve_first_de_accesses(std::uint64_t n_bin, unsigned W, double expected_de = 0.5) {
  if (n_bin == 0) throw ConfigError("n_bin must be positive");
  if (!(expected_de > 0)) throw ConfigError("expected_de must be positive");
  const long double n = static_cast<long double>(n_bin);
  auto lhs = [&](long double lambda) { return n * poisson_occupancy(lambda * n, n_bin, W + 1); };
  long double lo = 0, hi = W + 1.0L;
  if (lhs(hi) < expected_de)
    throw ConfigError("no solution on the rising branch for n_bin=" + std::to_string(n_bin) +
                      ", W=" + std::to_string(W));
  while (hi - lo > 1e-13L * hi) {
    const long double mid = 0.5L * (lo + hi);
    (lhs(mid) < expected_de ? lo : hi) = mid;
  }
  return static_cast<double>(0.5L * (lo + hi) * n);
}

// Exact E[number of throws until some bin first holds W+1 balls]:
// sum over L of P(no bin above W after L throws). The no-overflow probability
// is computed bin by bin: bin j of j remaining bins receives Binomial(L, 1/j).
inline long double expected_first_overflow(std::uint64_t n_bin, unsigned W) {
  if (n_bin == 0) throw ConfigError("n_bin must be positive");
  const std::uint64_t max_l = n_bin * W;
  if (static_cast<long double>(n_bin) * (max_l + 1) * (W + 1) > 5e8L)
    throw ConfigError("expected_first_overflow: configuration too large for exact evaluation");
  // f[L] = P(no overflow | L balls over j bins), built up for j = 1..n_bin.
  std::vector<long double> f(max_l + 1, 0), next(max_l + 1, 0);
  for (std::uint64_t L = 0; L <= max_l; ++L) f[L] = L <= W ? 1 : 0;
  for (std::uint64_t j = 2; j <= n_bin; ++j) {
    const long double p = 1.0L / j;
    const long double odds = p / (1 - p);
    for (std::uint64_t L = 0; L <= max_l; ++L) {
      long double pmf = std::pow(1 - p, static_cast<long double>(L));
      long double acc = 0;
      for (std::uint64_t k = 0; k <= W && k <= L; ++k) {
        if (k > 0) pmf *= odds * (L - k + 1) / k;
        acc += pmf * f[L - k];
      }
      next[L] = acc;
    }
    f.swap(next);
  }
  long double e = 0;
  for (long double x : f) e += x;
  return e;
}

// Group-elimination eviction-set cost estimate.
inline double gem_eviction_set_cost(unsigned W, double l1) {
  if (W == 0 || !(l1 > 0)) throw ConfigError("gem_eviction_set_cost needs positive inputs");
  return 2.3 * W * l1;
}

inline long double tail_from(const SteadyStateDist& d, std::size_t n) {
  long double s = 0;
  for (std::size_t i = n; i < d.size(); ++i) s += d.p[i];
  return s;
}

// Ball-weighted mass of bins holding at most N balls: sum_{i<=N} i*(n_bin/n_ball)*P_i.
inline long double ball_mass_upto(const SteadyStateDist& d, unsigned N, long double ratio) {
  long double s = 0;
  for (unsigned i = 0; i <= N && i < d.size(); ++i) s += i * ratio * d.p[i];
  return s;
}

// Per-insertion probability that the chosen bin holds N balls (so it grows to
// N+1), both skews drawn from `dist`.
inline long double transition_up(const SteadyStateDist& dist, unsigned N) {
  const long double pn = dist.at(N);
  return pn * pn + 2 * pn * tail_from(dist, N + 1);
}

// The same flux with separate skew distributions; ties go to skew 0, so skew 0
// wins at equal loads and skew 1 only when skew 0 is strictly fuller.
inline long double transition_up_by_skew(const SteadyStateDist& skew0,
                                          const SteadyStateDist& skew1, unsigned N) {
  return skew0.at(N) * tail_from(skew1, N) + skew1.at(N) * tail_from(skew0, N + 1);
}

// Per-insertion probability that the evicted ball sits in a bin with N+1
// balls: the fuller of two uniformly drawn balls.
inline long double transition_down(const SteadyStateDist& dist, unsigned N, long double n_ball,
                                   long double n_bin) {
  if (!(n_ball > 0) || !(n_bin > 0)) throw ConfigError("n_ball and n_bin must be positive");
  const long double ratio = n_bin / n_ball;
  const long double b = (N + 1) * ratio * dist.at(N + 1);
  return b * b + 2 * b * ball_mass_upto(dist, N, ratio);
}

enum class RecursionForm {
  TailApprox,   // P_{N+1} = P_N^2 / (2 (N+1) r sum_{i<=N} i r P_i), valid beyond the mode
  FullBalance,  // positive root of the full up = down balance quadratic
};

namespace detail {

inline long double next_occupancy(const std::vector<long double>& p, unsigned N,
                                  RecursionForm form, long double ratio) {
  const long double pn = p[N];
  long double mass = 0, cum = 0;
  for (unsigned i = 0; i <= N; ++i) {
    mass += i * ratio * p[i];
    cum += p[i];
  }
  const long double lin = 2 * (N + 1) * ratio * mass;
  if (form == RecursionForm::TailApprox) {
    if (pn == 0) return 0;
    if (lin == 0) throw ConfigError("occupancy recursion: zero denominator at N=" + std::to_string(N));
    // log domain keeps deep tails (below ~1e-300) finite in long double.
    return std::exp(2 * std::log(pn) - std::log(lin));
  }
  const long double quad = ((N + 1) * ratio) * ((N + 1) * ratio);
  const long double tail = cum < 1 ? 1 - cum : 0;
  const long double c = pn * pn + 2 * pn * tail;
  if (c == 0) return 0;
  return 2 * c / (lin + std::sqrt(lin * lin + 4 * quad * c));
}

}  // namespace detail

// Extend `prefix` (entries 0..n_start are taken as given) up to n_max.
// load_factor = n_ball / n_bin; two skews.
inline SteadyStateDist extend_occupancy(const SteadyStateDist& prefix, unsigned n_start,
                                        unsigned n_max, RecursionForm form,
                                        long double load_factor = 8) {
  if (!(load_factor > 0)) throw ConfigError("load_factor must be positive");
  if (n_start >= prefix.size()) throw ConfigError("n_start beyond the supplied prefix");
  if (n_max < n_start) throw ConfigError("n_max must be >= n_start");
  SteadyStateDist out;
  out.source = DistSource::Analytical;
  out.seed_n = n_start;
  out.p.assign(prefix.p.begin(), prefix.p.begin() + n_start + 1);
  const long double ratio = 1 / load_factor;
  for (unsigned N = n_start; N < n_max; ++N)
    out.p.push_back(detail::next_occupancy(out.p, N, form, ratio));
  return out;
}

// Tail recursion from two adjacent observed values P_{n_start-1}, P_{n_start}
// (all lower occupancies taken as zero) at the default load factor 8.
inline SteadyStateDist occupancy_recursion(long double p_seed_n, long double p_seed_n1,
                                           unsigned n_start, unsigned n_max) {
  if (n_start == 0) throw ConfigError("n_start must be >= 1");
  SteadyStateDist seeds;
  seeds.p.assign(n_start + 1, 0);
  seeds.p[n_start - 1] = p_seed_n;
  seeds.p[n_start] = p_seed_n1;
  return extend_occupancy(seeds, n_start, n_max, RecursionForm::TailApprox, 8);
}

// First N at or beyond the mode where the remaining mass 1 - sum_{i<=N} P_i is
// below P_N / 10, i.e. where the tail approximation holds.
inline unsigned tail_seed_index(const SteadyStateDist& d) {
  if (d.size() == 0) throw ConfigError("empty distribution");
  unsigned mode = 0;
  for (unsigned i = 1; i < d.size(); ++i)
    if (d.p[i] > d.p[mode]) mode = i;
  long double cum = 0;
  for (unsigned i = 0; i < mode; ++i) cum += d.p[i];
  for (unsigned n = mode; n < d.size(); ++n) {
    cum += d.p[n];
    if (d.p[n] > 0 && (1 - cum) < d.p[n] / 10) return n;
  }
  throw ConfigError("distribution has no usable tail seed");
}

// Per-insertion probability that a full bin of capacity W is asked to take
// another ball: the recursion step from P_W to P_{W+1}.
inline long double de_probability(unsigned W, const SteadyStateDist& dist,
                                  long double load_factor = 8) {
  if (dist.size() < W + 1) throw ConfigError("distribution must cover 0..W");
  if (dist.p[W] == 0) return 0;
  std::vector<long double> p(dist.p.begin(), dist.p.begin() + W + 1);
  return detail::next_occupancy(p, W, RecursionForm::TailApprox, 1 / load_factor);
}

struct AttackCostReport {
  BigUint a_pht;
  BigUint a_btb;
  double l1_est = 0;
  double l2_est = 0;
  double attacks_per_de = 0;
  SteadyStateDist observed;   // empirical steady state the tail was seeded from
  SteadyStateDist estimated;  // recursion-extended distribution
  unsigned tail_seed = 0;
  unsigned capacity = 0;
};

}  // namespace cibpu
