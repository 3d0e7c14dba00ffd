// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cibpu/cibpu.hpp"

using namespace cibpu;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) pass = false;
    detail << (cond ? "" : "[fail] ") << what << "; ";
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

int failures = 0;

void criterion(const std::string& id, const std::string& title, double max_seconds,
               const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << "exception: " << e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (max_seconds > 0 && secs > max_seconds) {
    o.pass = false;
    o.detail << "[fail] runtime " << fmt(secs) << " s > " << max_seconds << " s; ";
  }
  if (!o.pass) ++failures;
  std::cout << id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << title << "  (" << o.detail.str()
            << fmt(secs) << " s)" << std::endl;
}

std::string run_cli(const std::string& args) {
  const std::string cmd = std::string(CIBPU_CLI_PATH) + " " + args + " 2>&1";
  std::string out;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) throw std::runtime_error("cannot start CLI");
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  const int st = pclose(p);
  if (!WIFEXITED(st) || WEXITSTATUS(st) != 0) throw std::runtime_error("CLI failed: " + args);
  return out;
}

double within(double v, double ref) { return std::abs(v / ref - 1); }

}  // namespace

int main() {
  std::cout << "CIBPU acceptance suite" << std::endl;

  criterion("AC1", "reuse attempts on the 3-skew PHT at defaults = 2^81", 1.0, [](Outcome& o) {
    const SimConfig c;
    const BigUint a = reuse_attempts_pht(c.i_pht, c.t_pht, c.pht_skews);
    o.expect(a == pow2(81), "a_pht = " + a.str());
    o.expect(within(to_double(a), 2.4e24) < 0.01, "a_pht ~ 2.4e24: " + fmt(to_double(a)));
  });

  criterion("AC2", "reuse attempts on the BTB at defaults = 2^72 ~ 5e21", 1.0, [](Outcome& o) {
    const SimConfig c;
    const BigUint a = reuse_attempts_btb(c.i_btb, c.t_btb, c.n_btb);
    o.expect(a == pow2(72), "a_btb = " + a.str());
    o.expect(std::abs(std::log10(to_double(a)) - std::log10(5e21)) < 0.5,
             "same order as 5e21: " + fmt(to_double(a)));
  });

  criterion("AC3", "first-DE solver at n_bin=4096, W=8 in [7600, 7800]", 1.0, [](Outcome& o) {
    const double l = solve_first_de_accesses(4096, 8);
    o.expect(l >= 7600 && l <= 7800, "L1_est = " + fmt(l));
  });

  criterion("AC4", "conventional first-overflow mean within 5% of 7730 (1e4 trials)", 0, [](Outcome& o) {
    BinsConfig b;
    b.two_skew = false;
    b.n_bin = 4096;
    b.capacity = 8;
    const OverflowResult r = run_conventional_overflow(b, 10000);
    o.expect(within(r.mean, 7730) <= 0.05, "mean = " + fmt(r.mean) + " (sd " + fmt(r.stddev) + ")");
  });

  criterion("AC5", "GEM cost: formula in [1.3e5, 1.5e5]; empirical n_bin=64, W=4 within 2x", 0, [](Outcome& o) {
    const double f = gem_eviction_set_cost(8, 7690);
    o.expect(f >= 1.3e5 && f <= 1.5e5, "2.3*8*7690 = " + fmt(f));
    ConvBtbConfig b;
    b.index_bits = 6;
    b.ways = 4;
    b.replacement = Replacement::Lru;
    b.mapping = MappingMode::IdealOracle;
    Rng rng(kDefaultSeed);
    const int trials = 1000;
    double sum = 0;
    bool congruent = true;
    for (int t = 0; t < trials; ++t) {
      b.index_key = rng() | 1;
      const GemResult r = gem_first_conflict(b, b.ways + 1, rng);
      sum += r.accesses;
      ConvBtb check(b);
      congruent = congruent && r.eviction_set.size() == b.ways;
      for (auto pc : r.eviction_set) congruent = congruent && check.set_of(pc) == check.set_of(r.target_pc);
    }
    const double mean = sum / trials;
    const double scaled = gem_eviction_set_cost(4, solve_first_de_accesses(64, 4));
    o.expect(congruent, "every returned set has W lines congruent with the target");
    o.expect(mean >= scaled / 2 && mean <= scaled * 2,
             "empirical mean " + fmt(mean) + " vs 2.3*W*L1_est(64,4) = " + fmt(scaled));
  });

  // One long two-skew run at defaults feeds AC6, AC7 and the balance residuals of AC10.
  BinsConfig defaults;
  TwoSkewResult steady;
  SteadyStateDist observed, tail;
  criterion("AC6", "two-skew steady state (1e8 insertions) vs recursion; P12/P13/P14 orders", 1800, [&](Outcome& o) {
    steady = run_two_skew(defaults, 100000000);
    observed = histogram_probs(steady.histogram);
    const auto full = extend_occupancy(observed, 5, 9, RecursionForm::FullBalance, 8);
    const auto eq9 = occupancy_recursion(observed.at(4), observed.at(5), 5, 9);
    for (unsigned n = 4; n <= 9; ++n) {
      const double e = static_cast<double>(observed.at(n)), a = static_cast<double>(full.at(n));
      o.expect(e > 0 && a / e <= 2 && e / a <= 2,
               "P" + std::to_string(n) + " emp " + fmt(e) + " rec " + fmt(a) + " (tail-only form " +
                   fmt(static_cast<double>(eq9.at(n))) + ")");
    }
    const unsigned seed = tail_seed_index(observed);
    tail = extend_occupancy(observed, seed, 14, RecursionForm::TailApprox, 8);
    o.detail << "tail seed N=" << seed << "; ";
    const int orders[] = {-8, -15, -31};
    for (unsigned n = 12; n <= 14; ++n) {
      const double lg = static_cast<double>(std::log10(tail.at(n)));
      o.expect(std::abs(lg - orders[n - 12]) <= 1,
               "log10 P" + std::to_string(n) + " = " + fmt(lg) + " (target " + std::to_string(orders[n - 12]) + ")");
    }
  });

  criterion("AC7", "DE probability: W=13 in [1e30, 1e33]; reduced W=4,5,6 empirical within 2x", 1800, [&](Outcome& o) {
    if (tail.size() == 0) throw std::runtime_error("AC6 distribution unavailable");
    const double per_de = static_cast<double>(1 / de_probability(13, tail, 8));
    o.expect(per_de >= 1e30 && per_de <= 1e33, "attacks/DE at W=13 = " + fmt(per_de));
    for (unsigned w : {4u, 5u, 6u}) {
      BinsConfig b;
      b.n_bin = 2048;
      b.n_ball = 2048 * (w - 2);
      b.capacity = w;
      b.seed = kDefaultSeed + w;
      const TwoSkewResult capped = run_two_skew(b, 50000000);
      BinsConfig u = b;
      u.capacity = 64;
      const auto obs = histogram_probs(run_two_skew(u, 50000000).histogram);
      const unsigned seed = tail_seed_index(obs);
      const long double load = w - 2;
      const auto est = extend_occupancy(obs, seed, std::max(seed, w + 1), RecursionForm::TailApprox, load);
      const double analytic = static_cast<double>(1 / de_probability(w, est, load));
      const double emp = capped.attacks_per_de();
      o.expect(emp / analytic >= 0.5 && emp / analytic <= 2,
               "W=" + std::to_string(w) + " empirical " + fmt(emp) + " (" +
                   std::to_string(capped.steady_de_count) + " DEs) vs analytic " + fmt(analytic));
    }
  });

  criterion("AC8", "de_probe at defaults (ideal_oracle mapping), 1e9 insertions: 0 DEs", 3600, [](Outcome& o) {
    SimConfig c;
    c.mapping = MappingMode::IdealOracle;
    Cibtb btb(c);
    Rng rng(kDefaultSeed);
    const DeProbeResult r = de_probe(btb, 1000000000, rng);
    o.expect(r.de_count == 0, "DE count = " + std::to_string(r.de_count) + " over " +
                                  std::to_string(r.insertions) + " insertions, SE = " +
                                  std::to_string(r.se_count));
    o.expect(btb.audit().ok(), "pointer audit after the run");
  });

  criterion("AC9", "reuse Monte Carlo means within 10% of the formulas (1e4 trials)", 0, [](Outcome& o) {
    auto check = [&o](const std::string& name, AttackScenario s) {
      const AttackResult r = simulate_reuse(s);
      const double expect = to_double(r.analytic_attempts);
      o.expect(r.successes == s.trial_count && within(r.mean, expect) <= 0.1,
               name + " mean " + fmt(r.mean) + " vs " + fmt(expect));
      o.expect(within(r.stddev, r.mean) <= 0.1, name + " geometric sd " + fmt(r.stddev));
    };
    AttackScenario s;
    s.trial_count = 10000;
    s.reduced_config.mapping = MappingMode::IdealOracle;
    s.kind = AttackKind::ReusePht;
    s.reduced_config.pht_skews = 1;
    s.reduced_config.i_pht = 2;
    s.reduced_config.t_pht = 2;
    check("PHT 1 skew I=2 T=2", s);
    s.reduced_config.pht_skews = 3;
    s.reduced_config.i_pht = 1;
    s.reduced_config.t_pht = 1;
    s.per_trial_budget = 1000000;
    check("PHT 3 skews I=1 T=1", s);
    s.kind = AttackKind::ReuseBtb;
    s.per_trial_budget = 0;
    s.reduced_config = SimConfig{};
    s.reduced_config.mapping = MappingMode::IdealOracle;
    s.reduced_config.i_btb = 4;
    s.reduced_config.t_btb = 3;
    s.reduced_config.n_btb = 4;
    s.reduced_config.n_ball = 16;
    check("BTB I=3 T=3 N=4", s);
  });

  criterion("AC10", "property suites", 0, [&](Outcome& o) {
    SimConfig small;
    small.i_btb = 4;
    small.ways = 2;
    small.extra_tags = 1;
    small.n_ball = 32;
    SimConfig wide;
    wide.n_ball = 4096;
    for (const SimConfig& c : {small, wide}) {
      const StressReport r = cibtb_stress(c, 1000000, kDefaultSeed, 10000);
      o.expect(r.audit.ok(), "pointer audit after 1e6 ops (n_bin " + std::to_string(c.n_bin()) + "): " +
                                 std::to_string(r.audit.violations) + " violations over " +
                                 std::to_string(r.audits) + " audits");
    }
    std::uint64_t coh = 0;
    for (unsigned i : {1u, 2u, 4u}) {
      SimConfig c;
      c.i_pht = i;
      c.t_pht = 2;
      coh += cipht_coherence_violations(c, 100000, i);
    }
    o.expect(coh == 0, "CIPHT replication coherence violations = " + std::to_string(coh));
    const auto rt = content_roundtrip_failures(kDefaultSeed, 10000);
    o.expect(rt == 0, "enc/dec round trip, widths 1..64: " + std::to_string(rt) + " failures");

    if (steady.batches.empty()) throw std::runtime_error("AC6 run unavailable");
    for (const auto& br : balance_residuals(steady, defaults.n_ball, defaults.n_bin, 4, 8, true))
      o.expect(std::abs(br.z()) <= 3, "balance residual N=" + std::to_string(br.n) + " z=" + fmt(br.z()));

    SyntheticSpec sp;
    sp.branch_count = 1000000;
    sp.taken_bias = 0.9;
    const auto recs = gen_synthetic(sp);
    const RunMetrics b = run_trace(PredictorKind::Baseline, SimConfig{}, recs);
    const RunMetrics c = run_trace(PredictorKind::Cibpu, SimConfig{}, recs);
    const double rb = static_cast<double>(b.mispredictions) / b.conditional_count;
    const double rc = static_cast<double>(c.mispredictions) / c.conditional_count;
    o.expect(rb >= 0.005 && rb <= 0.15, "baseline misprediction " + fmt(100 * rb) + "%");
    o.expect(std::abs(rb - rc) <= 0.015, "CIBPU - baseline = " + fmt(100 * (rc - rb)) + " points");

    const char* invs[] = {"analytics --defaults", "run-trace --branches 50000 --threads 2",
                          "bins-two-skew --insertions 1000000", "attack --kind gem_eviction --trials 20"};
    bool same = true;
    for (const char* inv : invs) same = same && run_cli(inv) == run_cli(inv);
    o.expect(same, "CLI outputs byte-identical across repeated runs");
  });

  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
