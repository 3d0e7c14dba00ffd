// cibpu: command-line front end for the CIBPU simulator.
//
// Exit status: 0 ok, 1 selftest failure, 2 usage/config error, 3 internal fault.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cibpu/cibpu.hpp"

using namespace cibpu;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::string format = "json";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON file with SimConfig keys");
  sub->add_option("--seed", c.seed, "RNG seed (default: fixed constant)");
  sub->add_option("--output,-o", c.output, "output file (default: stdout)");
  sub->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
}

SimConfig load_config(const Common& c, SimConfig base = {}) {
  SimConfig cfg = base;
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw ConfigError("cannot read config file '" + c.config_path + "'");
    Json j;
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file '" + c.config_path + "' is not valid JSON: " + e.what());
    }
    cfg = config_from_json(j, cfg);
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

void emit(const Common& c, const std::string& text) {
  if (c.output.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(c.output, std::ios::binary);
  if (!out) throw ConfigError("cannot write output file '" + c.output + "'");
  out << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void need_json(const Common& c, const char* cmd) {
  if (c.format != "json") throw ConfigError(std::string(cmd) + " supports --format json only");
}

// ---- run-trace ----

struct RunTraceOpts {
  Common common;
  std::string trace_path;
  std::string predictor = "both";
  std::uint64_t branches = 100000;
  std::uint64_t working_set = 1024;
  double bias = 0.9;
  std::uint32_t threads = 1;
};

int cmd_run_trace(const RunTraceOpts& o) {
  const SimConfig cfg = load_config(o.common);
  std::vector<TraceRecord> records;
  Json source;
  if (!o.trace_path.empty()) {
    std::ifstream in(o.trace_path);
    if (!in) throw ConfigError("cannot read trace file '" + o.trace_path + "'");
    records = parse_trace(in);
    source = Json{{"file", o.trace_path}};
  } else {
    SyntheticSpec spec{o.branches, o.working_set, o.bias, o.threads, cfg.seed};
    records = gen_synthetic(spec);
    source = Json{{"synthetic",
                   Json{{"branch_count", spec.branch_count},
                        {"working_set_size", spec.working_set_size},
                        {"taken_bias", spec.taken_bias},
                        {"thread_count", spec.thread_count},
                        {"seed", spec.seed}}}};
  }
  std::vector<PredictorKind> kinds;
  if (o.predictor == "both") kinds = {PredictorKind::Baseline, PredictorKind::Cibpu};
  else kinds = {parse_predictor_kind(o.predictor)};

  Json results = Json::object();
  std::string csv = "predictor,conditional_count,mispredictions,misprediction_rate,btb_lookups,btb_hits,pht_hits,se_count,de_count\n";
  for (PredictorKind k : kinds) {
    const RunMetrics m = run_trace(k, cfg, records);
    const double rate = m.conditional_count ? static_cast<double>(m.mispredictions) / m.conditional_count : 0.0;
    Json r = to_json(m);
    r["misprediction_rate"] = rate;
    results[to_string(k)] = r;
    std::ostringstream row;
    row.precision(17);
    row << to_string(k) << ',' << m.conditional_count << ',' << m.mispredictions << ',' << rate << ','
        << m.btb_lookups << ',' << m.btb_hits << ',' << m.pht_hits << ',' << m.se_count << ','
        << m.de_count << '\n';
    csv += row.str();
  }
  if (o.common.format == "csv") {
    emit(o.common, csv);
  } else {
    emit(o.common, dump(Json{{"command", "run-trace"},
                             {"config", to_json(cfg)},
                             {"trace", source},
                             {"records", records.size()},
                             {"results", results}}));
  }
  return 0;
}

// ---- bins ----

struct BinsOpts {
  Common common;
  std::optional<std::uint64_t> n_bin, n_ball;
  std::optional<unsigned> capacity;
  std::uint64_t trials = 10000;
  std::uint64_t insertions = 10000000;
  std::uint64_t warmup = 0, census_interval = 0;
  unsigned batches = 20;
  bool samples = false;
};

Json bins_json(const BinsConfig& b) {
  return Json{{"n_bin", b.n_bin},
              {"n_ball", b.n_ball},
              {"capacity", b.capacity},
              {"two_skew", b.two_skew},
              {"seed", b.seed},
              {"warmup", b.effective_warmup()},
              {"census_interval", b.effective_census_interval()},
              {"batches", b.batches}};
}

int cmd_bins_conventional(const BinsOpts& o) {
  const SimConfig cfg = load_config(o.common);
  BinsConfig b;
  b.two_skew = false;
  b.n_bin = o.n_bin.value_or(cfg.n_bin());
  b.capacity = o.capacity.value_or(cfg.ways);
  b.n_ball = b.n_bin * b.capacity;
  b.seed = cfg.seed;
  if (o.trials == 0) throw ConfigError("--trials must be positive");
  const OverflowResult r = run_conventional_overflow(b, o.trials);
  if (o.common.format == "csv") {
    std::string csv = "trial,throws\n";
    for (std::size_t i = 0; i < r.throws.size(); ++i)
      csv += std::to_string(i) + "," + std::to_string(r.throws[i]) + "\n";
    emit(o.common, csv);
    return 0;
  }
  emit(o.common, dump(Json{{"command", "bins-conventional"},
                           {"config", bins_json(b)},
                           {"l1_est", solve_first_de_accesses(b.n_bin, b.capacity)},
                           {"result", to_json(r, o.samples)}}));
  return 0;
}

int cmd_bins_two_skew(const BinsOpts& o) {
  const SimConfig cfg = load_config(o.common);
  BinsConfig b;
  b.n_bin = o.n_bin.value_or(cfg.n_bin());
  b.n_ball = o.n_ball.value_or(cfg.n_ball);
  b.capacity = o.capacity.value_or(cfg.set_capacity());
  b.seed = cfg.seed;
  b.warmup = o.warmup;
  b.census_interval = o.census_interval;
  b.batches = o.batches;
  const TwoSkewResult r = run_two_skew(b, o.insertions);
  if (o.common.format == "csv") {
    emit(o.common, histogram_csv(r.histogram));
    return 0;
  }
  emit(o.common, dump(Json{{"command", "bins-two-skew"}, {"config", bins_json(b)}, {"result", to_json(r)}}));
  return 0;
}

// ---- analytics ----

struct AnalyticsOpts {
  Common common;
  bool defaults = false;
  std::uint64_t insertions = 20000000;
};

int cmd_analytics(const AnalyticsOpts& o) {
  need_json(o.common, "analytics");
  SimConfig cfg;
  if (!o.defaults) cfg = load_config(o.common);
  else if (o.common.seed) cfg.seed = *o.common.seed;
  const AttackCostReport r = attack_cost_report(cfg, o.insertions);
  emit(o.common, dump(Json{{"command", "analytics"},
                           {"config", to_json(cfg)},
                           {"insertions", o.insertions},
                           {"report", to_json(r)}}));
  return 0;
}

// ---- attack ----

struct AttackOpts {
  Common common;
  std::string kind = "reuse_pht";
  unsigned trials = 10000;
  std::uint64_t budget = 0;
  bool full_width = false;
  bool samples = false;
  unsigned gem_index_bits = 6;
  unsigned gem_ways = 4;
  std::optional<unsigned> groups;
};

SimConfig reduced_reuse_config(AttackKind k) {
  SimConfig c;
  c.mapping = MappingMode::IdealOracle;
  if (k == AttackKind::ReusePht) {
    c.i_pht = 1;
    c.t_pht = 1;
  } else {
    c.i_btb = 4;
    c.t_btb = 3;
    c.n_btb = 4;
    c.n_ball = 16;
  }
  return c;
}

int cmd_attack(const AttackOpts& o) {
  need_json(o.common, "attack");
  const AttackKind kind = parse_attack_kind(o.kind);
  Json out{{"command", "attack"}, {"kind", o.kind}};
  switch (kind) {
    case AttackKind::ReusePht:
    case AttackKind::ReuseBtb: {
      SimConfig base = o.full_width ? SimConfig{} : reduced_reuse_config(kind);
      AttackScenario s;
      s.kind = kind;
      s.reduced_config = load_config(o.common, base);
      s.trial_count = o.trials;
      s.seed = s.reduced_config.seed;
      s.per_trial_budget = o.budget;
      const AttackResult r = simulate_reuse(s);
      out["config"] = to_json(s.reduced_config);
      out["trials"] = o.trials;
      out["result"] = to_json(r, o.samples);
      break;
    }
    case AttackKind::GemEviction: {
      const SimConfig cfg = load_config(o.common);
      ConvBtbConfig b;
      b.index_bits = o.gem_index_bits;
      b.ways = o.gem_ways;
      b.replacement = Replacement::Lru;
      b.mapping = MappingMode::IdealOracle;
      b.seed = cfg.seed;
      const unsigned groups = o.groups.value_or(b.ways + 1);
      Rng rng(cfg.seed);
      Json trials = Json::array();
      double sum = 0;
      for (unsigned t = 0; t < o.trials; ++t) {
        b.index_key = rng() | 1;
        const GemResult r = gem_first_conflict(b, groups, rng, o.budget);
        sum += r.accesses;
        if (o.samples) trials.push_back(to_json(r));
      }
      const double l1 = solve_first_de_accesses(std::uint64_t{1} << b.index_bits, b.ways);
      out["config"] = Json{{"index_bits", b.index_bits},
                           {"ways", b.ways},
                           {"groups", groups},
                           {"replacement", "lru"},
                           {"mapping", "ideal_oracle"},
                           {"seed", b.seed}};
      out["trials"] = o.trials;
      out["mean_accesses"] = o.trials ? sum / o.trials : 0.0;
      out["l1_est"] = l1;
      out["l2_est"] = gem_eviction_set_cost(b.ways, l1);
      if (o.samples) out["samples"] = trials;
      break;
    }
    case AttackKind::DeProbe: {
      SimConfig base;
      base.mapping = MappingMode::IdealOracle;
      const SimConfig cfg = load_config(o.common, base);
      Cibtb btb(cfg);
      Rng rng(cfg.seed ^ 0xde9b0beULL);
      const std::uint64_t budget = o.budget ? o.budget : 10000000;
      const DeProbeResult r = de_probe(btb, budget, rng);
      out["config"] = to_json(cfg);
      out["budget_insertions"] = budget;
      out["result"] = to_json(r);
      break;
    }
  }
  emit(o.common, dump(out));
  return 0;
}

// ---- selftest ----

int cmd_selftest(const Common& c) {
  struct Line {
    std::string name;
    bool pass;
    std::string detail;
  };
  std::vector<Line> lines;
  auto check = [&lines](std::string name, const std::function<std::pair<bool, std::string>()>& f) {
    try {
      auto [ok, d] = f();
      lines.push_back({std::move(name), ok, std::move(d)});
    } catch (const std::exception& e) {
      lines.push_back({std::move(name), false, std::string("exception: ") + e.what()});
    }
  };
  const std::uint64_t seed = c.seed.value_or(kDefaultSeed);

  check("keying.determinism", [] {
    return std::pair{derive_keys(7, kDefaultDeviceSecret) == derive_keys(7, kDefaultDeviceSecret), std::string()};
  });
  check("keying.bijection_12bit", [] {
    std::vector<bool> seen(4096, false);
    unsigned dup = 0;
    for (std::uint64_t x = 0; x < 4096; ++x) {
      const auto y = keyed_permute(x, 0x7c1, 12);
      if (seen[y]) ++dup;
      seen[y] = true;
    }
    return std::pair{dup == 0, "duplicates=" + std::to_string(dup)};
  });
  check("keying.roundtrip_all_widths", [seed] {
    const auto bad = content_roundtrip_failures(seed, 1000);
    return std::pair{bad == 0, "failures=" + std::to_string(bad)};
  });
  check("cipht.replication_coherence", [seed] {
    SimConfig s;
    s.i_pht = 4;
    s.t_pht = 3;
    const auto bad = cipht_coherence_violations(s, 20000, seed);
    return std::pair{bad == 0, "violations=" + std::to_string(bad)};
  });
  check("cibtb.pointer_audit", [seed] {
    SimConfig s;
    s.i_btb = 4;
    s.ways = 2;
    s.extra_tags = 1;
    s.n_ball = 32;
    const StressReport r = cibtb_stress(s, 100000, seed, 1000);
    return std::pair{r.audit.ok(), "violations=" + std::to_string(r.audit.violations) + " " + r.audit.first};
  });
  check("analytics.a_pht_exact", [] {
    return std::pair{reuse_attempts_pht(13, 12) == pow2(81), reuse_attempts_pht(13, 12).str()};
  });
  check("analytics.first_de_solver", [] {
    const double l = solve_first_de_accesses(4096, 8);
    return std::pair{l >= 7600 && l <= 7800, std::to_string(l)};
  });
  check("bins.overflow_vs_exact", [seed] {
    BinsConfig b;
    b.two_skew = false;
    b.n_bin = 16;
    b.capacity = 2;
    b.seed = seed;
    const double mc = run_conventional_overflow(b, 20000).mean;
    const double ex = static_cast<double>(expected_first_overflow(16, 2));
    return std::pair{std::abs(mc / ex - 1) < 0.05, std::to_string(mc) + " vs " + std::to_string(ex)};
  });
  check("attacks.reuse_single_skew", [seed] {
    AttackScenario s;
    s.kind = AttackKind::ReusePht;
    s.reduced_config.mapping = MappingMode::IdealOracle;
    s.reduced_config.pht_skews = 1;
    s.reduced_config.i_pht = 2;
    s.reduced_config.t_pht = 2;
    s.trial_count = 10000;
    s.seed = seed;
    const AttackResult r = simulate_reuse(s);
    return std::pair{std::abs(r.mean / 64 - 1) < 0.1, "mean=" + std::to_string(r.mean)};
  });
  check("trace.roundtrip", [seed] {
    SyntheticSpec sp;
    sp.branch_count = 10000;
    sp.thread_count = 4;
    sp.seed = seed;
    const auto recs = gen_synthetic(sp);
    const std::string text = serialize_trace(recs);
    return std::pair{serialize_trace(parse_trace(text)) == text, std::string()};
  });

  std::ostringstream os;
  bool all = true;
  for (const auto& l : lines) {
    all = all && l.pass;
    os << (l.pass ? "PASS " : "FAIL ") << l.name;
    if (!l.detail.empty()) os << " (" << l.detail << ")";
    os << '\n';
  }
  os << (all ? "selftest: all checks passed\n" : "selftest: FAILED\n");
  emit(c, os.str());
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CIBPU secure branch-prediction-unit simulator"};
  app.require_subcommand(1);

  RunTraceOpts rt;
  auto* s_rt = app.add_subcommand("run-trace", "trace-driven baseline vs CIBPU run");
  add_common(s_rt, rt.common);
  s_rt->add_option("--trace", rt.trace_path, "trace file (default: synthetic)");
  s_rt->add_option("--predictor", rt.predictor, "baseline, cibpu or both")
      ->check(CLI::IsMember({"baseline", "cibpu", "both"}));
  s_rt->add_option("--branches", rt.branches, "synthetic record count");
  s_rt->add_option("--working-set", rt.working_set, "synthetic distinct PCs");
  s_rt->add_option("--bias", rt.bias, "synthetic taken bias");
  s_rt->add_option("--threads", rt.threads, "synthetic thread count");

  BinsOpts bc;
  auto* s_bc = app.add_subcommand("bins-conventional", "first-overflow Monte Carlo, one choice");
  add_common(s_bc, bc.common);
  s_bc->add_option("--n-bin", bc.n_bin, "number of bins (default: 2^i_btb)");
  s_bc->add_option("--capacity", bc.capacity, "bin capacity (default: ways)");
  s_bc->add_option("--trials", bc.trials, "Monte Carlo trials");
  s_bc->add_flag("--samples", bc.samples, "include per-trial samples");

  BinsOpts bt;
  auto* s_bt = app.add_subcommand("bins-two-skew", "two-skew load-balanced occupancy run");
  add_common(s_bt, bt.common);
  s_bt->add_option("--n-bin", bt.n_bin, "number of bins (default: 2^i_btb)");
  s_bt->add_option("--n-ball", bt.n_ball, "number of balls (default: n_ball)");
  s_bt->add_option("--capacity", bt.capacity, "bin capacity (default: ways + extra_tags)");
  s_bt->add_option("--insertions", bt.insertions, "total insertions");
  s_bt->add_option("--warmup", bt.warmup, "insertions before the census (0: n_ball)");
  s_bt->add_option("--census-interval", bt.census_interval, "census period (0: n_bin)");
  s_bt->add_option("--batches", bt.batches, "batches for error estimates");

  AnalyticsOpts an;
  auto* s_an = app.add_subcommand("analytics", "security estimates");
  add_common(s_an, an.common);
  s_an->add_flag("--defaults", an.defaults, "use the built-in default configuration");
  s_an->add_option("--insertions", an.insertions, "two-skew insertions seeding the DE estimate");

  AttackOpts at;
  auto* s_at = app.add_subcommand("attack", "attacker simulations");
  add_common(s_at, at.common);
  s_at->add_option("--kind", at.kind, "reuse_pht, reuse_btb, gem_eviction or de_probe")
      ->check(CLI::IsMember({"reuse_pht", "reuse_btb", "gem_eviction", "de_probe"}));
  s_at->add_option("--trials", at.trials, "trials");
  s_at->add_option("--budget", at.budget, "per-trial attempts, or insertions for de_probe");
  s_at->add_flag("--full-width", at.full_width, "reuse attacks at full default widths");
  s_at->add_flag("--samples", at.samples, "include per-trial samples");
  s_at->add_option("--gem-index-bits", at.gem_index_bits, "GEM target BTB index bits");
  s_at->add_option("--gem-ways", at.gem_ways, "GEM target BTB ways");
  s_at->add_option("--groups", at.groups, "GEM group count (default: ways + 1)");

  Common st;
  auto* s_st = app.add_subcommand("selftest", "invariant suites and reduced-scale oracles");
  add_common(s_st, st);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (s_rt->parsed()) return cmd_run_trace(rt);
    if (s_bc->parsed()) return cmd_bins_conventional(bc);
    if (s_bt->parsed()) return cmd_bins_two_skew(bt);
    if (s_an->parsed()) return cmd_analytics(an);
    if (s_at->parsed()) return cmd_attack(at);
    if (s_st->parsed()) return cmd_selftest(st);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const InvariantFault& e) {
    std::cerr << "internal fault: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal fault: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
