#pragma once

// JSON encoding of configurations and results, plus the end-to-end security
// estimate behind the `analytics` command.

#include <json.hpp>

#include <cmath>
#include <string>

#include "cibpu/analytics.hpp"
#include "cibpu/attacks.hpp"
#include "cibpu/binsballs.hpp"
#include "cibpu/config.hpp"
#include "cibpu/dist.hpp"
#include "cibpu/error.hpp"

namespace cibpu {

using Json = nlohmann::ordered_json;

inline Json to_json(const SimConfig& c) {
  return Json{{"i_pht", c.i_pht},
              {"t_pht", c.t_pht},
              {"pht_skews", c.pht_skews},
              {"ghr_bits", c.ghr_bits},
              {"base_bits", c.base_bits},
              {"i_btb", c.i_btb},
              {"t_btb", c.t_btb},
              {"n_btb", c.n_btb},
              {"ways", c.ways},
              {"extra_tags", c.extra_tags},
              {"n_ball", c.n_ball},
              {"mapping", std::string(to_string(c.mapping))},
              {"device_secret", c.device_secret},
              {"seed", c.seed}};
}

// Overlay the keys present in `j` onto `base`; unknown keys are rejected.
inline SimConfig config_from_json(const Json& j, SimConfig base = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "i_pht") base.i_pht = v.get<unsigned>();
      else if (k == "t_pht") base.t_pht = v.get<unsigned>();
      else if (k == "pht_skews") base.pht_skews = v.get<unsigned>();
      else if (k == "ghr_bits") base.ghr_bits = v.get<unsigned>();
      else if (k == "base_bits") base.base_bits = v.get<unsigned>();
      else if (k == "i_btb") base.i_btb = v.get<unsigned>();
      else if (k == "t_btb") base.t_btb = v.get<unsigned>();
      else if (k == "n_btb") base.n_btb = v.get<unsigned>();
      else if (k == "ways") base.ways = v.get<unsigned>();
      else if (k == "extra_tags") base.extra_tags = v.get<unsigned>();
      else if (k == "n_ball") base.n_ball = v.get<std::uint64_t>();
      else if (k == "mapping") base.mapping = parse_mapping_mode(v.get<std::string>());
      else if (k == "device_secret") base.device_secret = v.get<std::uint64_t>();
      else if (k == "seed") base.seed = v.get<std::uint64_t>();
      else throw ConfigError("unknown config key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  base.validate();
  return base;
}

inline Json to_json(const RunMetrics& m) {
  return Json{{"conditional_count", m.conditional_count},
              {"mispredictions", m.mispredictions},
              {"pht_lookups", m.pht_lookups},
              {"pht_hits", m.pht_hits},
              {"btb_lookups", m.btb_lookups},
              {"btb_hits", m.btb_hits},
              {"btb_misses", m.btb_misses},
              {"insertions", m.insertions},
              {"se_count", m.se_count},
              {"de_count", m.de_count},
              {"attacker_accesses", m.attacker_accesses}};
}

inline Json to_json(const SteadyStateDist& d) {
  Json p = Json::array();
  for (long double x : d.p) p.push_back(static_cast<double>(x));
  Json j{{"source", d.source == DistSource::Analytical ? "analytical" : "empirical"}, {"p", p}};
  if (d.seed_n) j["seed_n"] = *d.seed_n;
  return j;
}

inline Json to_json(const OccupancyHistogram& h) {
  Json rows = Json::array();
  for (std::size_t n = 0; n < h.counts.size(); ++n)
    rows.push_back(Json{{"n", n},
                        {"count", h.counts[n]},
                        {"probability", static_cast<double>(h.counts[n]) / h.total_observations}});
  return Json{{"total_observations", h.total_observations}, {"rows", rows}};
}

// JSON has no infinity; an unbounded quantity is written as null.
inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_json(const TwoSkewResult& r) {
  if (r.histogram.total_observations == 0) throw ConfigError("empty occupancy histogram");
  Json j{{"insertions", r.insertions},
         {"steady_insertions", r.steady_insertions},
         {"se_count", r.se_count},
         {"de_count", r.de_count},
         {"steady_de_count", r.steady_de_count},
         {"first_de_at", r.first_de_at ? Json(*r.first_de_at) : Json(nullptr)},
         {"attacks_per_de", finite_or_null(r.attacks_per_de())},
         {"live_balls", r.live_balls},
         {"free_slots", r.free_slots},
         {"histogram", to_json(r.histogram)},
         {"skew0", to_json(r.per_skew[0])},
         {"skew1", to_json(r.per_skew[1])}};
  return j;
}

inline Json to_json(const OverflowResult& r, bool samples) {
  Json j{{"trials", r.throws.size()}, {"mean", r.mean}, {"stddev", r.stddev}};
  if (samples) j["throws"] = r.throws;
  return j;
}

inline Json to_json(const AttackResult& r, bool samples) {
  Json j{{"kind", to_string(r.kind)},
         {"rejected", r.rejected},
         {"analytic_attempts", to_double(r.analytic_attempts)},
         {"analytic_attempts_exact", r.analytic_attempts.str()},
         {"trials", r.samples.size()},
         {"successes", r.successes},
         {"mean", r.mean},
         {"stddev", r.stddev},
         {"total_accesses", r.total_accesses}};
  if (samples) {
    j["samples"] = r.samples;
    Json ok = Json::array();
    for (bool b : r.success) ok.push_back(b);
    j["success"] = ok;
  }
  return j;
}

inline Json to_json(const GemResult& r) {
  Json set = Json::array();
  for (auto pc : r.eviction_set) set.push_back(pc);
  return Json{{"accesses", r.accesses},
              {"build_accesses", r.build_accesses},
              {"target_pc", r.target_pc},
              {"pool_size", r.pool_size},
              {"eviction_set", set}};
}

inline Json to_json(const DeProbeResult& r) {
  return Json{{"insertions", r.insertions},
              {"accesses", r.accesses},
              {"de_count", r.de_count},
              {"se_count", r.se_count},
              {"first_de_at", r.first_de_at ? Json(*r.first_de_at) : Json(nullptr)}};
}

// Reuse attempt counts, first-eviction and eviction-set costs of a
// conventional BTB of the same geometry, and attacks per DE of CIBTB from an
// empirical steady state of `insertions` two-skew insertions extended by the
// tail recursion.
inline AttackCostReport attack_cost_report(const SimConfig& cfg, std::uint64_t insertions) {
  cfg.validate();
  AttackCostReport r;
  r.a_pht = reuse_attempts_pht(cfg.i_pht, cfg.t_pht, cfg.pht_skews);
  r.a_btb = reuse_attempts_btb(cfg.i_btb, cfg.t_btb, cfg.n_btb);
  r.l1_est = solve_first_de_accesses(cfg.n_bin(), cfg.ways);
  r.l2_est = gem_eviction_set_cost(cfg.ways, r.l1_est);
  r.capacity = cfg.set_capacity();

  BinsConfig bc;
  bc.n_bin = cfg.n_bin();
  bc.n_ball = cfg.n_ball;
  bc.capacity = r.capacity;
  bc.seed = cfg.seed;
  const TwoSkewResult sim = run_two_skew(bc, insertions);
  r.observed = histogram_probs(sim.histogram);
  r.tail_seed = tail_seed_index(r.observed);
  const long double load = static_cast<long double>(cfg.n_ball) / cfg.n_bin();
  r.estimated = extend_occupancy(r.observed, r.tail_seed, std::max(r.tail_seed, r.capacity + 1),
                                 RecursionForm::TailApprox, load);
  const long double p_de = de_probability(r.capacity, r.estimated, load);
  r.attacks_per_de = p_de > 0 ? static_cast<double>(1 / p_de) : INFINITY;
  return r;
}

inline Json to_json(const AttackCostReport& r) {
  return Json{{"a_pht", to_double(r.a_pht)},
              {"a_pht_exact", r.a_pht.str()},
              {"a_btb", to_double(r.a_btb)},
              {"a_btb_exact", r.a_btb.str()},
              {"l1_est", r.l1_est},
              {"l2_est", r.l2_est},
              {"attacks_per_de", finite_or_null(r.attacks_per_de)},
              {"capacity", r.capacity},
              {"tail_seed", r.tail_seed},
              {"observed", to_json(r.observed)},
              {"estimated", to_json(r.estimated)}};
}

}  // namespace cibpu
