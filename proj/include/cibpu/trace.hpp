#pragma once

// Text branch traces (`tid pc kind taken target`, '#' comments), a synthetic
// trace generator and the trace-driven predictor loop.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cibpu/baseline.hpp"
#include "cibpu/cibtb.hpp"
#include "cibpu/cipht.hpp"
#include "cibpu/config.hpp"
#include "cibpu/error.hpp"

namespace cibpu {

enum class BranchKind { Conditional, DirectJump, IndirectJump };

inline char kind_code(BranchKind k) {
  switch (k) {
    case BranchKind::Conditional: return 'C';
    case BranchKind::DirectJump: return 'J';
    case BranchKind::IndirectJump: return 'I';
  }
  return '?';
}

struct TraceRecord {
  std::uint32_t tid = 0;
  std::uint64_t pc = 0;
  BranchKind kind = BranchKind::Conditional;
  bool taken = false;
  std::uint64_t target = 0;

  bool operator==(const TraceRecord&) const = default;
};

inline constexpr unsigned kAddressBits = 48;

class TraceParseError : public ConfigError {
 public:
  TraceParseError(std::size_t line, const std::string& what)
      : ConfigError("trace line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::uint64_t parse_hex_field(std::string_view f, std::size_t line, const char* name) {
  if (f.size() < 3 || f[0] != '0' || (f[1] != 'x' && f[1] != 'X'))
    throw TraceParseError(line, std::string(name) + " must be hex with a 0x prefix");
  f.remove_prefix(2);
  if (f.size() > 16) throw TraceParseError(line, std::string(name) + " out of range");
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v, 16);
  if (ec != std::errc{} || p != f.data() + f.size())
    throw TraceParseError(line, std::string("malformed ") + name);
  if (v >> kAddressBits) throw TraceParseError(line, std::string(name) + " exceeds 48 bits");
  return v;
}

}  // namespace detail

// Parse one non-comment line. Returns nullopt for blank and comment lines.
inline std::optional<TraceRecord> parse_trace_line(std::string_view text, std::size_t line) {
  if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    if (i == text.size()) break;
    const std::size_t j = text.find_first_of(" \t", i);
    const std::size_t end = j == std::string_view::npos ? text.size() : j;
    fields.push_back(text.substr(i, end - i));
    i = end;
  }
  if (fields.empty() || fields[0].front() == '#') return std::nullopt;
  if (fields.size() != 5)
    throw TraceParseError(line, "expected 5 fields (tid pc kind taken target), got " +
                                    std::to_string(fields.size()));
  TraceRecord r;
  {
    const auto f = fields[0];
    std::uint64_t tid = 0;
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), tid, 10);
    if (ec == std::errc::result_out_of_range || (ec == std::errc{} && tid > 0xffffffffULL))
      throw TraceParseError(line, "tid out of range");
    if (ec != std::errc{} || p != f.data() + f.size()) throw TraceParseError(line, "malformed tid");
    r.tid = static_cast<std::uint32_t>(tid);
  }
  r.pc = detail::parse_hex_field(fields[1], line, "pc");
  if (fields[2] == "C") {
    r.kind = BranchKind::Conditional;
  } else if (fields[2] == "J") {
    r.kind = BranchKind::DirectJump;
  } else if (fields[2] == "I") {
    r.kind = BranchKind::IndirectJump;
  } else {
    throw TraceParseError(line, "kind must be C, J or I");
  }
  if (fields[3] == "1") {
    r.taken = true;
  } else if (fields[3] == "0") {
    r.taken = false;
  } else {
    throw TraceParseError(line, "taken must be 0 or 1");
  }
  r.target = detail::parse_hex_field(fields[4], line, "target");
  return r;
}

inline std::vector<TraceRecord> parse_trace(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto r = parse_trace_line(line, n)) out.push_back(*r);
  }
  if (in.bad()) throw ConfigError("trace stream read error");
  return out;
}

inline std::vector<TraceRecord> parse_trace(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_trace(in);
}

inline std::string format_record(const TraceRecord& r) {
  std::ostringstream os;
  os << r.tid << " 0x" << std::hex << r.pc << ' ' << kind_code(r.kind) << ' '
     << (r.taken ? 1 : 0) << " 0x" << r.target;
  return os.str();
}

// Canonical form: one record per line, lowercase hex, single spaces.
inline std::string serialize_trace(std::span<const TraceRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += format_record(r);
    out += '\n';
  }
  return out;
}

struct SyntheticSpec {
  std::uint64_t branch_count = 100000;
  std::uint64_t working_set_size = 1024;
  double taken_bias = 0.9;
  std::uint32_t thread_count = 1;
  std::uint64_t seed = kDefaultSeed;
};

// Deterministic synthetic trace. Each working-set PC has a fixed kind, a
// direct target and a taken probability jittered around taken_bias (the
// jitter shrinks to zero at bias 0 or 1). Indirect jumps rotate among four
// targets.
inline std::vector<TraceRecord> gen_synthetic(const SyntheticSpec& spec) {
  if (spec.working_set_size == 0) throw ConfigError("working_set_size must be >= 1");
  if (spec.thread_count == 0) throw ConfigError("thread_count must be >= 1");
  if (!(spec.taken_bias >= 0 && spec.taken_bias <= 1)) throw ConfigError("taken_bias must be in [0, 1]");
  Rng rng(spec.seed);
  struct Site {
    std::uint64_t pc;
    BranchKind kind;
    double bias;
    std::uint64_t targets[4];
  };
  const double jitter = 0.1 * std::min(spec.taken_bias, 1 - spec.taken_bias);
  std::vector<Site> sites(spec.working_set_size);
  for (auto& s : sites) {
    s.pc = 0x400000 + 4 * uniform_below(rng, std::uint64_t{1} << 24);
    const double u = uniform01(rng);
    s.kind = u < 0.8 ? BranchKind::Conditional : u < 0.93 ? BranchKind::DirectJump : BranchKind::IndirectJump;
    s.bias = std::clamp(spec.taken_bias + jitter * (2 * uniform01(rng) - 1), 0.0, 1.0);
    for (auto& t : s.targets) t = s.pc + 4 * (1 + uniform_below(rng, 4096));
  }
  std::vector<TraceRecord> out;
  out.reserve(spec.branch_count);
  for (std::uint64_t i = 0; i < spec.branch_count; ++i) {
    const Site& s = sites[uniform_below(rng, sites.size())];
    TraceRecord r;
    r.tid = static_cast<std::uint32_t>(uniform_below(rng, spec.thread_count));
    r.pc = s.pc;
    r.kind = s.kind;
    if (s.kind == BranchKind::Conditional) {
      r.taken = uniform01(rng) < s.bias;
      r.target = s.targets[0];
    } else {
      r.taken = true;
      r.target = s.kind == BranchKind::IndirectJump ? s.targets[uniform_below(rng, 4)] : s.targets[0];
    }
    out.push_back(r);
  }
  return out;
}

enum class PredictorKind { Baseline, Cibpu };

inline const char* to_string(PredictorKind k) { return k == PredictorKind::Baseline ? "baseline" : "cibpu"; }

inline PredictorKind parse_predictor_kind(std::string_view s) {
  if (s == "baseline") return PredictorKind::Baseline;
  if (s == "cibpu") return PredictorKind::Cibpu;
  throw ConfigError("unknown predictor '" + std::string(s) + "'");
}

// Outcome of one record, used for hit/miss sequence comparisons.
struct StepOutcome {
  bool pht_hit = false;
  bool btb_hit = false;
  bool mispredicted = false;
};

// Conventional predictor: tagged gshare PHT, bimodal fallback, random-replacement BTB.
class BaselinePredictor {
 public:
  explicit BaselinePredictor(const SimConfig& cfg)
      : pht_(cfg), base_(cfg.base_bits, MappingMode::XorFold), btb_(ConvBtbConfig::from(cfg)) {
    cfg.validate();
  }

  StepOutcome step(const TraceRecord& r, RunMetrics& m) {
    StepOutcome o;
    const ConvBtbAccess b = btb_.access(r.pc, std::nullopt, false);
    ++m.btb_lookups;
    o.btb_hit = b.hit;
    if (b.hit) ++m.btb_hits; else ++m.btb_misses;
    const bool target_ok = b.hit && *b.target == r.target;
    if (r.kind == BranchKind::Conditional) {
      ++m.conditional_count;
      ++m.pht_lookups;
      const ConvPhtAccess p = pht_.access(r.pc, std::nullopt, false);
      o.pht_hit = p.hit;
      if (p.hit) ++m.pht_hits;
      const bool pred = p.hit ? *p.taken : base_.predict(r.pc);
      o.mispredicted = pred != r.taken || (r.taken && !target_ok);
      if (o.mispredicted) ++m.mispredictions;
      pht_.access(r.pc, r.taken, true);
      base_.update(r.pc, r.taken);
    }
    if (r.taken && !target_ok) {
      if (!b.hit) ++m.insertions;
      btb_.access(r.pc, r.target, true);
    }
    return o;
  }

 private:
  ConvPht pht_;
  BimodalTable base_;
  ConvBtb btb_;
};

// Encrypted predictor: CIPHT, per-thread keyed bimodal fallback, CIBTB.
class CibpuPredictor {
 public:
  explicit CibpuPredictor(const SimConfig& cfg)
      : cfg_(cfg), pht_(cfg), base_(cfg.base_bits, cfg.mapping), btb_(cfg) {}

  StepOutcome step(const TraceRecord& r, RunMetrics& m) {
    StepOutcome o;
    const BtbLookup b = btb_.lookup(r.pc, r.tid);
    ++m.btb_lookups;
    o.btb_hit = b.hit;
    if (b.hit) ++m.btb_hits; else ++m.btb_misses;
    const bool target_ok = b.hit && *b.target == r.target;
    if (r.kind == BranchKind::Conditional) {
      ++m.conditional_count;
      ++m.pht_lookups;
      const PhtLookup p = pht_.lookup(r.pc, r.tid);
      o.pht_hit = p.hit;
      if (p.hit) ++m.pht_hits;
      // The fallback table is indexed under the thread's first PHT index key.
      const std::uint64_t bkey = pht_.keys().bundle(r.tid).pht_index_keys[0];
      const bool pred = p.hit ? *p.taken : base_.predict(r.pc, bkey);
      o.mispredicted = pred != r.taken || (r.taken && !target_ok);
      if (o.mispredicted) ++m.mispredictions;
      pht_.update(r.pc, r.tid, r.taken);
      base_.update(r.pc, r.taken, bkey);
    }
    if (r.taken && !target_ok) {
      if (b.hit) {
        btb_.update_target(b, r.pc, r.tid, r.target);
      } else {
        btb_.insert(r.pc, r.tid, r.target, b.chosen_set);
      }
    }
    return o;
  }

  // Fold the CIBTB's own insertion and eviction counters into `m`.
  void finish(RunMetrics& m) const {
    m.insertions = btb_.metrics().insertions;
    m.se_count = btb_.metrics().se_count;
    m.de_count = btb_.metrics().de_count;
  }

  Cipht& pht() { return pht_; }
  Cibtb& btb() { return btb_; }

 private:
  SimConfig cfg_;
  Cipht pht_;
  BimodalTable base_;
  Cibtb btb_;
};

// Predict, compare and update for every record. When `outcomes` is given, the
// per-record outcome sequence is appended to it.
inline RunMetrics run_trace(PredictorKind kind, const SimConfig& cfg,
                            std::span<const TraceRecord> records,
                            std::vector<StepOutcome>* outcomes = nullptr) {
  RunMetrics m;
  auto drive = [&](auto& pred) {
    for (const auto& r : records) {
      const StepOutcome o = pred.step(r, m);
      if (outcomes) outcomes->push_back(o);
    }
  };
  if (kind == PredictorKind::Baseline) {
    BaselinePredictor p(cfg);
    drive(p);
  } else {
    CibpuPredictor p(cfg);
    drive(p);
    p.finish(m);
  }
  return m;
}

}  // namespace cibpu
