#include <gtest/gtest.h>

#include <cmath>

#include "cibpu/analytics.hpp"
#include "cibpu/attacks.hpp"
#include "cibpu/binsballs.hpp"

using namespace cibpu;

TEST(Bins, ExactFirstOverflowTinyCase) {
  // Two bins, capacity 1: no overflow after 0 or 1 throws, half the time after 2.
  EXPECT_NEAR(static_cast<double>(expected_first_overflow(2, 1)), 2.5, 1e-12);
  // One bin of capacity W overflows at throw W+1.
  EXPECT_NEAR(static_cast<double>(expected_first_overflow(1, 4)), 5.0, 1e-12);
}

TEST(Bins, ConventionalOverflowMatchesExactExpectation) {
  BinsConfig b;
  b.two_skew = false;
  b.n_bin = 16;
  b.capacity = 2;
  const OverflowResult r = run_conventional_overflow(b, 20000);
  const double exact = static_cast<double>(expected_first_overflow(16, 2));
  EXPECT_NEAR(r.mean / exact, 1.0, 0.05);
  EXPECT_EQ(r.throws.size(), 20000u);
  for (auto t : r.throws) ASSERT_GE(t, 3u);
}

TEST(Bins, ConventionalRequiresOneChoice) {
  BinsConfig b;
  EXPECT_THROW(run_conventional_overflow(b, 1), ConfigError);
}

TEST(Bins, TwoSkewBookkeeping) {
  BinsConfig b;
  b.n_bin = 256;
  b.n_ball = 256 * 8;
  b.capacity = 13;
  b.decision_log_limit = 5000;
  const TwoSkewResult r = run_two_skew(b, 200000);
  EXPECT_EQ(r.live_balls + r.free_slots, b.n_ball);
  EXPECT_EQ(r.free_slots, 0u);
  EXPECT_LE(r.histogram.counts.size(), b.capacity + 1u);
  ASSERT_EQ(r.decisions.size(), 5000u);
  for (const auto& d : r.decisions) EXPECT_EQ(d.chosen_skew, d.load0 <= d.load1 ? 0u : 1u);
  EXPECT_EQ(r.se_count, 200000 - b.n_ball);
  const auto d = histogram_probs(r.histogram);
  long double s = 0, mean = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    s += d.p[i];
    mean += i * d.p[i];
  }
  EXPECT_NEAR(static_cast<double>(s), 1.0, 1e-12);
  EXPECT_NEAR(static_cast<double>(mean), 8.0, 1e-9);  // every census sees all n_ball balls
}

TEST(Bins, EmptyHistogramIsAnError) {
  BinsConfig b;
  const TwoSkewResult r = run_two_skew(b, 0);
  EXPECT_THROW(histogram_probs(r.histogram), ConfigError);
  EXPECT_THROW(histogram_csv(r.histogram), ConfigError);
}

TEST(Bins, CsvHasHeaderAndRows) {
  OccupancyHistogram h;
  h.add(0, 3);
  h.add(2, 1);
  EXPECT_EQ(histogram_csv(h), "N,count,probability\n0,3,0.75\n1,0,0\n2,1,0.25\n");
}

TEST(Bins, SmallCapacityProducesDangerousEvictions) {
  BinsConfig b;
  b.n_bin = 2048;
  b.n_ball = 2048 * 2;
  b.capacity = 4;
  const TwoSkewResult r = run_two_skew(b, 2000000);
  EXPECT_GT(r.de_count, 0u);
  ASSERT_TRUE(r.first_de_at.has_value());
  EXPECT_LE(*r.first_de_at, 2000000u);
}

TEST(Bins, NoDangerousEvictionAtDefaults) {
  BinsConfig b;
  const TwoSkewResult r = run_two_skew(b, 10000000);
  EXPECT_EQ(r.de_count, 0u);
  EXPECT_FALSE(r.first_de_at.has_value());
}

TEST(Bins, CibtbOccupancyMatchesBinsModel) {
  // The keyed structure under random PCs is the bins-and-balls process.
  SimConfig c;
  c.i_btb = 10;
  c.n_ball = 1024 * 8;
  c.mapping = MappingMode::IdealOracle;
  Cibtb btb(c);
  Rng rng(6);
  DeProbeOptions opt;
  opt.census_interval = 1024;
  opt.warmup = c.n_ball;
  const DeProbeResult p = de_probe(btb, 3000000, rng, opt);
  OccupancyHistogram cib = p.census[0];
  cib.merge(p.census[1]);

  BinsConfig b;
  b.n_bin = 1024;
  b.n_ball = 1024 * 8;
  const TwoSkewResult r = run_two_skew(b, 3000000);
  const auto d1 = histogram_probs(cib), d2 = histogram_probs(r.histogram);
  for (unsigned n = 5; n <= 10; ++n) {
    const double a = static_cast<double>(d1.at(n)), e = static_cast<double>(d2.at(n));
    const double se = std::sqrt(e / cib.total_observations) * 10;  // census samples are correlated
    EXPECT_NEAR(a, e, std::max(se, 0.1 * e)) << "N=" << n;
  }
}
