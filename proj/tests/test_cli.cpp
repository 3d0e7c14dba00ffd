#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

struct CliRun {
  int status = -1;
  std::string out;
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(CIBPU_CLI_PATH) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path tmp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("cibpu_cli_test_" + name);
}

}  // namespace

TEST(Cli, AnalyticsDefaults) {
  const CliRun r = run("analytics --defaults");
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  const auto& rep = j["report"];
  EXPECT_EQ(rep["a_pht_exact"], "2417851639229258349412352");
  EXPECT_NEAR(rep["a_pht"].get<double>() / 2.4e24, 1.0, 0.01);
  EXPECT_NEAR(rep["a_btb"].get<double>() / 4.7e21, 1.0, 0.01);
  EXPECT_NEAR(rep["l1_est"].get<double>() / 7690, 1.0, 0.01);
  EXPECT_NEAR(rep["l2_est"].get<double>() / 1.4e5, 1.0, 0.05);
  const double per_de = rep["attacks_per_de"].get<double>();
  EXPECT_GE(per_de, 1e30);
  EXPECT_LE(per_de, 1e33);
  EXPECT_EQ(j["config"]["i_pht"], 13);
}

TEST(Cli, ErrorStatuses) {
  EXPECT_EQ(run("bins-two-skew --insertions 0").status, 2);
  EXPECT_EQ(run("bins-two-skew --insertions 0 --format csv").status, 2);
  EXPECT_EQ(run("analytics --no-such-flag").status, 2);
  EXPECT_EQ(run("no-such-command").status, 2);
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("run-trace --config /nonexistent/cfg.json").status, 2);
  EXPECT_EQ(run("run-trace --trace /nonexistent/trace.txt").status, 2);

  const auto bad = tmp("bad.json");
  std::ofstream(bad) << "{\"i_pht\": 13, \"bogus\": 1}";
  EXPECT_EQ(run("run-trace --config " + bad.string()).status, 2);
  std::ofstream(bad) << "{\"n_ball\": 999999999}";
  EXPECT_EQ(run("run-trace --config " + bad.string()).status, 2);
  std::ofstream(bad) << "not json";
  EXPECT_EQ(run("analytics --config " + bad.string()).status, 2);
  std::filesystem::remove(bad);

  const auto tr = tmp("bad_trace.txt");
  std::ofstream(tr) << "1 0x10 C 1 0x20\n1 0x10 Q 1 0x20\n";
  EXPECT_EQ(run("run-trace --trace " + tr.string()).status, 2);
  std::filesystem::remove(tr);
}

TEST(Cli, SelftestPasses) {
  const CliRun r = run("selftest");
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("all checks passed"), std::string::npos);
}

TEST(Cli, RunTraceFromFileAndConfig) {
  const auto tr = tmp("trace.txt");
  std::ofstream(tr) << "# tiny\n0 0x400a10 C 1 0x400b00\n0 0x400a10 C 1 0x400b00\n0 0x400c00 J 1 0x400d00\n";
  const auto cfg = tmp("cfg.json");
  std::ofstream(cfg) << "{\"mapping\": \"ideal_oracle\", \"extra_tags\": 3}";
  const CliRun r = run("run-trace --trace " + tr.string() + " --config " + cfg.string());
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["records"], 3);
  EXPECT_EQ(j["config"]["mapping"], "ideal_oracle");
  EXPECT_EQ(j["config"]["extra_tags"], 3);
  EXPECT_EQ(j["results"]["cibpu"]["conditional_count"], 2);
  EXPECT_EQ(j["results"]["baseline"]["btb_lookups"], 3);
  std::filesystem::remove(tr);
  std::filesystem::remove(cfg);
}

TEST(Cli, OutputsAreByteIdentical) {
  const char* invocations[] = {
      "run-trace --branches 20000 --threads 2",
      "run-trace --branches 20000 --format csv",
      "bins-conventional --n-bin 64 --capacity 4 --trials 200 --samples",
      "bins-two-skew --n-bin 256 --n-ball 2048 --insertions 200000",
      "bins-two-skew --n-bin 256 --n-ball 2048 --insertions 200000 --format csv",
      "analytics --insertions 500000",
      "attack --kind reuse_pht --trials 300 --samples",
      "attack --kind reuse_btb --trials 300",
      "attack --kind reuse_pht --full-width",
      "attack --kind gem_eviction --trials 20 --samples",
      "attack --kind de_probe --budget 100000",
  };
  int i = 0;
  for (const char* inv : invocations) {
    const auto a = tmp("det_a_" + std::to_string(i)), b = tmp("det_b_" + std::to_string(i));
    ASSERT_EQ(run(std::string(inv) + " --output " + a.string()).status, 0) << inv;
    ASSERT_EQ(run(std::string(inv) + " --output " + b.string()).status, 0) << inv;
    const std::string ta = read_file(a);
    EXPECT_FALSE(ta.empty()) << inv;
    EXPECT_EQ(ta, read_file(b)) << inv;
    std::filesystem::remove(a);
    std::filesystem::remove(b);
    ++i;
  }
}

TEST(Cli, SeedChangesOutput) {
  const CliRun a = run("bins-conventional --n-bin 64 --capacity 4 --trials 100");
  const CliRun b = run("bins-conventional --n-bin 64 --capacity 4 --trials 100 --seed 42");
  ASSERT_EQ(a.status, 0);
  ASSERT_EQ(b.status, 0);
  EXPECT_NE(a.out, b.out);
  EXPECT_EQ(nlohmann::json::parse(b.out)["config"]["seed"], 42);
}

TEST(Cli, FullWidthReuseReportsAnalyticValue) {
  const CliRun r = run("attack --kind reuse_pht --full-width");
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j["result"]["rejected"].get<bool>());
  EXPECT_EQ(j["result"]["analytic_attempts_exact"], "2417851639229258349412352");
}
