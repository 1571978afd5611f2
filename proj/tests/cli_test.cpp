#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "gwspine/cli.hpp"

namespace {

using nlohmann::json;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gwspine");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = gwspine::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Data rows of a CSV document, comment lines and header dropped.
std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("gwspine_cli_test_" + name);
}

TEST(Cli, NormingGeometric) {
  const auto r = run_cli({"norming", "--law", "geometric:p=0.5", "--s", "0.5", "--depth", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("# gwspine ", 0), 0u);
  EXPECT_NE(r.out.find("n,x,c,lnD,c_ratio,D_ratio"), std::string::npos);
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_NEAR(std::stod(rows[1][2]), 2.466303, 1e-6);
  EXPECT_NEAR(std::stod(rows[2][2]), 4.481420, 1e-6);
}

TEST(Cli, NormingDeterministicRatioIsTwo) {
  const auto r = run_cli({"norming", "--law", "deterministic:k=2", "--depth", "10", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["tool"], "gwspine");
  EXPECT_EQ(j["config"]["depth"], 10);
  for (std::size_t n = 0; n < 10; ++n) EXPECT_DOUBLE_EQ(j["rows"][n]["c_ratio"].get<double>(), 2.0);
}

TEST(Cli, NormingDyadicRatioNearMean) {
  const auto r = run_cli({"norming", "--law", "dyadic:m=2", "--depth", "40", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_LT(std::abs(j["rows"][39]["c_ratio"].get<double>() - 2.0), 0.05);
}

TEST(Cli, SpineDeterministicBinary) {
  const auto r = run_cli({"spine", "--law", "deterministic:k=2", "--depth", "8", "--horizon", "3",
                          "--replicas", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 5u * 8u);
  for (const auto& row : rows) {
    ASSERT_EQ(row.size(), 9u);
    EXPECT_EQ(row[2], "2");
    EXPECT_NEAR(std::stod(row[6]), std::log(2.0), 1e-12);
  }
}

TEST(Cli, SpineJsonSummary) {
  const auto r = run_cli({"spine", "--law", "geometric:p=0.5", "--depth", "12", "--horizon", "4",
                          "--replicas", "50", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["family"], "geometric");
  EXPECT_EQ(j["budget_failures"], 0);
  EXPECT_EQ(j["bound_violations"], 0);
  EXPECT_EQ(j["holder_hat"]["median_by_n"].size(), 12u);
  EXPECT_EQ(j["burst_partial_sums"].size(), 13u);
}

TEST(Cli, SameSeedSameBytesForAnyThreadCount) {
  const std::vector<std::string> base = {"spine", "--law", "dyadic:m=2", "--depth", "15",
                                         "--horizon", "5", "--replicas", "40", "--seed", "7"};
  auto with_threads = [&](const std::string& t) {
    auto args = base;
    args.insert(args.end(), {"--threads", t});
    return run_cli(args);
  };
  const auto a = run_cli(base);
  const auto b = run_cli(base);
  const auto c = with_threads("4");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, c.out);
  auto other_seed = base;
  other_seed[10] = "8";
  EXPECT_NE(run_cli(other_seed).out, a.out);
}

TEST(Cli, VerifyPassesOnFiniteLaws) {
  const auto r = run_cli({"verify", "--law", "finite:0.5,0.5", "--depth", "3", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_TRUE(j["pass"].get<bool>());
  EXPECT_EQ(j["checks"].size(), 14u);
  const auto d = run_cli({"verify", "--law", "deterministic:k=2", "--depth", "2"});
  EXPECT_EQ(d.code, 0) << d.err;
  for (const auto& row : csv_rows(d.out)) EXPECT_EQ(row.back(), "true") << row[0];
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({"norming", "--law", "bogus"}).code, 1);
  EXPECT_NE(run_cli({"norming", "--law", "bogus"}).err.find("usage error"), std::string::npos);
  EXPECT_EQ(run_cli({"norming"}).code, 1);
  EXPECT_EQ(run_cli({"norming", "--law", "geometric:p=0.5", "--s", "1.0"}).code, 1);
  EXPECT_EQ(run_cli({"norming", "--law", "geometric:p=0.5", "--format", "xml"}).code, 1);
  EXPECT_EQ(run_cli({"verify", "--law", "geometric:p=0.5"}).code, 1);
  EXPECT_EQ(run_cli({"bursts", "--law", "geometric:p=0.5", "--a", "1.5", "--b", "1.4"}).code, 1);
  EXPECT_EQ(run_cli({"bursts", "--law", "geometric:p=0.5", "--b", "2.5"}).code, 1);
  EXPECT_EQ(run_cli({"spine", "--law", "finite:0.5,0.5", "--a", "0.9"}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
  EXPECT_EQ(run_cli({}).code, 1);
}

TEST(Cli, BudgetExceeded) {
  EXPECT_EQ(run_cli({"verify", "--law", "finite:0.5,0.5", "--depth", "6"}).code, 3);
  const auto gw = run_cli({"gw", "--law", "deterministic:k=3", "--depth", "6", "--cap", "50",
                           "--replicas", "2"});
  EXPECT_EQ(gw.code, 3);
  EXPECT_NE(gw.err.find("budget"), std::string::npos);
  EXPECT_EQ(run_cli({"spine", "--law", "deterministic:k=3", "--depth", "6", "--horizon", "2",
                     "--replicas", "2", "--explicit", "--cap", "50", "--b", "2.5", "--a", "1.5"})
                .code,
            3);
}

TEST(Cli, BurstsComparison) {
  const auto r = run_cli({"bursts", "--law", "geometric:p=0.5", "--law2", "dyadic:m=2", "--depth",
                          "40", "--b", "1.8", "--replicas", "2000", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  ASSERT_EQ(j["laws"].size(), 2u);
  EXPECT_TRUE(j["comparison"]["law2_exceeds_law_10x"].get<bool>());
  EXPECT_NEAR(j["laws"][1]["tail_increment"].get<double>(), 0.355889, 1e-5);
  for (const auto& law : j["laws"]) EXPECT_TRUE(law["monte_carlo"]["within_4_se"].get<bool>());

  const auto bounded = run_cli({"bursts", "--law", "finite:0.5,0.5", "--a", "1.2", "--b", "1.45",
                                "--depth", "20", "--replicas", "100"});
  ASSERT_EQ(bounded.code, 0) << bounded.err;
  for (const auto& row : csv_rows(bounded.out)) {
    if (std::stoi(row[1]) >= 7) {
      EXPECT_EQ(std::stod(row[2]), 0.0) << row[1];
    }
  }
}

TEST(Cli, GwMartingaleMeans) {
  const auto r = run_cli({"gw", "--law", "geometric:p=0.5", "--depth", "8", "--replicas", "4000",
                          "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  for (const auto& row : j["martingales"]) {
    if (row["n"] == 0) continue;
    EXPECT_LT(std::abs(row["mean_m"].get<double>() - 0.5), 4.0 * row["se_m"].get<double>());
  }
  const auto csv = run_cli({"gw", "--law", "deterministic:k=2", "--depth", "3", "--replicas", "1"});
  const auto rows = csv_rows(csv.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[3][2], "8");
}

TEST(Cli, ConfigFileOverridesFlagsAndOutputFile) {
  const auto cfg = temp_path("config.json");
  const auto out = temp_path("out.json");
  {
    std::ofstream f(cfg);
    f << R"({"law": "deterministic:k=2", "depth": 4, "format": "json"})";
  }
  const auto r = run_cli({"norming", "--law", "geometric:p=0.5", "--depth", "9", "--config",
                          cfg.string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(out);
  const auto j = json::parse(in);
  EXPECT_EQ(j["config"]["law"], "deterministic:k=2");
  EXPECT_EQ(j["rows"].size(), 5u);
  {
    std::ofstream f(cfg);
    f << R"({"lawz": "deterministic:k=2"})";
  }
  EXPECT_EQ(run_cli({"norming", "--law", "geometric:p=0.5", "--config", cfg.string()}).code, 1);
  EXPECT_EQ(run_cli({"norming", "--law", "geometric:p=0.5", "--config", "/nonexistent/x.json"}).code, 1);
  std::filesystem::remove(cfg);
  std::filesystem::remove(out);
}

}  // namespace
