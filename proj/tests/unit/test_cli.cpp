#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pmc/commands.hpp"

using namespace pmc;
using namespace pmc::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("pmc_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

int simulate_with(const fs::path& dir, std::vector<std::string> sets, std::string* err = nullptr) {
  SimulateOptions o;
  o.out_dir = dir.string();
  o.overrides = std::move(sets);
  std::ostringstream log, e;
  const int code = guarded([&] { return cmd_simulate(o, log); }, e);
  if (err) *err = e.str();
  return code;
}

}  // namespace

TEST(CliSimulate, RowCountIsAgentsTimesProductsTimesPeriods) {
  const auto dir = scratch("rows");
  ASSERT_EQ(simulate_with(dir, {"dgp.design=baseline", "dgp.n=37", "dgp.seed=3"}), 0);
  EXPECT_EQ(lines(dir / "panel.csv").size(), 1u + 37u * 3u * 2u);
  EXPECT_TRUE(fs::exists(dir / "truth.json"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["command"], "simulate");
  EXPECT_EQ(manifest["configuration"]["dgp.n"], "37");
  EXPECT_EQ(manifest["outputs"].size(), 3u);
  fs::remove_all(dir);
}

TEST(CliSimulate, SameSeedGivesIdenticalFiles) {
  const auto a = scratch("seed_a"), b = scratch("seed_b");
  SimulateOptions o;
  o.overrides = {"dgp.design=oracle-logit", "dgp.n=200"};
  o.seed = 7;
  std::ostringstream log;
  o.out_dir = a.string();
  ASSERT_EQ(cmd_simulate(o, log), 0);
  o.out_dir = b.string();
  ASSERT_EQ(cmd_simulate(o, log), 0);
  for (const char* f : {"panel.csv", "truth.json", "resolved.conf"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(CliSimulate, SinglePeriodIsAValidationError) {
  std::string err;
  const auto dir = scratch("t1");
  EXPECT_EQ(simulate_with(dir, {"dgp.t=1"}, &err), ExitCode::validation);
  EXPECT_NE(err.find("t must be at least 2"), std::string::npos) << err;
}

TEST(CliSimulate, UnknownKeyNamesTheField) {
  std::string err;
  EXPECT_EQ(simulate_with(scratch("key"), {"dgp.nn=5"}, &err), ExitCode::validation);
  EXPECT_NE(err.find("dgp.nn"), std::string::npos) << err;
}

TEST(CliEstimate, MissingCovariateColumnIsNamed) {
  const auto data = scratch("missing_data"), out = scratch("missing_out");
  ASSERT_EQ(simulate_with(data, {"dgp.n=30"}), 0);
  EstimateOptions o;
  o.data = (data / "panel.csv").string();
  o.covariates = {"x1", "price"};
  o.out_dir = out.string();
  std::ostringstream log, err;
  EXPECT_EQ(guarded([&] { return cmd_estimate(o, log); }, err), ExitCode::validation);
  EXPECT_NE(err.str().find("price"), std::string::npos) << err.str();
  fs::remove_all(data);
  fs::remove_all(out);
}

TEST(CliEstimate, UnreadableDataIsAnIoError) {
  EstimateOptions o;
  o.data = "/nonexistent/panel.csv";
  o.out_dir = scratch("io").string();
  std::ostringstream log, err;
  EXPECT_EQ(guarded([&] { return cmd_estimate(o, log); }, err), ExitCode::io);
}

// Promotion-style panel with true signs (-, +, +); the two-stage estimate
// recovers the negative price coefficient.
TEST(CliEstimate, MultiplicativeEffectsPanelHasNegativeFirstCoefficient) {
  const auto data = scratch("mfe_data"), out = scratch("mfe_out");
  ASSERT_EQ(simulate_with(data, {"dgp.design=multiplicative-fe", "dgp.n=205", "dgp.j=4", "dgp.t=12", "dgp.seed=5"}),
            0);
  EstimateOptions o;
  o.data = (data / "panel.csv").string();
  o.shares = true;
  o.outside_option = true;
  o.regressor = "kernel";
  o.c_hat = "0,rule";
  o.out_dir = out.string();
  std::ostringstream log;
  const int code = cmd_estimate(o, log);
  EXPECT_TRUE(code == ExitCode::success || code == ExitCode::flagged);
  const auto rows = lines(out / "estimate.csv");
  ASSERT_EQ(rows.size(), 1u + 2u * 3u);
  int negative_first = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    std::vector<std::string> cells;
    std::stringstream ss(rows[r]);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    ASSERT_GE(cells.size(), 6u);
    const double lo = std::stod(cells[3]), mid = std::stod(cells[4]), hi = std::stod(cells[5]);
    EXPECT_LE(lo, mid);
    EXPECT_LE(mid, hi);
    if (cells[2] == "x1") negative_first += mid < 0.0 ? 1 : 0;
  }
  EXPECT_EQ(negative_first, 2);
  for (const char* f : {"estimate.txt", "enclosure.csv", "trace_1.csv", "trace_2.csv", "gamma.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  fs::remove_all(data);
  fs::remove_all(out);
}

TEST(CliEstimate, RoundLimitIsFlagged) {
  const auto data = scratch("flag_data"), out = scratch("flag_out");
  ASSERT_EQ(simulate_with(data, {"dgp.n=300"}), 0);
  EstimateOptions o;
  o.data = (data / "panel.csv").string();
  o.regressor = "kernel";
  o.overrides = {"grid.max_rounds=1"};
  o.out_dir = out.string();
  std::ostringstream log;
  EXPECT_EQ(cmd_estimate(o, log), ExitCode::flagged);
  fs::remove_all(data);
  fs::remove_all(out);
}

TEST(CliMc, UnknownSuiteListsTheSuites) {
  McOptions o;
  o.suite = "table5";
  o.out_dir = scratch("suite").string();
  std::ostringstream log, err;
  EXPECT_EQ(guarded([&] { return cmd_mc(o, log); }, err), ExitCode::validation);
  for (const auto& n : suite_names()) EXPECT_NE(err.str().find(n), std::string::npos) << n;
}

TEST(CliMc, SuiteScales) {
  const auto desk = make_suite("table3", false), full = make_suite("table3", true);
  ASSERT_EQ(desk.cases.size(), 3u);
  std::vector<int> dn, pn;
  for (const auto& c : desk.cases) dn.push_back(c.settings.dgp.n);
  for (const auto& c : full.cases) pn.push_back(c.settings.dgp.n);
  EXPECT_EQ(pn, (std::vector<int>{10000, 4000, 1000}));
  EXPECT_EQ(dn, (std::vector<int>{2000, 800, 200}));
  EXPECT_EQ(make_suite("table2", false).cases.front().settings.dgp.n, 2000);
  EXPECT_EQ(make_suite("table2", false).cases.front().settings.replications, 20);
  EXPECT_EQ(make_suite("table2", true).cases.front().settings.replications, 100);
  EXPECT_EQ(make_suite("table8", false).cases.size(), 8u);
}

TEST(CliMc, FirstStageSuiteHasThreeSmootherColumns) {
  McOptions o;
  o.suite = "table1";
  o.replications = 2;
  o.overrides = {"dgp.n=300"};
  o.out_dir = scratch("table1").string();
  std::ostringstream log;
  ASSERT_EQ(cmd_mc(o, log), 0) << log.str();
  const auto csv = lines(fs::path(o.out_dir) / "table1_1.csv");
  ASSERT_EQ(csv.size(), 3u);
  EXPECT_EQ(csv[0], ",indicator,positive part,adjusted normal CDF");
  EXPECT_EQ(csv[1].rfind("mean MSE,", 0), 0u);
  EXPECT_EQ(csv[2].rfind("max MSE,", 0), 0u);
  fs::remove_all(o.out_dir);
}

// The per-case config written next to the results reruns the case exactly.
TEST(CliMc, ResolvedConfigReproducesTheRun) {
  const auto cfg_dir = scratch("mc_cfg");
  fs::create_directories(cfg_dir);
  {
    std::ofstream cfg(cfg_dir / "small.conf");
    cfg << "dgp.design = baseline\ndgp.n = 150\nmc.replications = 2\nmc.seed = 9\nestimator.regressor = kernel\n";
  }
  McOptions o;
  o.config = (cfg_dir / "small.conf").string();
  o.out_dir = (cfg_dir / "first").string();
  std::ostringstream log;
  ASSERT_EQ(cmd_mc(o, log), 0) << log.str();
  o.config = (cfg_dir / "first" / "case_1.conf").string();
  o.out_dir = (cfg_dir / "second").string();
  ASSERT_EQ(cmd_mc(o, log), 0) << log.str();
  for (const char* f : {"replications.csv", "summary.csv", "custom.txt", "case_1.conf"})
    EXPECT_EQ(slurp(cfg_dir / "first" / f), slurp(cfg_dir / "second" / f)) << f;
  fs::remove_all(cfg_dir);
}

TEST(CliManifest, Sha256MatchesKnownDigest) {
  std::istringstream in("abc");
  EXPECT_EQ(sha256_hex(in), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Report, TextTableAlignsColumns) {
  Table t;
  t.header = {"", "a", "bbb"};
  t.add({"row", "1.0", "2"});
  std::ostringstream os;
  write_text(os, t);
  EXPECT_EQ(os.str(), "-------------\n       a  bbb\n-------------\nrow  1.0    2\n-------------\n");
  std::ostringstream csv;
  t.add({"x,y", "\"q\"", ""});
  write_csv(csv, t);
  EXPECT_EQ(csv.str(), ",a,bbb\nrow,1.0,2\n\"x,y\",\"\"\"q\"\"\",\n");
}

TEST(Report, NegativeZeroPrintsUnsigned) {
  EXPECT_EQ(fixed(-0.00001), "0.0000");
  EXPECT_EQ(fixed(-0.25), "-0.2500");
}
