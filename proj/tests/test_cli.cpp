#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "kdsim/cli.hpp"
#include "kdsim/csv.hpp"
#include "oracles.hpp"

using namespace kdsim;
namespace fs = std::filesystem;

namespace {

std::string scenario(const std::string& name)
{
  return std::string(KDSIM_SOURCE_DIR) + "/scenarios/" + name;
}

struct Invocation
{
  int code = -1;
  std::string out;
  std::string err;
};

Invocation invoke(const std::vector<std::string>& args)
{
  std::ostringstream out, err;
  Invocation r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, double> key_values(const std::string& text)
{
  std::map<std::string, double> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos)
      kv[line.substr(0, eq)] = std::strtod(line.c_str() + eq + 1, nullptr);
  }
  return kv;
}

class Cli : public ::testing::Test
{
protected:
  void SetUp() override
  {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("kdsim_cli_") + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write_file(const std::string& name, const std::string& text)
  {
    std::ofstream(dir / name) << text;
    return dir / name;
  }

  fs::path dir;
};

int count_lines(const std::string& text)
{
  int n = 0;
  for (char c : text)
    n += c == '\n';
  return n;
}

} // namespace

TEST_F(Cli, KinematicsAt20keV)
{
  const auto r = invoke({"kinematics", "--scenario", scenario("incoherent_20kev.ini")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.err.empty());
  const auto kv = key_values(r.out);
  EXPECT_NEAR(kv.at("order_angle_rad") / 1.73e-5, 1.0, 0.04);
  EXPECT_NEAR(kv.at("order_separation_m") / 208e-9, 1.0, 0.04);
  EXPECT_EQ(kv.at("beta_max"), 9.0);
}

TEST_F(Cli, PatternWithoutCouplingIsOnePeak)
{
  const auto text = slurp(scenario("incoherent_20kev.ini"));
  const auto pos = text.find("beta_max = 9");
  ASSERT_NE(pos, std::string::npos);
  const auto path = write_file("zero.ini", std::string(text).replace(pos, 12, "beta_max = 0"));
  const auto r = invoke({"pattern", "--scenario", path.string(), "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir / "pattern.csv");
  const Model m = build_model(load_scenario(path.string()));
  const auto p = csv::read_pattern(in, m.geometry);
  // Only the zero-order window holds intensity.
  const auto pops = extract_raw_populations(p, 3);
  EXPECT_GT(pops[3], 0.0);
  for (int k : {0, 1, 2, 4, 5, 6})
    EXPECT_LT(pops[k], 1e-12 * pops[3]) << k;
}

TEST_F(Cli, PatternCarriesMetadata)
{
  const auto r = invoke({"pattern", "--scenario", scenario("coherent_30kev.ini"), "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir / "pattern.csv");
  const auto t = csv::read_table(in);
  ASSERT_FALSE(t.metadata.empty());
  EXPECT_EQ(t.metadata[0].rfind("kd-sim ", 0), 0u);
  bool has_seed = false, has_nodes = false;
  for (const auto& m : t.metadata) {
    has_seed |= m == "seed = 1";
    has_nodes |= m.rfind("derived.quadrature_nodes = ", 0) == 0;
  }
  EXPECT_TRUE(has_seed);
  EXPECT_TRUE(has_nodes);
  EXPECT_EQ(t.header, (std::vector<std::string>{"position_m", "intensity"}));
}

TEST_F(Cli, PopulationsMatchLibrary)
{
  const auto r = invoke({"populations", "--scenario", scenario("coherent_30kev.ini"), "--out", dir.string(),
                         "--betas", "0:4.52:5"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir / "populations.csv");
  const auto t = csv::read_table(in);
  ASSERT_EQ(t.rows.size(), 5u);
  const Scenario s = load_scenario(scenario("coherent_30kev.ini"));
  const Model m = build_model(s);
  const int n = truncation_rule(4.52);
  ASSERT_EQ(t.header.size(), static_cast<std::size_t>(n + 2));
  for (const auto& row : t.rows) {
    const double b = csv::to_double(row[0]);
    const auto direct = ensemble_populations(m.field.scaled_to(b), m.distribution, n, ensemble_options(s));
    for (int k = 0; k <= 4; ++k)
      EXPECT_NEAR(csv::to_double(row[k + 1]), direct.population(k), 1e-9) << b << " " << k;
  }
}

TEST_F(Cli, ScanRowsPerPower)
{
  const auto r = invoke({"scan", "--scenario", scenario("coherent_30kev_power.ini"), "--out", dir.string(),
                         "--powers", "0:0.5:3"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir / "scan.csv");
  const auto t = csv::read_table(in);
  ASSERT_EQ(t.rows.size() % 3, 0u);
  const auto cb = t.column("beta_max");
  EXPECT_EQ(csv::to_double(t.rows.front()[cb]), 0.0);
  EXPECT_GT(csv::to_double(t.rows.back()[cb]), 0.0);
}

TEST_F(Cli, FitRecoversSyntheticCoupling)
{
  const auto r = invoke({"fit", "--scenario", scenario("coherent_30kev.ini"), "--out", dir.string(), "--seed", "7"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto kv = key_values(r.out);
  EXPECT_EQ(kv.at("converged"), 0.0); // "true" does not parse as a number
  EXPECT_NE(r.out.find("converged=true"), std::string::npos);
  EXPECT_NEAR(kv.at("beta_max") / 4.52, 1.0, 0.02);
  EXPECT_EQ(slurp(dir / "fit_summary.txt"), r.out);
  std::ifstream in(dir / "fit_report.csv");
  const auto t = csv::read_table(in);
  EXPECT_EQ(t.rows.at(0).at(0), "beta_max");
}

TEST_F(Cli, FitAcceptsObservedPattern)
{
  ASSERT_EQ(invoke({"pattern", "--scenario", scenario("coherent_30kev.ini"), "--out", dir.string()}).code, 0);
  const auto r = invoke({"fit", "--scenario", scenario("coherent_30kev.ini"), "--out", (dir / "fit").string(),
                         "--observed", (dir / "pattern.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(key_values(r.out).at("beta_max") / 4.52, 1.0, 1e-4);
}

TEST_F(Cli, OutputsAreDeterministic)
{
  for (const char* cmd : {"pattern", "fit"}) {
    const fs::path a = dir / "a", b = dir / "b";
    ASSERT_EQ(invoke({cmd, "--scenario", scenario("coherent_30kev.ini"), "--out", a.string()}).code, 0);
    ASSERT_EQ(invoke({cmd, "--scenario", scenario("coherent_30kev.ini"), "--out", b.string()}).code, 0);
    for (const auto& entry : fs::directory_iterator(a))
      EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
  }
}

TEST_F(Cli, UsageErrors)
{
  for (const auto& args : std::vector<std::vector<std::string>>{
           {},
           {"bogus"},
           {"pattern"},
           {"scan", "--scenario", scenario("coherent_30kev.ini")},
           {"pattern", "--scenario", scenario("coherent_30kev.ini"), "--seed", "x"},
       }) {
    const auto r = invoke(args);
    EXPECT_EQ(r.code, cli::usage_error);
    EXPECT_EQ(count_lines(r.err), 1) << r.err;
    EXPECT_EQ(r.err.rfind("error kind=usage ", 0), 0u) << r.err;
  }
  EXPECT_EQ(invoke({"--help"}).code, 0);
  EXPECT_EQ(invoke({"--version"}).out, std::string(version) + "\n");
}

TEST_F(Cli, ConfigErrorsNameTheField)
{
  const auto text = slurp(scenario("coherent_30kev.ini"));
  const auto bad = write_file("bad.ini", text + "[laser]\ncolour = green\n");
  struct Case
  {
    std::vector<std::string> args;
    std::string field;
  };
  const std::vector<Case> cases = {
      {{"kinematics", "--scenario", (dir / "missing.ini").string()}, "scenario"},
      {{"kinematics", "--scenario", bad.string()}, "laser"},
      {{"scan", "--scenario", scenario("coherent_30kev.ini"), "--powers", "1:0:3"}, "--powers"},
      {{"populations", "--scenario", scenario("coherent_30kev.ini"), "--betas", "0:x:3"}, "--betas"},
      {{"fit", "--scenario", scenario("coherent_30kev.ini"), "--beta-range", "5:1:2"}, "--beta-range"},
      {{"fit", "--scenario", scenario("coherent_30kev.ini"), "--observed", (dir / "none.csv").string()},
       "--observed"},
  };
  for (const auto& c : cases) {
    const auto r = invoke(c.args);
    EXPECT_EQ(r.code, cli::config_error) << r.err;
    EXPECT_EQ(count_lines(r.err), 1) << r.err;
    EXPECT_EQ(r.err.rfind("error kind=config field=" + c.field, 0), 0u) << r.err;
  }
}

TEST_F(Cli, OrderBelowTruncationRuleIsRejected)
{
  const auto path = write_file("low.ini", slurp(scenario("coherent_30kev.ini")));
  std::string text = slurp(path);
  text.replace(text.find("max_order = auto"), 16, "max_order = 3");
  write_file("low.ini", text);
  const auto r = invoke({"pattern", "--scenario", path.string(), "--out", dir.string()});
  EXPECT_EQ(r.code, cli::config_error);
  EXPECT_EQ(r.err.rfind("error kind=config field=numerics.max_order", 0), 0u) << r.err;
}

TEST_F(Cli, NumericalFailureExitCode)
{
  std::string text = slurp(scenario("incoherent_20kev.ini"));
  text.replace(text.find("beta_max = 9"), 12, "beta_max = 0.5");
  // Far too tight for the node budget.
  const auto pos = text.find("quadrature_tolerance = ");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, text.find('\n', pos) - pos, "quadrature_tolerance = 1e-30");
  const auto path = write_file("tight.ini", text);
  const auto r = invoke({"pattern", "--scenario", path.string(), "--out", dir.string()});
  EXPECT_EQ(r.code, cli::numerical_error) << r.err;
  EXPECT_EQ(count_lines(r.err), 1) << r.err;
  EXPECT_EQ(r.err.rfind("error kind=numerical ", 0), 0u) << r.err;
}

TEST_F(Cli, NarrowBeamWarnsButRuns)
{
  std::string text = slurp(scenario("coherent_30kev.ini"));
  text.replace(text.find("beam_sigma_x_m = 1.274e-6"), 25, "beam_sigma_x_m = 0.1e-6");
  const auto path = write_file("narrow.ini", text);
  const auto r = invoke({"kinematics", "--scenario", path.string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.err.rfind("warning ", 0), 0u) << r.err;
}

TEST_F(Cli, BinaryMatchesInProcessRun)
{
  const fs::path out_file = dir / "stdout.txt";
  const std::string cmd = std::string("\"") + KDSIM_BINARY + "\" kinematics --scenario \"" +
                          scenario("incoherent_20kev.ini") + "\" > \"" + out_file.string() + "\"";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(slurp(out_file), invoke({"kinematics", "--scenario", scenario("incoherent_20kev.ini")}).out);

  const std::string bad = std::string("\"") + KDSIM_BINARY + "\" kinematics --scenario \"" +
                          (dir / "missing.ini").string() + "\" 2> \"" + (dir / "err.txt").string() + "\"";
  const int status = std::system(bad.c_str());
  ASSERT_NE(status, -1);
  EXPECT_EQ(WEXITSTATUS(status), cli::config_error);
  EXPECT_EQ(slurp(dir / "err.txt").rfind("error kind=config ", 0), 0u);
}
