#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

CliRun cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() / ("exponentlab_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const fs::path out = dir / ("out" + std::to_string(counter)), err = dir / ("err" + std::to_string(counter));
  ++counter;
  const std::string cmd = std::string(EXPONENTLAB_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string data(const std::string& name) { return std::string(EXPONENTLAB_DATA_DIR) + "/" + name; }

}  // namespace

TEST(Cli, MissingScenarioIsAnInputError) {
  const CliRun r = cli("exponents --scenario /nonexistent/file.json");
  EXPECT_EQ(r.code, 2);
  const auto err = nlohmann::json::parse(r.err);
  EXPECT_EQ(err.at("error"), "ParseError");
  EXPECT_TRUE(err.contains("message"));
}

TEST(Cli, InvalidScenarioNamesTheField) {
  const fs::path bad = fs::temp_directory_path() / "exponentlab_bad_scenario.json";
  auto doc = nlohmann::json::parse(slurp(data("benchmark.json")));
  doc["hypotheses"]["priors"] = {0.5, 0.5, 0.5};
  std::ofstream(bad) << doc.dump();
  const CliRun r = cli("optimize select --scenario " + bad.string());
  EXPECT_EQ(r.code, 2);
  const auto err = nlohmann::json::parse(r.err);
  EXPECT_EQ(err.at("error"), "ValidationError");
  EXPECT_EQ(err.at("field"), "hypotheses.priors");
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli("optimize nonsense --scenario " + data("benchmark.json")).code, 2);
  EXPECT_EQ(cli("exponents --expert x --scenario " + data("benchmark.json")).code, 2);
  EXPECT_EQ(cli("exponents --expert 1 --policy 0.5,0.6 --scenario " + data("benchmark.json")).code, 2);
}

TEST(Cli, ExponentsForEveryExpert) {
  const CliRun r = cli("exponents --expert all --scenario " + data("benchmark.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  for (int k = 1; k <= 3; ++k) EXPECT_NE(r.out.find("[expert" + std::to_string(k) + "_summary]"), std::string::npos);
}

TEST(Cli, SelectWritesJson) {
  const fs::path js = fs::temp_directory_path() / "exponentlab_select.json";
  const CliRun r = cli("optimize select --scenario " + data("benchmark.json") + " --json " + js.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(slurp(js));
  EXPECT_EQ(doc.at("schema"), 1);
  EXPECT_EQ(doc.at("diagnostics").at("chosen_expert"), 2);
}

TEST(Cli, CsvDirectory) {
  const fs::path dir = fs::temp_directory_path() / "exponentlab_cli_csv";
  fs::remove_all(dir);
  const CliRun r = cli("optimize expert 2 --scenario " + data("benchmark.json") + " --csv " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(fs::is_empty(dir));
}

TEST(Cli, QuickSimulationIsSeedDeterministic) {
  const std::string args = "simulate --scenario " + data("benchmark.json") + " --sim " + data("sim_quick.json");
  const CliRun a = cli(args), b = cli(args), c = cli(args + " --seed 8");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, c.out);
}
