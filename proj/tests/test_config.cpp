#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fedcod/fedcod.hpp"

using namespace fedcod;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) { return std::string(FEDCOD_FIXTURE_DIR) + "/" + name; }

Json read_fixture(const std::string& name) {
  std::ifstream in(fixture(name));
  return Json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const Json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "config accepted: " << doc.dump();
  return {};
}

struct CliResult {
  int status = -1;
  std::string output;
};

// Runs the CLI with stderr folded into the captured output.
CliResult cli(const std::string& args) {
  const std::string cmd = std::string(FEDCOD_CLI) + " " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("fedcod_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Config, MinimalFixtureAppliesDefaults) {
  const auto cfg = load_config(fixture("minimal.json"));
  EXPECT_EQ(cfg.topology.clients().size(), 1u);
  EXPECT_EQ(cfg.resolved_k(), 1u);
  EXPECT_DOUBLE_EQ(cfg.redundancy_ratio, 1.0);
  EXPECT_EQ(cfg.static_r(), 1);
  EXPECT_EQ(cfg.output, "out");
  EXPECT_DOUBLE_EQ(cfg.adaptive.lambda, 1.1);
  EXPECT_EQ(cfg.adaptive.window, 5);
  ASSERT_EQ(cfg.variants.size(), 1u);
  EXPECT_EQ(cfg.variants[0].variant, Variant::Baseline);
  EXPECT_DOUBLE_EQ(cfg.topology.coding_cost, 0.0);
}

TEST(Config, GlobalFixtureDefaultsKToClientCount) {
  const auto cfg = load_config(fixture("global.json"));
  EXPECT_EQ(cfg.topology.clients().size(), 10u);
  EXPECT_EQ(cfg.resolved_k(), 10u);
  EXPECT_EQ(cfg.static_r(), 10);
  EXPECT_EQ(cfg.variants.size(), 9u);
}

TEST(Config, UnknownVariantNamesValueAndPath) {
  auto doc = read_fixture("minimal.json");
  doc["variants"] = Json::array({"baseline", "u9-x"});
  const auto msg = config_error(doc);
  EXPECT_NE(msg.find("u9-x"), std::string::npos) << msg;
  EXPECT_NE(msg.find("variants[1]"), std::string::npos) << msg;
}

TEST(Config, UnknownKeysAreRejected) {
  auto doc = read_fixture("minimal.json");
  doc["roundz"] = 3;
  EXPECT_NE(config_error(doc).find("roundz"), std::string::npos);

  doc = read_fixture("minimal.json");
  doc["topology"]["links"][0]["bandwidth"] = 5;
  EXPECT_NE(config_error(doc).find("topology.links[0]"), std::string::npos);
}

TEST(Config, MissingKeyAndTypeMismatchCarryPath) {
  auto doc = read_fixture("minimal.json");
  doc.erase("rounds");
  EXPECT_NE(config_error(doc).find("rounds"), std::string::npos);

  doc = read_fixture("minimal.json");
  doc["model_length"] = "big";
  EXPECT_NE(config_error(doc).find("model_length"), std::string::npos);

  doc = read_fixture("minimal.json");
  doc["topology"]["links"][0]["mean_mbps"] = -1;
  EXPECT_NE(config_error(doc).find("topology.links[0].mean_mbps"), std::string::npos);
}

TEST(Config, IncompleteMeshIsRejected) {
  auto doc = read_fixture("minimal.json");
  doc["topology"]["nodes"].push_back(Json{{"name", "d"}});
  EXPECT_FALSE(config_error(doc).empty());
}

TEST(Config, FixturesRoundTripThroughNormalForm) {
  for (const char* name : {"minimal.json", "global.json", "stable.json", "fault.json", "faulty_link.json"}) {
    SCOPED_TRACE(name);
    const auto raw = read_fixture(name);
    const auto canonical = serialize(parse_config(raw));
    EXPECT_EQ(canonical, normalize(raw));
    EXPECT_EQ(serialize(parse_config(canonical)), canonical);
  }
}

TEST(Report, CsvHeaderMatchesGolden) {
  const auto golden = slurp(std::string(FEDCOD_GOLDEN_DIR) + "/metrics_header.csv");
  const auto cfg = load_config(fixture("minimal.json"));
  const auto csv = metrics_csv(run_experiment(cfg), cfg.topology);
  EXPECT_EQ(csv.substr(0, csv.find('\n') + 1), golden);
}

TEST(Report, CsvHasOneRowPerClientAndServerPerRound) {
  auto cfg = load_config(fixture("global.json"));
  cfg.rounds = 2;
  cfg.variants = {VariantSpec::make(Variant::Baseline), VariantSpec::make(Variant::FedCod)};
  const auto csv = metrics_csv(run_experiment(cfg), cfg.topology);
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  EXPECT_EQ(lines, 1 + 2 * 2 * 11);
}

TEST(Report, CompareIdenticalIsAllZero) {
  auto cfg = load_config(fixture("global.json"));
  cfg.rounds = 2;
  cfg.variants = {VariantSpec::make(Variant::Baseline), VariantSpec::make(Variant::D2C)};
  const auto s = summary_json(run_experiment(cfg), cfg);
  const auto report = compare_summaries(s, s);
  ASSERT_EQ(report["deltas"].size(), 2u);
  for (const auto& d : report["deltas"])
    for (const auto& [field, value] : d["delta_percent"].items()) EXPECT_EQ(value.get<double>(), 0.0) << field;
}

TEST(Report, CompareBaselineAgainstCodedDownloadIsNegative) {
  auto cfg = load_config(fixture("global.json"));
  cfg.variants = {VariantSpec::make(Variant::Baseline)};
  const auto a = summary_json(run_experiment(cfg), cfg);
  cfg.variants = {VariantSpec::make(Variant::D2C)};
  const auto b = summary_json(run_experiment(cfg), cfg);
  const auto report = compare_summaries(a, b);
  ASSERT_EQ(report["deltas"].size(), 1u);
  EXPECT_LT(report["deltas"][0]["delta_percent"]["mean_download"].get<double>(), 0.0);
}

TEST(Report, AdaptiveSavesInterClientTrafficOnStableNetwork) {
  auto cfg = load_config(fixture("stable.json"));
  cfg.variants = {VariantSpec::make(Variant::FedCod)};
  const auto a = summary_json(run_experiment(cfg), cfg);
  cfg.variants = {VariantSpec::make(Variant::FedCodAdaptive)};
  const auto b = summary_json(run_experiment(cfg), cfg);
  const auto report = compare_summaries(a, b);
  EXPECT_LE(report["deltas"][0]["delta_percent"]["inter_client_bytes"].get<double>(), 0.0);
}

TEST(Report, CompareRejectsMismatchedConfigs) {
  auto cfg = load_config(fixture("minimal.json"));
  const auto a = summary_json(run_experiment(cfg), cfg);
  cfg.rounds = 2;
  const auto b = summary_json(run_experiment(cfg), cfg);
  try {
    compare_summaries(a, b);
    FAIL() << "mismatched rounds compared";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::comparison_error);
  }
  auto other = load_config(fixture("stable.json"));
  other.rounds = 1;
  other.variants = {VariantSpec::make(Variant::Baseline)};
  cfg.rounds = 1;
  EXPECT_THROW(compare_summaries(a, summary_json(run_experiment(other), other)), Error);
}

TEST(Cli, RunWritesOutputsAndExitsZero) {
  const auto dir = scratch("run");
  const auto r = cli("run --config " + fixture("minimal.json") + " --out " + dir.string());
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir / "metrics.csv"));
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
}

TEST(Cli, ConfigErrorExitsOne) {
  const auto dir = scratch("bad");
  auto doc = read_fixture("minimal.json");
  doc["variants"] = Json::array({"u9-x"});
  std::ofstream(dir / "bad.json") << doc.dump();
  const auto r = cli("run --config " + (dir / "bad.json").string() + " --out " + dir.string());
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("u9-x"), std::string::npos) << r.output;

  EXPECT_EQ(cli("run --config " + (dir / "missing.json").string()).status, 1);
  EXPECT_EQ(cli("run").status, 1);
  EXPECT_EQ(cli("run --config " + fixture("minimal.json") + " --variant-filter fedcod --out " + dir.string()).status,
            1);
}

TEST(Cli, StalledRoundExitsTwoAndNamesTheLink) {
  const auto dir = scratch("stall");
  const auto r = cli("run --config " + fixture("faulty_link.json") + " --variant-filter baseline --out " + dir.string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.output.find("eu-west-1->us-east-1"), std::string::npos) << r.output;
}

TEST(Cli, SeedOverrideAndRerunAreByteIdentical) {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  const auto c = scratch("det_c");
  const std::string base = "run --config " + fixture("global.json") + " --variant-filter baseline,fedcod ";
  ASSERT_EQ(cli(base + "--out " + a.string()).status, 0);
  ASSERT_EQ(cli(base + "--out " + b.string()).status, 0);
  ASSERT_EQ(cli(base + "--seed-override 99 --out " + c.string()).status, 0);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_NE(slurp(a / "metrics.csv"), slurp(c / "metrics.csv"));
}

TEST(Cli, CompareIdenticalSummaries) {
  const auto dir = scratch("cmp");
  ASSERT_EQ(cli("run --config " + fixture("minimal.json") + " --out " + dir.string()).status, 0);
  const auto s = (dir / "summary.json").string();
  const auto r = cli("compare " + s + " " + s);
  ASSERT_EQ(r.status, 0) << r.output;
  const auto report = Json::parse(r.output);
  for (const auto& [field, value] : report["deltas"][0]["delta_percent"].items())
    EXPECT_EQ(value.get<double>(), 0.0) << field;
  EXPECT_EQ(cli("compare " + s + " " + (dir / "nope.json").string()).status, 1);
}

TEST(Cli, AllVariantsOnGlobalFixtureWithinBudget) {
  const auto dir = scratch("budget");
  const auto start = std::chrono::steady_clock::now();
  const auto r = cli("run --config " + fixture("global.json") + " --out " + dir.string());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_LT(secs, 60.0);
}
