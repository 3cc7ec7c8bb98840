#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fedcod/fedcod.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitStalled = 2;
constexpr int kExitInternal = 3;

std::vector<std::string> split_names(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& filter,
        const std::string& out_dir) {
  auto cfg = fedcod::load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (!out_dir.empty()) cfg.output = out_dir;
  if (!filter.empty()) {
    std::vector<fedcod::VariantSpec> kept;
    for (const auto& name : split_names(filter)) {
      bool matched = false;
      for (const auto& v : cfg.variants)
        if (v.label == name || fedcod::variant_name(v.variant) == name) {
          if (std::find_if(kept.begin(), kept.end(), [&](const auto& k) { return k.label == v.label; }) == kept.end())
            kept.push_back(v);
          matched = true;
        }
      if (!matched) throw fedcod::ConfigError("--variant-filter", "no configured variant named '" + name + "'");
    }
    cfg.variants = std::move(kept);
  }
  const auto result = fedcod::run_experiment(cfg);
  std::filesystem::create_directories(cfg.output);
  const auto dir = std::filesystem::path(cfg.output);
  std::ofstream(dir / "metrics.csv") << fedcod::metrics_csv(result, cfg.topology);
  std::ofstream(dir / "summary.json") << fedcod::summary_json(result, cfg).dump(2) << "\n";
  std::cout << "wrote " << (dir / "metrics.csv").string() << " and " << (dir / "summary.json").string() << "\n";
  return kExitOk;
}

int compare(const std::string& a, const std::string& b) {
  const auto ja = fedcod::read_json_file(a, fedcod::Errc::comparison_error);
  const auto jb = fedcod::read_json_file(b, fedcod::Errc::comparison_error);
  std::cout << fedcod::compare_summaries(ja, jb).dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coded-communication federated learning simulator"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run an experiment config");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string filter;
  std::string out_dir;
  run_cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
  run_cmd->add_option("--seed-override", seed, "replace the config seed");
  run_cmd->add_option("--variant-filter", filter, "comma-separated variant names or labels");
  run_cmd->add_option("--out", out_dir, "output directory");

  auto* cmp_cmd = app.add_subcommand("compare", "percentage deltas between two summaries");
  std::string a, b;
  cmp_cmd->add_option("a", a, "baseline summary.json")->required();
  cmp_cmd->add_option("b", b, "other summary.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run_cmd) return run(config_path, seed, filter, out_dir);
    return compare(a, b);
  } catch (const fedcod::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const fedcod::StalledRound& e) {
    std::cerr << e.what() << " (client " << e.client() << ", link " << e.link() << ")\n";
    return kExitStalled;
  } catch (const fedcod::Error& e) {
    std::cerr << e.what() << "\n";
    return e.code() == fedcod::Errc::comparison_error || e.code() == fedcod::Errc::invalid_config ? kExitConfig
                                                                                                  : kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}
