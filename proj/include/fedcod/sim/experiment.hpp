#pragma once

// Multi-round experiments: one persistent network per variant, redundancy
// threaded across rounds, variants run concurrently.

#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedcod/redundancy.hpp"
#include "fedcod/sim/round.hpp"

namespace fedcod {

struct AdaptiveParams {
  std::optional<int> r_init;
  std::optional<int> r_lb;
  double lambda = 1.1;
  std::optional<int> r_max;
  int window = 5;

  ControllerParams resolve(std::size_t k) const {
    auto p = ControllerParams::defaults(k);
    if (r_init) p.r_init = *r_init;
    if (r_lb) p.r_lb_init = *r_lb;
    if (r_max) p.r_max = *r_max;
    p.lambda = lambda;
    p.window = window;
    return p;
  }
  bool operator==(const AdaptiveParams&) const = default;
};

struct ExperimentConfig {
  Topology topology;
  std::vector<VariantSpec> variants;
  std::uint32_t rounds = 1;
  std::size_t model_length = 1;
  std::optional<std::size_t> k;  // unset: number of clients
  double redundancy_ratio = 1.0;
  AdaptiveParams adaptive;
  std::uint64_t seed = 0;
  std::string output = "out";

  std::size_t resolved_k() const { return k ? *k : topology.clients().size(); }
  int static_r() const {
    return static_cast<int>(std::lround(redundancy_ratio * static_cast<double>(resolved_k())));
  }
};

struct VariantResult {
  VariantSpec variant;
  std::vector<RoundMetrics> rounds;
  std::vector<RedundancyState> trajectory;  // state used in each round (adaptive only)
};

struct ExperimentResult {
  std::vector<VariantResult> variants;  // in config order
};

inline VariantResult run_variant(const ExperimentConfig& cfg, const VariantSpec& variant) {
  VariantResult out;
  out.variant = variant;
  Network net(cfg.topology, cfg.seed);
  ModelVector global = initial_model(cfg.model_length, cfg.seed);
  const std::size_t k = cfg.resolved_k();
  std::optional<RedundancyState> ctl;
  if (variant.adaptive()) ctl = controller_init(cfg.adaptive.resolve(k));
  for (std::uint32_t round = 1; round <= cfg.rounds; ++round) {
    RoundParams p;
    p.round = round;
    p.k = k;
    p.seed = cfg.seed;
    if (ctl) {
      p.r = ctl->r;
      p.r_lb = ctl->r_lb;
      out.trajectory.push_back(*ctl);
    } else {
      p.r = variant.uses_redundancy() ? cfg.static_r() : 0;
    }
    auto outcome = run_round(cfg.topology, variant, p, net, global);
    if (ctl) *ctl = controller_update(*ctl, std::max(outcome.metrics.communication, 1e-12));
    global = std::move(outcome.aggregate);
    out.rounds.push_back(std::move(outcome.metrics));
  }
  return out;
}

/// Runs every variant; results are ordered as in the config regardless of
/// completion order. The first failure is rethrown.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool parallel = true) {
  if (cfg.resolved_k() == 0) fail(Errc::invalid_config, "k must be at least 1");
  cfg.topology.validate();
  ExperimentResult result;
  if (!parallel) {
    for (const auto& v : cfg.variants) result.variants.push_back(run_variant(cfg, v));
    return result;
  }
  std::vector<std::future<VariantResult>> jobs;
  for (const auto& v : cfg.variants) jobs.push_back(std::async(std::launch::async, run_variant, std::cref(cfg), v));
  std::exception_ptr first;
  for (auto& j : jobs) {
    try {
      result.variants.push_back(j.get());
    } catch (...) {
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
  return result;
}

}  // namespace fedcod
