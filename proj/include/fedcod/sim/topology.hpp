#pragma once

// Static description of a simulated deployment: nodes, directed links and
// their stochastic bandwidth processes.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fedcod/coding.hpp"
#include "fedcod/protocol/hierfl.hpp"

namespace fedcod {

struct TimeInterval {
  double start = 0.0;
  double end = 0.0;  // exclusive

  bool contains(double t) const noexcept { return t >= start && t < end; }
  bool operator==(const TimeInterval&) const = default;
};

struct RoundRange {
  std::uint32_t first = 1;
  std::uint32_t last = 1;  // inclusive

  bool contains(std::uint32_t r) const noexcept { return r >= first && r <= last; }
  bool operator==(const RoundRange&) const = default;
};

struct LinkModel {
  NodeId src = 0;
  NodeId dst = 0;
  double mean_bw = 100.0;  // Mbps
  double var_bw = 0.0;     // Mbps^2
  double resample_interval = 10.0;
  std::vector<TimeInterval> faults;
  std::vector<RoundRange> fault_rounds;
  double fault_floor = 0.1;
  double latency = 0.0;

  double lower_bound() const noexcept { return 0.01 * mean_bw; }
  double upper_bound() const noexcept { return 10.0 * mean_bw; }
  bool operator==(const LinkModel&) const = default;
};

struct NodeModel {
  NodeId id = 0;
  std::string name;
  double nic_cap = 10000.0;  // Mbps, each direction
  double train_mu = 0.0;     // lognormal parameters of the training time, seconds
  double train_sigma = 0.0;
  bool train_zero = true;    // no training time at all

  double expected_train() const {
    return train_zero ? 0.0 : std::exp(train_mu + 0.5 * train_sigma * train_sigma);
  }
  bool operator==(const NodeModel&) const = default;
};

struct Topology {
  NodeId server = 0;
  std::vector<NodeModel> nodes;  // indexed by id
  std::map<std::pair<NodeId, NodeId>, LinkModel> links;
  std::vector<Cluster> clusters;
  double coding_cost = 0.0;  // seconds per payload element per block
  double stall_factor = 10.0;

  std::size_t size() const noexcept { return nodes.size(); }
  std::vector<NodeId> clients() const {
    std::vector<NodeId> out;
    for (const auto& n : nodes)
      if (n.id != server) out.push_back(n.id);
    return out;
  }
  const LinkModel& link(NodeId a, NodeId b) const {
    auto it = links.find({a, b});
    if (it == links.end())
      fail(Errc::invalid_config, "no link " + nodes.at(a).name + " -> " + nodes.at(b).name);
    return it->second;
  }
  bool has_link(NodeId a, NodeId b) const { return links.contains({a, b}); }
  const NodeModel& node(NodeId id) const { return nodes.at(id); }

  /// Every ordered pair of distinct nodes needs a link.
  void validate() const {
    if (nodes.size() < 2) fail(Errc::invalid_config, "topology needs a server and at least one client");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].id != i) fail(Errc::invalid_config, "node ids must be dense");
      if (!(nodes[i].nic_cap > 0.0)) fail(Errc::invalid_config, "nic cap of " + nodes[i].name + " must be positive");
    }
    for (const auto& a : nodes)
      for (const auto& b : nodes) {
        if (a.id == b.id) continue;
        const auto& l = link(a.id, b.id);
        if (!(l.mean_bw > 0.0)) fail(Errc::invalid_config, "link " + a.name + " -> " + b.name + " needs mean > 0");
        if (l.var_bw < 0.0) fail(Errc::invalid_config, "link " + a.name + " -> " + b.name + " has negative variance");
        if (!(l.resample_interval > 0.0))
          fail(Errc::invalid_config, "link " + a.name + " -> " + b.name + " needs a positive resample interval");
        if (!(l.fault_floor > 0.0)) fail(Errc::invalid_config, "fault floor must be positive");
        if (l.latency < 0.0) fail(Errc::invalid_config, "latency must be non-negative");
      }
  }
};

namespace detail {

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

}  // namespace detail

/// Draw of the link's bandwidth for the resample interval containing t,
/// ignoring faults. Pure in (link, t, seed).
inline double sample_base_bandwidth(const LinkModel& link, double t, std::uint64_t seed) {
  if (link.var_bw <= 0.0) return link.mean_bw;
  const auto interval = static_cast<std::uint64_t>(std::floor(t / link.resample_interval));
  std::uint64_t key = detail::mix(seed, 0x6277ULL);
  key = detail::mix(key, (static_cast<std::uint64_t>(link.src) << 16) | link.dst);
  key = detail::mix(key, interval);
  Rng rng(key);
  std::normal_distribution<double> dist(link.mean_bw, std::sqrt(link.var_bw));
  for (int i = 0; i < 64; ++i) {
    const double v = dist(rng);
    if (v >= link.lower_bound() && v <= link.upper_bound()) return v;
  }
  return link.mean_bw;
}

inline bool in_fault(const LinkModel& link, double t, std::uint32_t round) {
  for (const auto& f : link.faults)
    if (f.contains(t)) return true;
  for (const auto& f : link.fault_rounds)
    if (f.contains(round)) return true;
  return false;
}

/// Bandwidth in Mbps at time t (round selects round-scheduled faults).
inline double sample_bandwidth(const LinkModel& link, double t, std::uint64_t seed, std::uint32_t round = 0) {
  if (in_fault(link, t, round)) return link.fault_floor;
  return sample_base_bandwidth(link, t, seed);
}

/// Earliest time after t at which sample_bandwidth may change.
inline double next_bandwidth_change(const LinkModel& link, double t) {
  double next = std::numeric_limits<double>::infinity();
  if (link.var_bw > 0.0) {
    const double idx = std::floor(t / link.resample_interval);
    next = (idx + 1.0) * link.resample_interval;
    if (next <= t) next = (idx + 2.0) * link.resample_interval;
  }
  for (const auto& f : link.faults) {
    if (f.start > t) next = std::min(next, f.start);
    if (f.end > t) next = std::min(next, f.end);
  }
  return next;
}

/// Expected duration of a plain client-server round, used for the stall cap.
inline double baseline_expectation(const Topology& topo, std::size_t model_bytes) {
  double worst = 0.0;
  for (NodeId c : topo.clients()) {
    const double bits = 8.0 * static_cast<double>(model_bytes);
    const double t = bits / (topo.link(topo.server, c).mean_bw * 1e6) + topo.node(c).expected_train() +
                     bits / (topo.link(c, topo.server).mean_bw * 1e6) + topo.link(topo.server, c).latency +
                     topo.link(c, topo.server).latency;
    worst = std::max(worst, t);
  }
  return worst;
}

}  // namespace fedcod
