#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedcod/coding.hpp"

namespace fedcod {

struct ClientRoundMetrics {
  NodeId client = 0;
  std::string name;
  double t_download = 0.0;
  double t_train = 0.0;
  double t_upload = 0.0;
  double t_wait = 0.0;
  std::uint64_t ingress_bytes = 0;
  std::uint64_t egress_bytes = 0;

  double total() const noexcept { return t_download + t_train + t_upload; }
};

struct RoundCounters {
  std::uint64_t download_rejected = 0;  // linearly dependent rows at clients
  std::uint64_t download_deferred = 0;
  std::uint64_t upload_rejected = 0;    // at the server
  std::uint64_t stale = 0;
  std::uint64_t violations = 0;
  std::uint64_t agr_count_total = 0;    // contributions summed into frames the server received
  std::uint64_t server_frames = 0;
  std::uint64_t server_blocks_sent = 0;
  std::uint64_t forwarded = 0;
  std::uint64_t aborted = 0;
};

struct RoundMetrics {
  std::uint32_t round = 0;
  std::string variant;
  std::size_t k = 1;
  int r = 0;
  int r_lb = 0;
  double start = 0.0;
  double duration = 0.0;       // T = max_i T(i)
  double communication = 0.0;  // max_i (T_download + T_upload)
  double upload_completion = 0.0;  // from the first upload start to the server's aggregate
  std::vector<ClientRoundMetrics> clients;
  std::uint64_t server_ingress = 0;
  std::uint64_t server_egress = 0;
  std::uint64_t inter_client_bytes = 0;
  std::map<std::pair<NodeId, NodeId>, std::uint64_t> link_egress;
  std::map<std::pair<NodeId, NodeId>, std::uint64_t> link_ingress;
  RoundCounters counters;
  double download_error = 0.0;   // worst relative error of a client's downloaded model
  double aggregate_error = 0.0;  // relative error of the server aggregate

  double mean(double ClientRoundMetrics::*field) const {
    if (clients.empty()) return 0.0;
    double s = 0.0;
    for (const auto& c : clients) s += c.*field;
    return s / static_cast<double>(clients.size());
  }
};

}  // namespace fedcod
