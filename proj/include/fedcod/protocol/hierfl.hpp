#pragma once

// Two-level aggregation tree: clients grouped into clusters, each with a
// center that talks to the server on the cluster's behalf.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedcod/coding.hpp"
#include "fedcod/protocol/upload.hpp"

namespace fedcod {

struct Cluster {
  std::string name;
  std::vector<NodeId> members;
  std::optional<NodeId> center;  // defaults to the member with the fastest server link
};

struct Route {
  NodeId upstream = 0;  // where uploads go and downloads come from
  bool center = false;
  std::size_t cluster = 0;
  std::vector<NodeId> members;  // centers only, excluding the center itself
};

struct RoutingTable {
  std::map<NodeId, Route> routes;
  std::vector<NodeId> centers;

  const Route& at(NodeId c) const { return routes.at(c); }
  std::size_t server_flows() const noexcept { return centers.size(); }
};

/// `server_rate(c)` ranks candidate centers when a cluster names none.
inline RoutingTable hierfl_route(NodeId server, const std::vector<NodeId>& clients, const std::vector<Cluster>& clusters,
                                 const std::function<double(NodeId)>& server_rate = {}) {
  RoutingTable table;
  std::set<NodeId> known(clients.begin(), clients.end());
  std::set<NodeId> seen;
  for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
    const auto& cl = clusters[ci];
    const std::string label = cl.name.empty() ? "cluster " + std::to_string(ci) : "cluster '" + cl.name + "'";
    if (cl.members.empty()) fail(Errc::invalid_config, label + " is empty");
    for (NodeId m : cl.members) {
      if (!known.contains(m)) fail(Errc::invalid_config, label + " names unknown client " + std::to_string(m));
      if (!seen.insert(m).second) fail(Errc::invalid_config, "client " + std::to_string(m) + " is in two clusters");
    }
    NodeId center = cl.members.front();
    if (cl.center) {
      if (std::find(cl.members.begin(), cl.members.end(), *cl.center) == cl.members.end())
        fail(Errc::invalid_config, label + " center is not a member");
      center = *cl.center;
    } else if (server_rate) {
      double best = -1.0;
      for (NodeId m : cl.members) {
        const double rate = server_rate(m);
        if (rate > best) {
          best = rate;
          center = m;
        }
      }
    }
    table.centers.push_back(center);
    Route& cr = table.routes[center];
    cr.upstream = server;
    cr.center = true;
    cr.cluster = ci;
    for (NodeId m : cl.members) {
      if (m == center) continue;
      cr.members.push_back(m);
      Route& r = table.routes[m];
      r.upstream = center;
      r.cluster = ci;
    }
  }
  for (NodeId c : clients)
    if (!seen.contains(c)) fail(Errc::invalid_config, "client " + std::to_string(c) + " is in no cluster");
  return table;
}

/// Upload plan for one client under the tree: a single whole-model block to
/// its center, or aggregated locally when it is the center.
inline std::vector<UploadTarget> hierfl_upload_plan(NodeId self, const RoutingTable& table) {
  const auto& r = table.at(self);
  return {UploadTarget{r.center ? self : r.upstream, 0}};
}

}  // namespace fedcod
