#pragma once

// Experiment outputs: the per-round CSV, the summary JSON, and the delta
// report between two summaries.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "fedcod/config.hpp"

namespace fedcod {

inline constexpr const char* kCsvHeader =
    "round,variant,client,t_download,t_train,t_upload,t_wait,ingress_bytes,egress_bytes,r,r_lb";

inline std::string format_seconds(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// One row per client per round, plus a server row with blank timings.
inline std::string metrics_csv(const ExperimentResult& result, const Topology& topo) {
  std::ostringstream out;
  out << kCsvHeader << "\n";
  for (const auto& v : result.variants)
    for (const auto& m : v.rounds) {
      for (const auto& c : m.clients)
        out << m.round << "," << v.variant.label << "," << c.name << "," << format_seconds(c.t_download) << ","
            << format_seconds(c.t_train) << "," << format_seconds(c.t_upload) << "," << format_seconds(c.t_wait) << ","
            << c.ingress_bytes << "," << c.egress_bytes << "," << m.r << "," << m.r_lb << "\n";
      out << m.round << "," << v.variant.label << "," << topo.node(topo.server).name << ",,,,," << m.server_ingress
          << "," << m.server_egress << "," << m.r << "," << m.r_lb << "\n";
    }
  return out.str();
}

/// FNV-1a over the canonical topology, so summaries of different topologies
/// never compare.
inline std::string topology_digest(const ExperimentConfig& cfg) {
  const std::string text = serialize(cfg)["topology"].dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline Json summary_json(const ExperimentResult& result, const ExperimentConfig& cfg) {
  Json out;
  out["topology_digest"] = topology_digest(cfg);
  out["rounds"] = cfg.rounds;
  out["seed"] = cfg.seed;
  out["model_length"] = cfg.model_length;
  out["k"] = cfg.resolved_k();
  Json variants = Json::object();
  for (const auto& v : result.variants) {
    const double rounds = static_cast<double>(v.rounds.size());
    double dl = 0, tr = 0, up = 0, wait = 0, dur = 0, comm = 0;
    double si = 0, se = 0, ci = 0, ce = 0, inter = 0;
    Json counters = Json::object();
    RoundCounters total;
    Json rs = Json::array(), rlbs = Json::array(), times = Json::array();
    for (const auto& m : v.rounds) {
      dl += m.mean(&ClientRoundMetrics::t_download);
      tr += m.mean(&ClientRoundMetrics::t_train);
      up += m.mean(&ClientRoundMetrics::t_upload);
      wait += m.mean(&ClientRoundMetrics::t_wait);
      dur += m.duration;
      comm += m.communication;
      si += static_cast<double>(m.server_ingress);
      se += static_cast<double>(m.server_egress);
      double cin = 0, ceg = 0;
      for (const auto& c : m.clients) {
        cin += static_cast<double>(c.ingress_bytes);
        ceg += static_cast<double>(c.egress_bytes);
      }
      ci += cin / static_cast<double>(m.clients.size());
      ce += ceg / static_cast<double>(m.clients.size());
      inter += static_cast<double>(m.inter_client_bytes);
      total.download_rejected += m.counters.download_rejected;
      total.download_deferred += m.counters.download_deferred;
      total.upload_rejected += m.counters.upload_rejected;
      total.stale += m.counters.stale;
      total.violations += m.counters.violations;
      total.agr_count_total += m.counters.agr_count_total;
      total.server_frames += m.counters.server_frames;
      total.forwarded += m.counters.forwarded;
      total.aborted += m.counters.aborted;
      rs.push_back(m.r);
      rlbs.push_back(m.r_lb);
      times.push_back(m.communication);
    }
    Json vj;
    vj["name"] = std::string(variant_name(v.variant.variant));
    vj["mean_download"] = dl / rounds;
    vj["mean_train"] = tr / rounds;
    vj["mean_upload"] = up / rounds;
    vj["mean_wait"] = wait / rounds;
    vj["mean_round_time"] = dur / rounds;
    vj["mean_communication"] = comm / rounds;
    vj["server_ingress"] = si / rounds;
    vj["server_egress"] = se / rounds;
    vj["client_ingress"] = ci / rounds;
    vj["client_egress"] = ce / rounds;
    vj["inter_client_bytes"] = inter;
    vj["counters"] = Json{{"download_rejected", total.download_rejected},
                          {"download_deferred", total.download_deferred},
                          {"upload_rejected", total.upload_rejected},
                          {"stale", total.stale},
                          {"violations", total.violations},
                          {"agr_count_total", total.agr_count_total},
                          {"server_frames", total.server_frames},
                          {"forwarded", total.forwarded},
                          {"aborted", total.aborted}};
    vj["r"] = rs;
    vj["r_lb"] = rlbs;
    vj["communication_time"] = times;
    variants[v.variant.label] = vj;
  }
  out["variants"] = variants;
  return out;
}

inline constexpr const char* kCompareFields[] = {
    "mean_download", "mean_train",     "mean_upload",    "mean_wait",     "mean_round_time",    "mean_communication",
    "server_ingress", "server_egress", "client_ingress", "client_egress", "inter_client_bytes"};

/// Percentage change from a to b; null when a is zero and b is not.
inline Json percent_delta(double a, double b) {
  if (a == 0.0) return b == 0.0 ? Json(0.0) : Json(nullptr);
  return Json((b - a) / a * 100.0);
}

/// Pairs variants by label; two single-variant summaries pair with each
/// other whatever their labels.
inline Json compare_summaries(const Json& a, const Json& b) {
  auto field = [](const Json& j, const char* key) -> const Json& {
    if (!j.is_object() || !j.contains(key)) fail(Errc::comparison_error, std::string("summary lacks '") + key + "'");
    return j.at(key);
  };
  if (field(a, "topology_digest") != field(b, "topology_digest"))
    fail(Errc::comparison_error, "summaries come from different topologies");
  if (field(a, "rounds") != field(b, "rounds")) fail(Errc::comparison_error, "summaries cover different round counts");
  const Json& va = field(a, "variants");
  const Json& vb = field(b, "variants");
  std::vector<std::pair<std::string, std::string>> pairs;
  for (auto it = va.begin(); it != va.end(); ++it)
    if (vb.contains(it.key())) pairs.emplace_back(it.key(), it.key());
  if (pairs.empty() && va.size() == 1 && vb.size() == 1) pairs.emplace_back(va.begin().key(), vb.begin().key());
  if (pairs.empty()) fail(Errc::comparison_error, "no variant appears in both summaries");
  Json out;
  out["topology_digest"] = a["topology_digest"];
  out["rounds"] = a["rounds"];
  Json deltas = Json::array();
  for (const auto& [la, lb] : pairs) {
    Json d;
    d["a"] = la;
    d["b"] = lb;
    Json pct;
    for (const char* f : kCompareFields)
      pct[f] = percent_delta(field(va.at(la), f).get<double>(), field(vb.at(lb), f).get<double>());
    d["delta_percent"] = pct;
    deltas.push_back(d);
  }
  out["deltas"] = deltas;
  return out;
}

inline Json read_json_file(const std::string& path, Errc code) {
  std::ifstream in(path);
  if (!in) fail(code, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(code, "'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace fedcod
