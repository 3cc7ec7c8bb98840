#pragma once

// Strict JSON experiment configs: parsing with key-path diagnostics,
// serialization of the parsed form, and a normal form of the raw document.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedcod/error.hpp"
#include "fedcod/sim/experiment.hpp"

namespace fedcod {

using Json = nlohmann::ordered_json;

namespace config_detail {

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}
inline std::string index_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

inline const char* type_name(const Json& j) {
  if (j.is_object()) return "object";
  if (j.is_array()) return "array";
  if (j.is_string()) return "string";
  if (j.is_boolean()) return "boolean";
  if (j.is_number_integer()) return "integer";
  if (j.is_number()) return "number";
  return "null";
}

inline void expect_object(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path, std::string("expected an object, got ") + type_name(j));
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.contains(it.key())) throw ConfigError(join_path(path, it.key()), "unknown key");
}

inline const Json& require(const Json& j, const std::string& path, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(join_path(path, key), "missing required key");
  return *it;
}

inline double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, std::string("expected a number, got ") + type_name(j));
  return j.get<double>();
}

inline std::int64_t integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, std::string("expected an integer, got ") + type_name(j));
  return j.get<std::int64_t>();
}

inline std::string string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, std::string("expected a string, got ") + type_name(j));
  return j.get<std::string>();
}

inline double positive(const Json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0.0)) throw ConfigError(path, "must be positive");
  return v;
}

inline double non_negative(const Json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v >= 0.0)) throw ConfigError(path, "must be non-negative");
  return v;
}

inline double opt_number(const Json& j, const std::string& path, const char* key, double fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : number(*it, join_path(path, key));
}

struct LinkDefaults {
  double var = 0.0;
  double resample_s = 10.0;
  double fault_floor = 0.1;
  double latency_s = 0.0;
};

inline std::vector<TimeInterval> parse_faults(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  std::vector<TimeInterval> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto p = index_path(path, i);
    expect_object(j[i], p, {"start_s", "end_s"});
    TimeInterval f{non_negative(require(j[i], p, "start_s"), join_path(p, "start_s")),
                   non_negative(require(j[i], p, "end_s"), join_path(p, "end_s"))};
    if (!(f.end > f.start)) throw ConfigError(join_path(p, "end_s"), "must exceed start_s");
    out.push_back(f);
  }
  return out;
}

inline std::vector<RoundRange> parse_fault_rounds(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  std::vector<RoundRange> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto p = index_path(path, i);
    expect_object(j[i], p, {"first", "last"});
    const auto first = integer(require(j[i], p, "first"), join_path(p, "first"));
    const auto last = integer(require(j[i], p, "last"), join_path(p, "last"));
    if (first < 1) throw ConfigError(join_path(p, "first"), "rounds are numbered from 1");
    if (last < first) throw ConfigError(join_path(p, "last"), "must not precede first");
    out.push_back({static_cast<std::uint32_t>(first), static_cast<std::uint32_t>(last)});
  }
  return out;
}

inline Topology parse_topology(const Json& j, const std::string& path) {
  expect_object(j, path,
                {"server", "nodes", "links", "link_defaults", "clusters", "coding_cost_s_per_element", "stall_factor"});
  Topology topo;
  std::map<std::string, NodeId> ids;

  const std::string server = string(require(j, path, "server"), join_path(path, "server"));
  const Json& nodes = require(j, path, "nodes");
  const auto npath = join_path(path, "nodes");
  if (!nodes.is_array() || nodes.size() < 2) throw ConfigError(npath, "expected an array of at least two nodes");
  // The server takes id 0; clients follow in listed order.
  std::vector<NodeModel> models;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto p = index_path(npath, i);
    expect_object(nodes[i], p, {"name", "nic_mbps", "train_time"});
    NodeModel m;
    m.name = string(require(nodes[i], p, "name"), join_path(p, "name"));
    if (m.name.empty()) throw ConfigError(join_path(p, "name"), "must not be empty");
    if (auto it = nodes[i].find("nic_mbps"); it != nodes[i].end()) m.nic_cap = positive(*it, join_path(p, "nic_mbps"));
    if (auto it = nodes[i].find("train_time"); it != nodes[i].end()) {
      const auto tp = join_path(p, "train_time");
      expect_object(*it, tp, {"mu", "sigma"});
      m.train_mu = number(require(*it, tp, "mu"), join_path(tp, "mu"));
      m.train_sigma = non_negative(require(*it, tp, "sigma"), join_path(tp, "sigma"));
      m.train_zero = false;
    }
    models.push_back(m);
  }
  bool found = false;
  for (const auto& m : models)
    if (m.name == server) found = true;
  if (!found) throw ConfigError(join_path(path, "server"), "names no node: '" + server + "'");
  for (auto& m : models)
    if (m.name == server) {
      m.id = 0;
      topo.nodes.push_back(m);
    }
  for (auto& m : models)
    if (m.name != server) {
      m.id = static_cast<NodeId>(topo.nodes.size());
      topo.nodes.push_back(m);
    }
  for (std::size_t i = 0; i < topo.nodes.size(); ++i) {
    if (ids.contains(topo.nodes[i].name))
      throw ConfigError(npath, "duplicate node name '" + topo.nodes[i].name + "'");
    ids[topo.nodes[i].name] = topo.nodes[i].id;
  }
  topo.server = 0;

  LinkDefaults defaults;
  if (auto it = j.find("link_defaults"); it != j.end()) {
    const auto dp = join_path(path, "link_defaults");
    expect_object(*it, dp, {"var", "resample_s", "fault_floor", "latency_s"});
    if (auto v = it->find("var"); v != it->end()) defaults.var = non_negative(*v, join_path(dp, "var"));
    if (auto v = it->find("resample_s"); v != it->end()) defaults.resample_s = positive(*v, join_path(dp, "resample_s"));
    if (auto v = it->find("fault_floor"); v != it->end()) defaults.fault_floor = positive(*v, join_path(dp, "fault_floor"));
    if (auto v = it->find("latency_s"); v != it->end()) defaults.latency_s = non_negative(*v, join_path(dp, "latency_s"));
  }

  auto node_id = [&](const Json& v, const std::string& p) {
    const auto name = string(v, p);
    auto it = ids.find(name);
    if (it == ids.end()) throw ConfigError(p, "unknown node '" + name + "'");
    return it->second;
  };

  const Json& links = require(j, path, "links");
  const auto lpath = join_path(path, "links");
  if (!links.is_array()) throw ConfigError(lpath, "expected an array");
  for (std::size_t i = 0; i < links.size(); ++i) {
    const auto p = index_path(lpath, i);
    const Json& lj = links[i];
    expect_object(lj, p,
                  {"src", "dst", "mean_mbps", "var", "resample_s", "faults", "fault_rounds", "fault_floor", "latency_s",
                   "symmetric"});
    LinkModel l;
    l.src = node_id(require(lj, p, "src"), join_path(p, "src"));
    l.dst = node_id(require(lj, p, "dst"), join_path(p, "dst"));
    if (l.src == l.dst) throw ConfigError(join_path(p, "dst"), "a link needs two distinct nodes");
    l.mean_bw = positive(require(lj, p, "mean_mbps"), join_path(p, "mean_mbps"));
    l.var_bw = defaults.var;
    if (auto v = lj.find("var"); v != lj.end()) l.var_bw = non_negative(*v, join_path(p, "var"));
    l.resample_interval = defaults.resample_s;
    if (auto v = lj.find("resample_s"); v != lj.end()) l.resample_interval = positive(*v, join_path(p, "resample_s"));
    if (auto v = lj.find("faults"); v != lj.end()) l.faults = parse_faults(*v, join_path(p, "faults"));
    if (auto v = lj.find("fault_rounds"); v != lj.end()) l.fault_rounds = parse_fault_rounds(*v, join_path(p, "fault_rounds"));
    l.fault_floor = defaults.fault_floor;
    if (auto v = lj.find("fault_floor"); v != lj.end()) l.fault_floor = positive(*v, join_path(p, "fault_floor"));
    l.latency = defaults.latency_s;
    if (auto v = lj.find("latency_s"); v != lj.end()) l.latency = non_negative(*v, join_path(p, "latency_s"));
    bool symmetric = false;
    if (auto v = lj.find("symmetric"); v != lj.end()) {
      if (!v->is_boolean()) throw ConfigError(join_path(p, "symmetric"), "expected a boolean");
      symmetric = v->get<bool>();
    }
    auto put = [&](const LinkModel& link) {
      if (!topo.links.emplace(std::pair{link.src, link.dst}, link).second)
        throw ConfigError(p, "duplicate link " + topo.nodes[link.src].name + " -> " + topo.nodes[link.dst].name);
    };
    put(l);
    if (symmetric) {
      LinkModel back = l;
      std::swap(back.src, back.dst);
      put(back);
    }
  }
  for (const auto& a : topo.nodes)
    for (const auto& b : topo.nodes)
      if (a.id != b.id && !topo.links.contains({a.id, b.id}))
        throw ConfigError(lpath, "missing link " + a.name + " -> " + b.name);

  if (auto it = j.find("clusters"); it != j.end()) {
    const auto cpath = join_path(path, "clusters");
    if (!it->is_array()) throw ConfigError(cpath, "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto p = index_path(cpath, i);
      const Json& cj = (*it)[i];
      expect_object(cj, p, {"name", "members", "center"});
      Cluster c;
      if (auto v = cj.find("name"); v != cj.end()) c.name = string(*v, join_path(p, "name"));
      const Json& members = require(cj, p, "members");
      const auto mp = join_path(p, "members");
      if (!members.is_array()) throw ConfigError(mp, "expected an array");
      if (members.empty()) throw ConfigError(mp, "cluster is empty");
      for (std::size_t m = 0; m < members.size(); ++m) {
        const NodeId id = node_id(members[m], index_path(mp, m));
        if (id == topo.server) throw ConfigError(index_path(mp, m), "the server cannot join a cluster");
        c.members.push_back(id);
      }
      if (auto v = cj.find("center"); v != cj.end()) c.center = node_id(*v, join_path(p, "center"));
      topo.clusters.push_back(std::move(c));
    }
  }
  if (auto it = j.find("coding_cost_s_per_element"); it != j.end())
    topo.coding_cost = non_negative(*it, join_path(path, "coding_cost_s_per_element"));
  if (auto it = j.find("stall_factor"); it != j.end()) {
    topo.stall_factor = number(*it, join_path(path, "stall_factor"));
    if (!(topo.stall_factor > 1.0)) throw ConfigError(join_path(path, "stall_factor"), "must exceed 1");
  }
  if (!topo.clusters.empty()) {
    try {
      hierfl_route(topo.server, topo.clients(), topo.clusters);
    } catch (const Error& e) {
      throw ConfigError(join_path(path, "clusters"), e.what());
    }
  }
  return topo;
}

inline AgrMode parse_agr_mode(const Json& j, const std::string& path) {
  const auto s = string(j, path);
  if (s == "wait") return AgrMode::Wait;
  if (s == "no-wait") return AgrMode::NoWait;
  throw ConfigError(path, "unknown agr_mode '" + s + "' (expected wait or no-wait)");
}

inline VariantSpec parse_variant_entry(const Json& j, const std::string& path) {
  auto by_name = [&](const Json& v, const std::string& p) {
    const auto name = string(v, p);
    auto parsed = parse_variant(name);
    if (!parsed) throw ConfigError(p, "unknown variant '" + name + "'");
    return VariantSpec::make(*parsed);
  };
  if (j.is_string()) return by_name(j, path);
  expect_object(j, path, {"name", "label", "agr_mode", "agr_window_s", "coefficients"});
  VariantSpec spec = by_name(require(j, path, "name"), join_path(path, "name"));
  const bool agr = spec.upload() == UploadScheme::CodedAgr;
  if (auto v = j.find("label"); v != j.end()) {
    spec.label = string(*v, join_path(path, "label"));
    if (spec.label.empty()) throw ConfigError(join_path(path, "label"), "must not be empty");
  }
  if (auto v = j.find("agr_mode"); v != j.end()) {
    if (!agr) throw ConfigError(join_path(path, "agr_mode"), "only coded-aggregation variants take an agr_mode");
    spec.agr_mode = parse_agr_mode(*v, join_path(path, "agr_mode"));
  }
  if (auto v = j.find("agr_window_s"); v != j.end()) {
    if (!agr) throw ConfigError(join_path(path, "agr_window_s"), "only coded-aggregation variants take a window");
    spec.agr_window = non_negative(*v, join_path(path, "agr_window_s"));
  }
  if (auto v = j.find("coefficients"); v != j.end()) {
    if (!agr) throw ConfigError(join_path(path, "coefficients"), "only coded-aggregation variants take coefficients");
    const auto s = string(*v, join_path(path, "coefficients"));
    if (s == "agreed") spec.coefficients = AgrCoefficients::Agreed;
    else if (s == "cauchy") spec.coefficients = AgrCoefficients::Cauchy;
    else throw ConfigError(join_path(path, "coefficients"), "unknown coefficient set '" + s + "'");
  }
  return spec;
}

inline std::optional<int> opt_count(const Json& j, const std::string& path, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) return std::nullopt;
  const auto v = integer(*it, join_path(path, key));
  if (v < 0) throw ConfigError(join_path(path, key), "must be non-negative");
  return static_cast<int>(v);
}

}  // namespace config_detail

inline ExperimentConfig parse_config(const Json& j) {
  using namespace config_detail;
  expect_object(j, "", {"topology", "variants", "rounds", "model_length", "k", "redundancy", "seed", "output"});
  ExperimentConfig cfg;
  cfg.topology = parse_topology(require(j, "", "topology"), "topology");

  const Json& variants = require(j, "", "variants");
  if (!variants.is_array() || variants.empty()) throw ConfigError("variants", "expected a non-empty array");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    auto spec = parse_variant_entry(variants[i], index_path("variants", i));
    if (!labels.insert(spec.label).second)
      throw ConfigError(index_path("variants", i), "duplicate variant label '" + spec.label + "'");
    if ((spec.download() == DownloadScheme::Hierarchical) && cfg.topology.clusters.empty())
      throw ConfigError(index_path("variants", i), "hierfl needs topology.clusters");
    cfg.variants.push_back(std::move(spec));
  }

  const auto rounds = integer(require(j, "", "rounds"), "rounds");
  if (rounds < 1) throw ConfigError("rounds", "must be at least 1");
  cfg.rounds = static_cast<std::uint32_t>(rounds);

  const auto length = integer(require(j, "", "model_length"), "model_length");
  if (length < 1) throw ConfigError("model_length", "must be at least 1");
  cfg.model_length = static_cast<std::size_t>(length);

  if (auto it = j.find("k"); it != j.end()) {
    if (it->is_string()) {
      if (it->get<std::string>() != "n") throw ConfigError("k", "expected an integer or \"n\"");
    } else {
      const auto k = integer(*it, "k");
      if (k < 1) throw ConfigError("k", "must be at least 1");
      if (k > 4096) throw ConfigError("k", "must not exceed 4096");
      cfg.k = static_cast<std::size_t>(k);
    }
  }

  if (auto it = j.find("redundancy"); it != j.end()) {
    expect_object(*it, "redundancy", {"ratio", "adaptive"});
    if (auto r = it->find("ratio"); r != it->end()) cfg.redundancy_ratio = non_negative(*r, "redundancy.ratio");
    if (auto a = it->find("adaptive"); a != it->end()) {
      const std::string ap = "redundancy.adaptive";
      expect_object(*a, ap, {"r_init", "r_lb", "lambda", "r_max", "window"});
      cfg.adaptive.r_init = opt_count(*a, ap, "r_init");
      cfg.adaptive.r_lb = opt_count(*a, ap, "r_lb");
      cfg.adaptive.r_max = opt_count(*a, ap, "r_max");
      if (auto v = a->find("lambda"); v != a->end()) {
        cfg.adaptive.lambda = number(*v, ap + ".lambda");
        if (!(cfg.adaptive.lambda > 1.0)) throw ConfigError(ap + ".lambda", "must exceed 1");
      }
      if (auto v = opt_count(*a, ap, "window")) {
        if (*v < 1) throw ConfigError(ap + ".window", "must be at least 1");
        cfg.adaptive.window = *v;
      }
      try {
        controller_init(cfg.adaptive.resolve(cfg.resolved_k()));
      } catch (const Error& e) {
        throw ConfigError(ap, e.what());
      }
    }
  }

  const Json& seed = require(j, "", "seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
    throw ConfigError("seed", std::string("expected a non-negative integer, got ") + type_name(seed));
  cfg.seed = seed.get<std::uint64_t>();

  if (auto it = j.find("output"); it != j.end()) cfg.output = string(*it, "output");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Canonical form of a parsed config: every default spelled out, links
/// directed and ordered, variants as objects.
inline Json serialize(const ExperimentConfig& cfg) {
  const auto& topo = cfg.topology;
  Json t;
  t["server"] = topo.node(topo.server).name;
  Json nodes = Json::array();
  for (const auto& n : topo.nodes) {
    Json nj;
    nj["name"] = n.name;
    nj["nic_mbps"] = n.nic_cap;
    if (!n.train_zero) nj["train_time"] = Json{{"mu", n.train_mu}, {"sigma", n.train_sigma}};
    nodes.push_back(nj);
  }
  t["nodes"] = nodes;
  Json links = Json::array();
  for (const auto& [key, l] : topo.links) {
    Json lj;
    lj["src"] = topo.node(l.src).name;
    lj["dst"] = topo.node(l.dst).name;
    lj["mean_mbps"] = l.mean_bw;
    lj["var"] = l.var_bw;
    lj["resample_s"] = l.resample_interval;
    lj["fault_floor"] = l.fault_floor;
    lj["latency_s"] = l.latency;
    Json faults = Json::array();
    for (const auto& f : l.faults) faults.push_back(Json{{"start_s", f.start}, {"end_s", f.end}});
    lj["faults"] = faults;
    Json fr = Json::array();
    for (const auto& f : l.fault_rounds) fr.push_back(Json{{"first", f.first}, {"last", f.last}});
    lj["fault_rounds"] = fr;
    links.push_back(lj);
  }
  t["links"] = links;
  Json clusters = Json::array();
  for (const auto& c : topo.clusters) {
    Json cj;
    cj["name"] = c.name;
    Json members = Json::array();
    for (NodeId m : c.members) members.push_back(topo.node(m).name);
    cj["members"] = members;
    if (c.center) cj["center"] = topo.node(*c.center).name;
    clusters.push_back(cj);
  }
  t["clusters"] = clusters;
  t["coding_cost_s_per_element"] = topo.coding_cost;
  t["stall_factor"] = topo.stall_factor;

  Json variants = Json::array();
  for (const auto& v : cfg.variants) {
    Json vj;
    vj["name"] = std::string(variant_name(v.variant));
    vj["label"] = v.label;
    if (v.upload() == UploadScheme::CodedAgr) {
      vj["agr_mode"] = std::string(agr_mode_name(v.agr_mode));
      vj["agr_window_s"] = v.agr_window;
      vj["coefficients"] = v.coefficients == AgrCoefficients::Cauchy ? "cauchy" : "agreed";
    }
    variants.push_back(vj);
  }

  Json out;
  out["topology"] = t;
  out["variants"] = variants;
  out["rounds"] = cfg.rounds;
  out["model_length"] = cfg.model_length;
  if (cfg.k) out["k"] = *cfg.k;
  else out["k"] = "n";
  Json red;
  red["ratio"] = cfg.redundancy_ratio;
  Json ad;
  if (cfg.adaptive.r_init) ad["r_init"] = *cfg.adaptive.r_init;
  if (cfg.adaptive.r_lb) ad["r_lb"] = *cfg.adaptive.r_lb;
  ad["lambda"] = cfg.adaptive.lambda;
  if (cfg.adaptive.r_max) ad["r_max"] = *cfg.adaptive.r_max;
  ad["window"] = cfg.adaptive.window;
  red["adaptive"] = ad;
  out["redundancy"] = red;
  out["seed"] = cfg.seed;
  out["output"] = cfg.output;
  return out;
}

/// Normal form of a raw config document, computed on the JSON itself:
/// defaults filled in, symmetric links expanded, links ordered by node id.
/// For any accepted document x, serialize(parse_config(x)) == normalize(x).
inline Json normalize(const Json& raw) {
  parse_config(raw);
  const Json& t = raw.at("topology");
  const std::string server = t.at("server").get<std::string>();
  std::vector<Json> nodes;
  for (const auto& n : t.at("nodes"))
    if (n.at("name") == server) nodes.push_back(n);
  for (const auto& n : t.at("nodes"))
    if (n.at("name") != server) nodes.push_back(n);
  std::map<std::string, std::size_t> order;
  Json nt;
  nt["server"] = server;
  Json nn = Json::array();
  for (const auto& n : nodes) {
    order[n.at("name").get<std::string>()] = order.size();
    Json o;
    o["name"] = n.at("name");
    o["nic_mbps"] = n.value("nic_mbps", Json(10000.0));
    if (n.contains("train_time")) o["train_time"] = Json{{"mu", n["train_time"]["mu"]}, {"sigma", n["train_time"]["sigma"]}};
    nn.push_back(o);
  }
  nt["nodes"] = nn;

  const Json defaults = t.value("link_defaults", Json::object());
  std::map<std::pair<std::size_t, std::size_t>, Json> directed;
  for (const auto& l : t.at("links")) {
    Json o;
    o["src"] = l.at("src");
    o["dst"] = l.at("dst");
    o["mean_mbps"] = l.at("mean_mbps");
    o["var"] = l.value("var", defaults.value("var", Json(0.0)));
    o["resample_s"] = l.value("resample_s", defaults.value("resample_s", Json(10.0)));
    o["fault_floor"] = l.value("fault_floor", defaults.value("fault_floor", Json(0.1)));
    o["latency_s"] = l.value("latency_s", defaults.value("latency_s", Json(0.0)));
    o["faults"] = l.value("faults", Json::array());
    o["fault_rounds"] = l.value("fault_rounds", Json::array());
    const auto a = order.at(l.at("src").get<std::string>());
    const auto b = order.at(l.at("dst").get<std::string>());
    directed[{a, b}] = o;
    if (l.value("symmetric", false)) {
      Json back = o;
      back["src"] = o["dst"];
      back["dst"] = o["src"];
      directed[{b, a}] = back;
    }
  }
  Json nl = Json::array();
  for (const auto& [key, l] : directed) nl.push_back(l);
  nt["links"] = nl;
  Json nc = Json::array();
  for (const auto& c : t.value("clusters", Json::array())) {
    Json o;
    o["name"] = c.value("name", Json(""));
    o["members"] = c.at("members");
    if (c.contains("center")) o["center"] = c["center"];
    nc.push_back(o);
  }
  nt["clusters"] = nc;
  nt["coding_cost_s_per_element"] = t.value("coding_cost_s_per_element", Json(0.0));
  nt["stall_factor"] = t.value("stall_factor", Json(10.0));

  Json nv = Json::array();
  for (const auto& v : raw.at("variants")) {
    const Json obj = v.is_string() ? Json{{"name", v}} : v;
    std::string name = obj.at("name").get<std::string>();
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
    Json o;
    o["name"] = name;
    o["label"] = obj.value("label", Json(name));
    const bool agr = name == "u2-agr" || name == "u3-agr" || name == "fedcod" || name == "fedcod-adaptive";
    if (agr) {
      o["agr_mode"] = obj.value("agr_mode", Json(name == "u2-agr" ? "no-wait" : "wait"));
      o["agr_window_s"] = obj.value("agr_window_s", Json(0.0));
      o["coefficients"] = obj.value("coefficients", Json("agreed"));
    }
    nv.push_back(o);
  }

  Json out;
  out["topology"] = nt;
  out["variants"] = nv;
  out["rounds"] = raw.at("rounds");
  out["model_length"] = raw.at("model_length");
  out["k"] = raw.value("k", Json("n"));
  const Json red = raw.value("redundancy", Json::object());
  Json nr;
  nr["ratio"] = red.value("ratio", Json(1.0));
  const Json ad = red.value("adaptive", Json::object());
  Json na;
  if (ad.contains("r_init")) na["r_init"] = ad["r_init"];
  if (ad.contains("r_lb")) na["r_lb"] = ad["r_lb"];
  na["lambda"] = ad.value("lambda", Json(1.1));
  if (ad.contains("r_max")) na["r_max"] = ad["r_max"];
  na["window"] = ad.value("window", Json(5));
  nr["adaptive"] = na;
  out["redundancy"] = nr;
  out["seed"] = raw.at("seed");
  out["output"] = raw.value("output", Json("out"));
  return out;
}

}  // namespace fedcod
