#pragma once

// One synchronous round of any protocol variant on the simulated network.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "fedcod/protocol/aggregation.hpp"
#include "fedcod/protocol/download.hpp"
#include "fedcod/protocol/hierfl.hpp"
#include "fedcod/protocol/upload.hpp"
#include "fedcod/protocol/variant.hpp"
#include "fedcod/sim/metrics.hpp"
#include "fedcod/sim/network.hpp"

namespace fedcod {

inline constexpr double kLosslessTolerance = 1e-4;

struct RoundParams {
  std::uint32_t round = 1;
  std::size_t k = 1;
  int r = 0;
  int r_lb = 0;
  std::uint64_t seed = 0;
  double train_noise = 0.01;  // scale of the synthetic local update
};

struct RoundOutcome {
  RoundMetrics metrics;
  ModelVector aggregate;
};

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return detail::mix(detail::mix(detail::mix(seed, a), b), c);
}

/// Deterministic training time of `client` in `round`.
inline double sample_train_time(const NodeModel& node, std::uint64_t seed, std::uint32_t round) {
  if (node.train_zero) return 0.0;
  Rng rng(stream_seed(seed, 0x7472ULL, round, node.id));
  std::normal_distribution<double> z(0.0, 1.0);
  return std::exp(node.train_mu + node.train_sigma * z(rng));
}

/// Synthetic local training: the global model plus a small deterministic update.
inline ModelVector synthetic_update(const ModelVector& global, NodeId client, std::uint64_t seed, std::uint32_t round,
                                    double scale) {
  Rng rng(stream_seed(seed, 0x6d64ULL, round, client));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ModelVector m = global;
  for (auto& x : m.elements) x = static_cast<float>(static_cast<double>(x) + scale * u(rng));
  return m;
}

inline ModelVector initial_model(std::size_t length, std::uint64_t seed) {
  Rng rng(stream_seed(seed, 0x696eULL, 0, 0));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ModelVector m;
  m.elements.resize(length);
  for (auto& x : m.elements) x = static_cast<float>(u(rng));
  return m;
}

class RoundDriver {
 public:
  RoundDriver(const Topology& topo, const VariantSpec& variant, const RoundParams& params, Network& net,
              const ModelVector& global)
      : topo_(topo), spec_(variant), p_(params), net_(net), global_(global), clients_(topo.clients()) {
    n_ = clients_.size();
    weights_ = AggregationPlan::uniform(n_).weights;
    for (std::size_t i = 0; i < n_; ++i) slot_[clients_[i]] = i;
    if (spec_.download() == DownloadScheme::Hierarchical || spec_.upload() == UploadScheme::Hierarchical)
      routes_ = hierfl_route(topo_.server, clients_, topo_.clusters,
                             [&](NodeId c) { return topo_.link(topo_.server, c).mean_bw; });
    state_.resize(n_);
  }

  RoundOutcome run() {
    const double t0 = net_.now();
    t0_ = t0;
    net_.set_round(p_.round);
    const auto before = net_.snapshot();
    setup();
    net_.set_handlers([this](NodeId s, NodeId d, double now) { return supply(s, d, now); },
                      [this](NodeId s, NodeId d, const Packet& pk, double now) { receive(s, d, pk, now); });
    for (NodeId c : clients_) net_.send_control(topo_.server, c, Packet::control(MsgType::RoundStart, p_.round, topo_.server));
    for (NodeId c : clients_) net_.mark(c);
    net_.mark(topo_.server);

    const std::size_t model_bytes = frame_size_of_model();
    const double cap = t0 + topo_.stall_factor * baseline_expectation(topo_, model_bytes);
    const auto reason = net_.run([this] { return upload_server_->complete(); }, cap);
    if (reason != Network::StopReason::Condition) stalled(reason);
    const double t_end = net_.now();

    net_.cancel_all();
    const std::size_t dropped = net_.drop_timers();
    net_.set_handlers({}, {});

    RoundOutcome out;
    out.aggregate = upload_server_->result();
    auto& m = out.metrics;
    m.round = p_.round;
    m.variant = spec_.label;
    m.k = p_.k;
    m.r = p_.r;
    m.r_lb = p_.r_lb;
    m.start = t0;
    m.counters = counters_;
    m.counters.stale += dropped + upload_server_->stale();
    m.counters.violations += upload_server_->violations();
    m.counters.agr_count_total = upload_server_->total_agr_count();
    m.counters.server_frames = upload_server_->frames_received();
    m.counters.upload_rejected = upload_server_->rejected();
    m.counters.server_blocks_sent = download_server_->total_blocks();

    // Timing.
    double first_upload = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_; ++i) {
      auto& st = state_[i];
      if (!st.upload_done) st.upload_done = t_end;
      first_upload = std::min(first_upload, *st.upload_start);
      ClientRoundMetrics cm;
      cm.client = clients_[i];
      cm.name = topo_.node(clients_[i]).name;
      cm.t_download = *st.download_done - t0;
      cm.t_train = st.train_time;
      cm.t_upload = std::max(0.0, *st.upload_done - *st.upload_start);
      m.clients.push_back(cm);
    }
    double T = 0.0;
    for (const auto& c : m.clients) T = std::max(T, c.total());
    for (auto& c : m.clients) {
      c.t_wait = std::max(0.0, T - c.total());
      m.communication = std::max(m.communication, c.t_download + c.t_upload);
    }
    m.duration = T;
    m.upload_completion = t_end - first_upload;

    // Traffic.
    const auto after = net_.snapshot();
    std::vector<std::uint64_t> in(topo_.size(), 0), eg(topo_.size(), 0);
    for (std::size_t l = 0; l < after.size(); ++l) {
      const auto& a = after[l];
      const std::uint64_t de = a.counters.egress - before[l].counters.egress;
      const std::uint64_t di = a.counters.ingress - before[l].counters.ingress;
      m.counters.aborted += a.counters.aborted - before[l].counters.aborted;
      eg[a.src] += de;
      in[a.dst] += di;
      m.link_egress[{a.src, a.dst}] = de;
      m.link_ingress[{a.src, a.dst}] = di;
      if (a.src != topo_.server && a.dst != topo_.server) m.inter_client_bytes += de;
    }
    m.server_egress = eg[topo_.server];
    m.server_ingress = in[topo_.server];
    for (auto& c : m.clients) {
      c.egress_bytes = eg[c.client];
      c.ingress_bytes = in[c.client];
    }

    // Losslessness of the aggregate.
    std::vector<ModelVector> locals;
    for (auto& st : state_) locals.push_back(std::move(st.local));
    const auto expected = weighted_sum(locals, weights_);
    m.aggregate_error = relative_error(out.aggregate.elements, expected);
    m.download_error = download_error_;
    if (m.aggregate_error > kLosslessTolerance)
      fail(Errc::protocol_violation, "round " + std::to_string(p_.round) + " (" + spec_.label +
                                         "): aggregate deviates by " + std::to_string(m.aggregate_error));
    return out;
  }

 private:
  struct ClientState {
    std::unique_ptr<DownloadClient> download;
    std::unique_ptr<UploadClient> upload;
    std::optional<double> download_done;
    std::optional<double> upload_start;
    std::optional<double> upload_done;
    double train_time = 0.0;
    double decode_free = 0.0;
    double encode_free = 0.0;
    bool download_destination = false;
    ModelVector local;
  };

  std::size_t frame_size_of_model() const { return block_frame_size(1, global_.size()); }

  bool coded_download() const {
    return spec_.download() == DownloadScheme::Coded || spec_.download() == DownloadScheme::NetworkCoded;
  }
  bool coded_upload() const {
    return spec_.upload() == UploadScheme::CodedRelay || spec_.upload() == UploadScheme::CodedAgr;
  }
  std::size_t download_k() const { return coded_download() ? p_.k : 1; }
  std::size_t upload_k() const { return coded_upload() ? p_.k : 1; }
  // Producing or eliminating one coded block touches every element of each
  // partition it combines.
  double block_cost(std::size_t combined) const {
    return topo_.coding_cost * static_cast<double>(partition_length_for(global_.size(), p_.k)) *
           static_cast<double>(combined);
  }
  std::size_t r() const { return static_cast<std::size_t>(std::max(p_.r, 0)); }

  ClientState& st(NodeId c) { return state_[slot_.at(c)]; }
  bool is_client(NodeId id) const { return id != topo_.server; }

  void setup() {
    const auto dl = spec_.download();
    const auto ul = spec_.upload();
    std::vector<NodeId> destinations;
    for (std::size_t i = 0; i < n_; ++i) {
      const NodeId c = clients_[i];
      auto& s = state_[i];
      s.decode_free = t0_;
      s.encode_free = t0_;
      DownloadClientConfig dc;
      dc.self = c;
      dc.server = topo_.server;
      dc.round = p_.round;
      dc.k = download_k();
      dc.original_length = global_.size();
      dc.scheme = dl == DownloadScheme::Hierarchical ? DownloadScheme::Direct : dl;
      dc.server_budget = coded_download() ? p_.k + r() : 1;
      dc.seed = stream_seed(p_.seed, 0x646cULL, p_.round, c);
      s.download_destination = true;
      if (dl == DownloadScheme::Coded || dl == DownloadScheme::NetworkCoded) {
        dc.forwards = dl == DownloadScheme::Coded;
        for (NodeId o : clients_)
          if (o != c) dc.neighbors.push_back(o);
      } else if (dl == DownloadScheme::Hierarchical) {
        const auto& route = routes_->at(c);
        s.download_destination = route.center;
        if (route.center) {
          dc.forwards = true;
          dc.neighbors = route.members;
        }
      }
      if (s.download_destination) destinations.push_back(c);
      s.download = std::make_unique<DownloadClient>(dc);

      UploadClientConfig uc;
      uc.self = c;
      uc.server = topo_.server;
      uc.round = p_.round;
      uc.k = upload_k();
      uc.scheme = ul;
      uc.mode = spec_.agr_mode;
      uc.window = spec_.agr_window;
      uc.coefficients = spec_.coefficients;
      uc.weight = weights_[i];
      uc.seed = stream_seed(p_.seed, 0x756cULL, p_.round, c);
      switch (ul) {
        case UploadScheme::Direct: uc.plan = upload_plan(c, clients_, topo_.server, 1, 0, ul); break;
        case UploadScheme::Hierarchical: {
          uc.plan = hierfl_upload_plan(c, *routes_);
          uc.mode = AgrMode::Wait;
          const auto& route = routes_->at(c);
          uc.contributors = route.center ? route.members.size() + 1 : 1;
          break;
        }
        case UploadScheme::CodedRelay:
          uc.plan = upload_plan(c, clients_, topo_.server, p_.k, static_cast<long>(r()), ul);
          break;
        case UploadScheme::CodedAgr:
          uc.plan = upload_plan(c, clients_, topo_.server, p_.k, static_cast<long>(r()), ul);
          uc.contributors = n_;
          break;
      }
      s.upload = std::make_unique<UploadClient>(uc);
    }

    DownloadServerConfig ds;
    ds.round = p_.round;
    ds.k = download_k();
    ds.scheme = dl == DownloadScheme::Hierarchical ? DownloadScheme::Direct : dl;
    ds.budget = coded_download() ? p_.k + r() : 1;
    ds.server = topo_.server;
    ds.seed = stream_seed(p_.seed, 0x6473ULL, p_.round, 0);
    download_server_ = std::make_unique<DownloadServer>(global_, ds, destinations);
    server_encode_free_ = t0_;
    server_decode_free_ = t0_;

    UploadServerConfig us;
    us.server = topo_.server;
    us.round = p_.round;
    us.k = upload_k();
    us.redundancy = ul == UploadScheme::CodedAgr ? r() : 0;
    us.original_length = global_.size();
    us.scheme = ul;
    us.coefficients = spec_.coefficients;
    us.clients = clients_;
    us.weights = weights_;
    us.blocks_per_client = ul == UploadScheme::CodedRelay ? p_.k + r() : upload_k();
    upload_server_ = std::make_unique<UploadServer>(us);
  }

  bool is_download_block(const BlockPtr& b) const {
    return b->origin == topo_.server || spec_.download() == DownloadScheme::NetworkCoded;
  }

  std::optional<Outgoing> supply(NodeId src, NodeId dst, double now) {
    if (src == topo_.server) {
      if (!is_client(dst)) return std::nullopt;
      auto block = download_server_->next_block(dst);
      if (!block) return std::nullopt;
      double delay = 0.0;
      if (coded_download()) {
        server_encode_free_ = std::max(server_encode_free_, now) + block_cost(p_.k);
        delay = server_encode_free_ - now;
      }
      return Outgoing{Packet::of(std::make_shared<const EncodedBlock>(std::move(*block))), delay};
    }
    auto& s = st(src);
    if (dst == topo_.server) {
      auto b = s.upload->next_for_server();
      if (!b) return std::nullopt;
      return Outgoing{Packet::of(b), upload_encode_delay(src, s, b, now)};
    }
    if (auto f = s.download->next_forward(dst)) {
      ++counters_.forwarded;
      double delay = 0.0;
      if (f->rows_combined > 0) {
        s.encode_free = std::max(s.encode_free, now) + block_cost(f->rows_combined);
        delay = s.encode_free - now;
      }
      return Outgoing{Packet::of(f->block), delay};
    }
    auto b = s.upload->next_for_peer(dst);
    if (!b) return std::nullopt;
    return Outgoing{Packet::of(b), upload_encode_delay(src, s, b, now)};
  }

  double upload_encode_delay(NodeId self, ClientState& s, const BlockPtr& b, double now) {
    if (!coded_upload() || b->origin_kind == OriginKind::Aggregated || b->origin != self) return 0.0;
    s.encode_free = std::max(s.encode_free, now) + block_cost(p_.k);
    return s.encode_free - now;
  }

  void receive(NodeId src, NodeId dst, const Packet& pk, double now) {
    if (pk.round != p_.round) {
      ++counters_.stale;
      return;
    }
    if (pk.type != MsgType::Block) {
      control(src, dst, pk, now);
      return;
    }
    const BlockPtr& b = pk.block;
    if (dst == topo_.server) {
      const double cost = coded_upload() ? block_cost(p_.k) : 0.0;
      if (cost > 0.0) {
        server_decode_free_ = std::max(server_decode_free_, now) + cost;
        net_.at(server_decode_free_, topo_.server, [this, b, src](double t) { server_receive(b, src, t); });
      } else {
        server_receive(b, src, now);
      }
      return;
    }
    auto& s = st(dst);
    if (is_download_block(b)) {
      const double cost = coded_download() ? block_cost(p_.k) : 0.0;
      if (cost > 0.0) {
        s.decode_free = std::max(s.decode_free, now) + cost;
        net_.at(s.decode_free, dst, [this, b, src, dst](double t) { client_download(dst, src, b, t); });
      } else {
        client_download(dst, src, b, now);
      }
      return;
    }
    const auto receipt = s.upload->receive(b, src, now);
    if (receipt.violation) ++counters_.violations;
    if (receipt.stale) ++counters_.stale;
    arm_window(dst);
  }

  void arm_window(NodeId c) {
    auto& s = st(c);
    if (auto deadline = s.upload->next_deadline()) {
      net_.at(*deadline, c, [this, c](double t) {
        st(c).upload->on_timer(t);
        arm_window(c);
      });
    }
  }

  void control(NodeId src, NodeId dst, const Packet& pk, double) {
    switch (pk.type) {
      case MsgType::DecodeAck:
        download_server_->on_decode_ack(src);
        net_.cancel(topo_.server, src, [](const Packet&) { return true; });
        break;
      case MsgType::DownloadComplete:
        st(dst).download->on_neighbor_complete(src);
        net_.cancel(dst, src, [this](const Packet& p) { return p.block && is_download_block(p.block); });
        break;
      case MsgType::UploadComplete:
        st(dst).upload->on_upload_complete(pk.origin);
        if (pk.origin != topo_.server)
          net_.cancel(dst, topo_.server, [o = pk.origin](const Packet& p) {
            return p.block && p.block->origin == o && p.block->origin_kind != OriginKind::Aggregated;
          });
        break;
      default: break;
    }
  }

  void client_download(NodeId c, NodeId from, const BlockPtr& b, double now) {
    auto& s = st(c);
    const auto receipt = s.download->receive(b, from);
    if (receipt.stale) ++counters_.stale;
    if (!receipt.completed) return;
    s.download_done = now;
    counters_.download_rejected += s.download->rejected();
    counters_.download_deferred += s.download->deferred();
    if (s.download_destination)
      net_.send_control(c, topo_.server, Packet::control(MsgType::DecodeAck, p_.round, c));
    if (coded_download())
      for (NodeId o : clients_)
        if (o != c) net_.send_control(c, o, Packet::control(MsgType::DownloadComplete, p_.round, c));
    const ModelVector model = s.download->model();
    download_error_ = std::max(download_error_, relative_error(model, global_));
    if (download_error_ > kLosslessTolerance)
      fail(Errc::protocol_violation, "client " + topo_.node(c).name + " decoded a model off by " +
                                         std::to_string(download_error_));
    s.train_time = sample_train_time(topo_.node(c), p_.seed, p_.round);
    s.local = synthetic_update(model, c, p_.seed, p_.round, p_.train_noise);
    net_.at(now + s.train_time, c, [this, c](double t) {
      auto& cs = st(c);
      cs.upload_start = t;
      cs.encode_free = t;
      cs.upload->start(cs.local, t);
      arm_window(c);
    });
  }

  void server_receive(const BlockPtr& b, NodeId from, double now) {
    const auto receipt = upload_server_->receive(b);
    if (spec_.upload() == UploadScheme::Hierarchical && !receipt.violation && !receipt.stale && is_client(from)) {
      // A cluster aggregate arrived: its members are done uploading.
      const auto& route = routes_->at(from);
      if (route.center) {
        st(from).upload_done = now;
        for (NodeId m : route.members) st(m).upload_done = now;
      }
    }
    if (receipt.client_decoded) {
      st(*receipt.client_decoded).upload_done = now;
      if (spec_.upload() == UploadScheme::CodedRelay)
        for (NodeId c : clients_)
          net_.send_control(topo_.server, c, Packet::control(MsgType::UploadComplete, p_.round, *receipt.client_decoded));
    }
    if (receipt.round_complete && spec_.upload() == UploadScheme::CodedAgr)
      for (auto& s : state_) s.upload_done = now;
  }

  [[noreturn]] void stalled(Network::StopReason reason) {
    const NodeId server = topo_.server;
    auto name = [&](NodeId id) { return topo_.node(id).name; };
    const std::string why = reason == Network::StopReason::Deadline ? "exceeded the stall cap" : "has nothing left to send";
    for (std::size_t i = 0; i < n_; ++i)
      if (!state_[i].download_done)
        throw StalledRound(p_.round, name(clients_[i]), name(server) + "->" + name(clients_[i]),
                           "round " + std::to_string(p_.round) + " " + why + ": " + name(clients_[i]) +
                               " has not decoded the global model");
    for (std::size_t i = 0; i < n_; ++i)
      if (!state_[i].upload_start)
        throw StalledRound(p_.round, name(clients_[i]), name(clients_[i]) + "->" + name(server),
                           "round " + std::to_string(p_.round) + " " + why + ": " + name(clients_[i]) +
                               " is still training");
    // The client whose upload link to the server is busiest with undelivered data.
    std::size_t worst = 0;
    std::size_t worst_queue = 0;
    bool found = false;
    for (std::size_t i = 0; i < n_; ++i) {
      const NodeId c = clients_[i];
      const bool pending = !state_[i].upload_done || net_.busy(c, server);
      const std::size_t queue = state_[i].upload->own_queued() + state_[i].upload->other_queued() +
                                (net_.busy(c, server) ? 1 : 0);
      if (pending && (!found || queue > worst_queue)) {
        worst = i;
        worst_queue = queue;
        found = true;
      }
    }
    const NodeId c = clients_[worst];
    throw StalledRound(p_.round, name(c), name(c) + "->" + name(server),
                       "round " + std::to_string(p_.round) + " " + why + ": server still waits on " + name(c));
  }

  const Topology& topo_;
  VariantSpec spec_;
  RoundParams p_;
  Network& net_;
  const ModelVector& global_;
  std::vector<NodeId> clients_;
  std::size_t n_ = 0;
  std::vector<double> weights_;
  std::map<NodeId, std::size_t> slot_;
  std::optional<RoutingTable> routes_;
  std::vector<ClientState> state_;
  std::unique_ptr<DownloadServer> download_server_;
  std::unique_ptr<UploadServer> upload_server_;
  double t0_ = 0.0;
  double server_encode_free_ = 0.0;
  double server_decode_free_ = 0.0;
  RoundCounters counters_;
  double download_error_ = 0.0;
};

inline RoundOutcome run_round(const Topology& topo, const VariantSpec& variant, const RoundParams& params,
                              Network& net, const ModelVector& global) {
  RoundDriver driver(topo, variant, params, net, global);
  return driver.run();
}

}  // namespace fedcod
