#pragma once

// Fluid-flow network: each directed link carries one frame at a time, the
// rate of a transmitting frame is min(link bandwidth, fair share of the
// sender's egress cap, fair share of the receiver's ingress cap), and the
// schedule advances from one rate change to the next.

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <vector>

#include "fedcod/protocol/download.hpp"
#include "fedcod/sim/topology.hpp"
#include "fedcod/wire.hpp"

namespace fedcod {

struct Packet {
  MsgType type = MsgType::Block;
  std::uint32_t round = 0;
  NodeId origin = 0;
  BlockPtr block;  // Block frames only
  std::size_t bytes = 0;

  static Packet of(BlockPtr b) {
    Packet p;
    p.type = MsgType::Block;
    p.round = b->round;
    p.origin = b->origin;
    p.bytes = frame_size_of(*b);
    p.block = std::move(b);
    return p;
  }
  static Packet control(MsgType type, std::uint32_t round, NodeId origin) {
    Packet p;
    p.type = type;
    p.round = round;
    p.origin = origin;
    p.bytes = control_frame_size();
    return p;
  }
};

/// A frame handed to an idle link; it starts moving `delay` seconds later
/// (encoding time).
struct Outgoing {
  Packet packet;
  double delay = 0.0;
};

struct LinkCounters {
  std::uint64_t egress = 0;   // charged to the sender
  std::uint64_t ingress = 0;  // charged to the receiver
  std::uint64_t frames = 0;
  std::uint64_t aborted = 0;
};

class Network {
 public:
  using Supplier = std::function<std::optional<Outgoing>(NodeId src, NodeId dst, double now)>;
  using Receiver = std::function<void(NodeId src, NodeId dst, const Packet&, double now)>;
  using Action = std::function<void(double now)>;

  Network(const Topology& topo, std::uint64_t seed) : topo_(topo), seed_(seed) {
    const std::size_t n = topo.size();
    index_.assign(n * n, kNone);
    dirty_.assign(n, true);
    for (NodeId a = 0; a < n; ++a)
      for (NodeId b = 0; b < n; ++b) {
        if (a == b || !topo.has_link(a, b)) continue;
        index_[a * n + b] = links_.size();
        LinkState st;
        st.model = &topo.link(a, b);
        links_.push_back(st);
      }
  }

  void set_handlers(Supplier supply, Receiver receive) {
    supply_ = std::move(supply);
    receive_ = std::move(receive);
  }

  double now() const noexcept { return now_; }
  void set_round(std::uint32_t round) {
    round_ = round;
    for (auto& l : links_) l.valid_to = -1.0;
  }

  double bandwidth(NodeId a, NodeId b, double t) { return bandwidth(links_[link_index(a, b)], t); }

  /// Node state changed; poll its idle outgoing links.
  void mark(NodeId node) { dirty_[node] = true; }

  void at(double t, NodeId node, Action action) {
    timers_.push(Timer{std::max(t, now_), seq_++, node, std::move(action)});
  }

  /// Control frames skip the data queue: they take latency + size / bandwidth.
  void send_control(NodeId src, NodeId dst, Packet packet) {
    auto& l = links_[link_index(src, dst)];
    const double bw = bandwidth(l, now_);
    const double t = now_ + l.model->latency + 8.0 * static_cast<double>(packet.bytes) / (bw * 1e6);
    at(t, dst, [this, src, dst, p = std::move(packet)](double when) { deliver(src, dst, p, when); });
  }

  /// Aborts the frame on src->dst if `match` accepts it; the bits already
  /// sent are charged to both ends. Returns true if a frame was aborted.
  bool cancel(NodeId src, NodeId dst, const std::function<bool(const Packet&)>& match) {
    auto& l = links_[link_index(src, dst)];
    if (!l.busy || !match(l.packet)) return false;
    abort(l);
    mark(src);
    return true;
  }

  /// Aborts every data frame in flight.
  void cancel_all() {
    for (auto& l : links_)
      if (l.busy) abort(l);
  }

  bool busy(NodeId src, NodeId dst) const { return links_[link_index(src, dst)].busy; }

  /// Drops every pending timer (in-flight control frames, pipelines of a
  /// finished round). Returns how many were dropped.
  std::size_t drop_timers() {
    const std::size_t n = timers_.size();
    timers_ = {};
    return n;
  }

  /// Per-link counters in link order, for per-round deltas.
  struct LinkSnapshot {
    NodeId src;
    NodeId dst;
    LinkCounters counters;
  };
  std::vector<LinkSnapshot> snapshot() const {
    std::vector<LinkSnapshot> out;
    out.reserve(links_.size());
    for (const auto& l : links_) out.push_back({l.model->src, l.model->dst, l.counters});
    return out;
  }

  enum class StopReason { Condition, Deadline, Idle };

  /// Advances until `done()` holds, simulated time reaches `deadline`, or
  /// nothing is left to happen.
  StopReason run(const std::function<bool()>& done, double deadline) {
    for (;;) {
      poll();
      if (done()) return StopReason::Condition;
      double next = std::numeric_limits<double>::infinity();
      compute_rates();
      for (const auto& l : links_) {
        if (!l.busy) continue;
        if (l.ready > now_) {
          next = std::min(next, l.ready);
          continue;
        }
        if (l.rate > 0.0) next = std::min(next, now_ + l.remaining / l.rate);
        next = std::min(next, l.valid_to);
      }
      if (!timers_.empty()) next = std::min(next, timers_.top().t);
      if (next == std::numeric_limits<double>::infinity()) return StopReason::Idle;
      if (next > deadline) {
        advance(deadline);
        return StopReason::Deadline;
      }
      advance(next);
      complete_flows();
      while (!timers_.empty() && timers_.top().t <= now_) {
        Timer timer = timers_.top();
        timers_.pop();
        timer.action(now_);
        mark(timer.node);
      }
    }
  }

  const LinkCounters& counters(NodeId a, NodeId b) const { return links_[link_index(a, b)].counters; }

  std::uint64_t egress(NodeId node) const {
    std::uint64_t sum = 0;
    for (NodeId b = 0; b < topo_.size(); ++b)
      if (b != node && topo_.has_link(node, b)) sum += counters(node, b).egress;
    return sum;
  }
  std::uint64_t ingress(NodeId node) const {
    std::uint64_t sum = 0;
    for (NodeId a = 0; a < topo_.size(); ++a)
      if (a != node && topo_.has_link(a, node)) sum += counters(a, node).ingress;
    return sum;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  struct LinkState {
    const LinkModel* model = nullptr;
    bool busy = false;
    Packet packet;
    double ready = 0.0;
    double total = 0.0;      // bits
    double remaining = 0.0;  // bits
    double rate = 0.0;       // bits per second
    double bw = 0.0;         // cached Mbps
    double valid_to = -1.0;  // cache validity
    double valid_from = 0.0;
    LinkCounters counters;
  };

  struct Timer {
    double t;
    std::uint64_t seq;
    NodeId node;
    Action action;
  };
  struct TimerLater {
    bool operator()(const Timer& a, const Timer& b) const {
      return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
  };

  std::size_t link_index(NodeId a, NodeId b) const {
    const std::size_t n = topo_.size();
    if (a >= n || b >= n || index_[a * n + b] == kNone)
      fail(Errc::invalid_config, "no link " + std::to_string(a) + " -> " + std::to_string(b));
    return index_[a * n + b];
  }

  double bandwidth(LinkState& l, double t) {
    if (t >= l.valid_from && t < l.valid_to) return l.bw;
    l.bw = sample_bandwidth(*l.model, t, seed_, round_);
    l.valid_from = t;
    l.valid_to = next_bandwidth_change(*l.model, t);
    return l.bw;
  }

  void poll() {
    if (!supply_) return;
    for (std::size_t i = 0; i < links_.size(); ++i) {
      auto& l = links_[i];
      if (l.busy || !dirty_[l.model->src]) continue;
      auto out = supply_(l.model->src, l.model->dst, now_);
      if (!out) continue;
      l.busy = true;
      l.packet = std::move(out->packet);
      l.ready = now_ + std::max(0.0, out->delay);
      l.total = 8.0 * static_cast<double>(l.packet.bytes);
      l.remaining = l.total;
    }
    std::fill(dirty_.begin(), dirty_.end(), false);
  }

  void compute_rates() {
    const std::size_t n = topo_.size();
    std::vector<int> out(n, 0), in(n, 0);
    for (const auto& l : links_)
      if (l.busy && l.ready <= now_) {
        ++out[l.model->src];
        ++in[l.model->dst];
      }
    for (auto& l : links_) {
      l.rate = 0.0;
      if (!l.busy || l.ready > now_) continue;
      const double bw = bandwidth(l, now_);
      const double eg = topo_.node(l.model->src).nic_cap / out[l.model->src];
      const double ig = topo_.node(l.model->dst).nic_cap / in[l.model->dst];
      l.rate = std::min({bw, eg, ig}) * 1e6;
    }
  }

  void advance(double t) {
    const double dt = t - now_;
    if (dt > 0.0)
      for (auto& l : links_)
        if (l.busy && l.ready <= now_) l.remaining -= l.rate * dt;
    now_ = std::max(now_, t);
  }

  void complete_flows() {
    for (std::size_t i = 0; i < links_.size(); ++i) {
      auto& l = links_[i];
      if (!l.busy || l.ready > now_) continue;
      if (l.remaining > 1e-9 * l.total + 1e-6) continue;
      l.busy = false;
      const NodeId src = l.model->src;
      const NodeId dst = l.model->dst;
      Packet p = std::move(l.packet);
      l.packet = Packet{};
      mark(src);
      if (l.model->latency > 0.0) {
        at(now_ + l.model->latency, dst, [this, src, dst, p = std::move(p)](double when) { deliver(src, dst, p, when); });
      } else {
        deliver(src, dst, p, now_);
        mark(dst);
      }
    }
  }

  void deliver(NodeId src, NodeId dst, const Packet& p, double when) {
    auto& c = links_[link_index(src, dst)].counters;
    c.egress += p.bytes;
    c.ingress += p.bytes;
    ++c.frames;
    if (receive_) receive_(src, dst, p, when);
  }

  void abort(LinkState& l) {
    if (l.ready <= now_) {
      const auto sent = static_cast<std::uint64_t>(std::max(0.0, l.total - l.remaining) / 8.0);
      l.counters.egress += sent;
      l.counters.ingress += sent;
    }
    ++l.counters.aborted;
    l.busy = false;
    l.packet = Packet{};
  }

  const Topology& topo_;
  std::uint64_t seed_;
  std::uint32_t round_ = 0;
  double now_ = 0.0;
  std::vector<std::size_t> index_;
  std::vector<LinkState> links_;
  std::vector<bool> dirty_;
  std::priority_queue<Timer, std::vector<Timer>, TimerLater> timers_;
  std::uint64_t seq_ = 0;
  Supplier supply_;
  Receiver receive_;
};

/// Completion time of a single transfer of `bytes` on a->b starting at
/// `start` with no competing traffic.
inline double transfer(const Topology& topo, NodeId a, NodeId b, std::size_t bytes, double start,
                       std::uint64_t seed = 0) {
  if (bytes == 0) fail(Errc::invalid_parameter, "transfer needs at least one byte");
  Network net(topo, seed);
  bool sent = false;
  double end = -1.0;
  net.set_handlers(
      [&](NodeId s, NodeId d, double) -> std::optional<Outgoing> {
        if (sent || s != a || d != b) return std::nullopt;
        sent = true;
        Packet p;
        p.bytes = bytes;
        return Outgoing{p, start};
      },
      [&](NodeId, NodeId, const Packet&, double when) { end = when; });
  net.run([&] { return end >= 0.0; }, std::numeric_limits<double>::infinity());
  return end;
}

}  // namespace fedcod
