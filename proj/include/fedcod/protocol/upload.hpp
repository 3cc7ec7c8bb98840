#pragma once

// Upload phase: clients encode their trained models and push blocks to the
// server, either directly, through relay clients, or through Coded-AGR
// aggregators; the server decodes per client or decodes the aggregate.

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "fedcod/coding.hpp"
#include "fedcod/protocol/aggregation.hpp"
#include "fedcod/protocol/download.hpp"
#include "fedcod/protocol/variant.hpp"

namespace fedcod {

struct UploadTarget {
  NodeId destination = 0;  // equal to the sender for local aggregation
  std::uint16_t block_index = 0;

  bool operator==(const UploadTarget&) const = default;
};

/// Destination of each of the k + r blocks of `self`. `clients` lists every
/// client id; the mapping uses their ascending order.
inline std::vector<UploadTarget> upload_plan(NodeId self, std::span<const NodeId> clients, NodeId server,
                                             std::size_t k, long r, UploadScheme scheme) {
  if (r < 0) fail(Errc::invalid_parameter, "redundancy count must be non-negative");
  if (k == 0) fail(Errc::invalid_parameter, "k must be at least 1");
  std::vector<NodeId> sorted(clients.begin(), clients.end());
  std::sort(sorted.begin(), sorted.end());
  const auto pos_it = std::find(sorted.begin(), sorted.end(), self);
  if (pos_it == sorted.end()) fail(Errc::invalid_parameter, "client not in client list");
  const std::size_t n = sorted.size();
  const std::size_t i = static_cast<std::size_t>(pos_it - sorted.begin());
  const std::size_t total = k + static_cast<std::size_t>(r);

  std::vector<UploadTarget> plan;
  plan.reserve(total);
  switch (scheme) {
    case UploadScheme::Direct:
    case UploadScheme::Hierarchical:
      for (std::size_t j = 0; j < k; ++j) plan.push_back({server, static_cast<std::uint16_t>(j)});
      break;
    case UploadScheme::CodedRelay: {
      for (std::size_t j = 0; j < k; ++j) plan.push_back({server, static_cast<std::uint16_t>(j)});
      std::size_t next = (i + 1) % n;
      for (std::size_t j = k; j < total; ++j) {
        if (n == 1) {
          plan.push_back({server, static_cast<std::uint16_t>(j)});
          continue;
        }
        if (next == i) next = (next + 1) % n;
        plan.push_back({sorted[next], static_cast<std::uint16_t>(j)});
        next = (next + 1) % n;
      }
      break;
    }
    case UploadScheme::CodedAgr:
      for (std::size_t j = 0; j < total; ++j) plan.push_back({sorted[j % n], static_cast<std::uint16_t>(j)});
      break;
  }
  return plan;
}

/// The coefficient row every Coded-AGR participant uses for index j.
inline CoefficientVector agr_row(AgrCoefficients kind, std::size_t j, std::size_t k) {
  return kind == AgrCoefficients::Cauchy ? cauchy_coefficients(j, k) : agreed_coefficients(j, k);
}

struct UploadClientConfig {
  NodeId self = 0;
  NodeId server = 0;
  std::uint32_t round = 1;
  std::size_t k = 1;
  UploadScheme scheme = UploadScheme::Direct;
  AgrMode mode = AgrMode::Relay;
  double window = 0.0;  // non-wait release delay, seconds
  AgrCoefficients coefficients = AgrCoefficients::Agreed;
  double weight = 1.0;  // pre-scaling applied before encoding when aggregating in-network
  std::vector<UploadTarget> plan;
  std::size_t contributors = 1;  // contributions that complete one aggregated index
  std::uint64_t seed = 0;
};

struct UploadReceipt {
  bool stale = false;
  bool violation = false;
  bool released = false;
};

class UploadClient {
 public:
  explicit UploadClient(UploadClientConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {}

  bool aggregating() const noexcept {
    return cfg_.scheme == UploadScheme::CodedAgr || cfg_.scheme == UploadScheme::Hierarchical;
  }

  /// Encodes the trained model and queues its blocks according to the plan.
  /// Returns the number of blocks encoded.
  std::size_t start(const ModelVector& model, double now) {
    if (started_) fail(Errc::protocol_violation, "upload already started");
    started_ = true;
    if (done_) return 0;
    const ModelVector input = aggregating() ? scaled(model, cfg_.weight) : model;
    const auto parts = split(input, cfg_.k);
    CoefficientScreen screen(cfg_.k);
    for (const auto& t : cfg_.plan) {
      CoefficientVector coeffs;
      if (cfg_.scheme == UploadScheme::CodedAgr)
        coeffs = agr_row(cfg_.coefficients, t.block_index, cfg_.k);
      else if (cfg_.k == 1)
        coeffs = CoefficientVector({1.0});
      else
        coeffs = screen.draw(rng_);
      auto block = std::make_shared<EncodedBlock>(encode(parts, coeffs));
      block->round = cfg_.round;
      block->origin = cfg_.self;
      block->block_index = t.block_index;
      block->origin_kind = OriginKind::ClientOrigin;
      if (t.destination == cfg_.server)
        own_.push_back(std::move(block));
      else if (t.destination == cfg_.self)
        fold(std::move(block), cfg_.self, now);
      else
        peer_[t.destination].push_back(std::move(block));
    }
    return cfg_.plan.size();
  }

  /// A block from another client.
  UploadReceipt receive(const BlockPtr& block, NodeId from, double now) {
    UploadReceipt receipt;
    if (block->round != cfg_.round) {
      ++stale_;
      receipt.stale = true;
      return receipt;
    }
    if (done_) return receipt;
    if (!aggregating()) {
      other_.push_back(block);
      ++relayed_;
      return receipt;
    }
    if (cfg_.scheme == UploadScheme::CodedAgr &&
        (block->k() != cfg_.k || !(block->coeffs == agr_row(cfg_.coefficients, block->block_index, cfg_.k)))) {
      ++violations_;
      receipt.violation = true;
      return receipt;
    }
    const auto before = released_;
    fold(block, from, now);
    receipt.released = released_ > before;
    return receipt;
  }

  /// Next frame on the link to the server: own blocks strictly first.
  BlockPtr next_for_server() {
    if (done_) return nullptr;
    if (!own_.empty()) {
      auto b = own_.front();
      own_.pop_front();
      return b;
    }
    if (!other_.empty()) {
      auto b = other_.front();
      other_.pop_front();
      return b;
    }
    return nullptr;
  }

  BlockPtr next_for_peer(NodeId peer) {
    if (done_) return nullptr;
    auto it = peer_.find(peer);
    if (it == peer_.end() || it->second.empty()) return nullptr;
    auto b = it->second.front();
    it->second.pop_front();
    return b;
  }

  /// Earliest pending non-wait release, if any.
  std::optional<double> next_deadline() const {
    std::optional<double> best;
    for (const auto& [index, slot] : buffer_)
      if (slot.deadline && (!best || *slot.deadline < *best)) best = slot.deadline;
    return best;
  }

  void on_timer(double now) {
    std::vector<std::uint16_t> due;
    for (const auto& [index, slot] : buffer_)
      if (slot.deadline && *slot.deadline <= now) due.push_back(index);
    for (auto index : due) release(index);
  }

  /// The server decoded `origin`'s model (or, when origin is the server, the
  /// whole round); queued blocks that no longer help are dropped.
  void on_upload_complete(NodeId origin) {
    if (origin == cfg_.server) {
      done_ = true;
      own_.clear();
      other_.clear();
      peer_.clear();
      buffer_.clear();
      return;
    }
    auto from_origin = [origin](const BlockPtr& b) { return b->origin == origin; };
    std::erase_if(other_, from_origin);
    if (origin == cfg_.self) {
      own_.clear();
      for (auto& [peer, q] : peer_) q.clear();
    }
  }

  std::size_t own_queued() const noexcept { return own_.size(); }
  std::size_t other_queued() const noexcept { return other_.size(); }
  std::size_t peer_queued(NodeId peer) const {
    auto it = peer_.find(peer);
    return it == peer_.end() ? 0 : it->second.size();
  }
  bool idle() const {
    if (done_) return true;
    if (!own_.empty() || !other_.empty() || !buffer_.empty()) return false;
    return std::all_of(peer_.begin(), peer_.end(), [](const auto& kv) { return kv.second.empty(); });
  }
  bool started() const noexcept { return started_; }
  std::size_t violations() const noexcept { return violations_; }
  std::size_t stale() const noexcept { return stale_; }
  std::size_t released() const noexcept { return released_; }
  std::size_t relayed() const noexcept { return relayed_; }

 private:
  struct Slot {
    std::shared_ptr<EncodedBlock> partial;
    std::set<NodeId> contributors;
    std::optional<double> deadline;
  };

  void fold(const BlockPtr& block, NodeId from, double now) {
    auto [it, fresh] = buffer_.try_emplace(block->block_index);
    auto& slot = it->second;
    if (fresh) {
      slot.partial = std::make_shared<EncodedBlock>(*block);
      slot.partial->origin = cfg_.self;
      slot.partial->origin_kind = OriginKind::Aggregated;
      if (cfg_.mode == AgrMode::NoWait) slot.deadline = now + cfg_.window;
    } else {
      *slot.partial = aggregate_blocks(*slot.partial, *block);
      slot.partial->origin = cfg_.self;
    }
    slot.contributors.insert(from);
    const bool full = slot.partial->agr_count >= cfg_.contributors;
    if (full || (cfg_.mode == AgrMode::NoWait && cfg_.window <= 0.0)) release(block->block_index);
  }

  void release(std::uint16_t index) {
    auto it = buffer_.find(index);
    if (it == buffer_.end()) return;
    other_.push_back(std::move(it->second.partial));
    buffer_.erase(it);
    ++released_;
  }

  UploadClientConfig cfg_;
  Rng rng_;
  bool started_ = false;
  bool done_ = false;
  std::deque<BlockPtr> own_;
  std::deque<BlockPtr> other_;
  std::map<NodeId, std::deque<BlockPtr>> peer_;
  std::map<std::uint16_t, Slot> buffer_;
  std::size_t violations_ = 0;
  std::size_t stale_ = 0;
  std::size_t released_ = 0;
  std::size_t relayed_ = 0;
};

struct UploadServerConfig {
  NodeId server = 0;
  std::uint32_t round = 1;
  std::size_t k = 1;
  std::size_t redundancy = 0;  // r, for the aggregated schemes
  std::size_t original_length = 0;
  UploadScheme scheme = UploadScheme::Direct;
  AgrCoefficients coefficients = AgrCoefficients::Agreed;
  std::vector<NodeId> clients;
  std::vector<double> weights;  // aligned with clients; used when decoding per client
  std::size_t blocks_per_client = 1;  // k + r for the per-client schemes
};

struct ServerReceipt {
  OfferResult offer = OfferResult::RedundantRejected;
  bool stale = false;
  bool violation = false;
  std::optional<NodeId> client_decoded;  // per-client schemes
  bool round_complete = false;
};

class UploadServer {
 public:
  explicit UploadServer(UploadServerConfig cfg) : cfg_(std::move(cfg)), aggregate_(cfg_.k) {
    if (!cfg_.weights.empty() && cfg_.weights.size() != cfg_.clients.size())
      fail(Errc::invalid_parameter, "one weight per client required");
    if (cfg_.weights.empty()) cfg_.weights = AggregationPlan::uniform(cfg_.clients.size()).weights;
    if (!aggregated())
      for (NodeId c : cfg_.clients) per_client_.emplace(c, ClientState(cfg_.k));
  }

  bool aggregated() const noexcept {
    return cfg_.scheme == UploadScheme::CodedAgr || cfg_.scheme == UploadScheme::Hierarchical;
  }

  ServerReceipt receive(const BlockPtr& block) {
    ServerReceipt receipt;
    if (block->round != cfg_.round) {
      ++stale_;
      receipt.stale = true;
      return receipt;
    }
    if (complete_) return receipt;
    return aggregated() ? receive_aggregated(block) : receive_direct(block);
  }

  bool complete() const noexcept { return complete_; }

  /// Weighted aggregate of the round.
  ModelVector result() const {
    if (!complete_) fail(Errc::not_decodable, "round not complete");
    if (aggregated()) return aggregate_.finish(cfg_.original_length);
    std::vector<ModelVector> models;
    for (NodeId c : cfg_.clients) models.push_back(per_client_.at(c).decoder.finish(cfg_.original_length));
    const auto sum = weighted_sum(models, cfg_.weights);
    return ModelVector{std::vector<float>(sum.begin(), sum.end())};
  }

  /// Decoded model of one client (per-client schemes only).
  ModelVector client_model(NodeId c) const { return per_client_.at(c).decoder.finish(cfg_.original_length); }

  std::size_t total_agr_count() const noexcept { return agr_total_; }
  std::size_t frames_received() const noexcept { return frames_; }
  std::size_t violations() const noexcept { return violations_; }
  std::size_t stale() const noexcept { return stale_; }
  std::size_t rejected() const noexcept { return rejected_; }
  std::size_t rank() const noexcept { return aggregate_.rank(); }
  std::size_t decoded_clients() const {
    return static_cast<std::size_t>(
        std::count_if(per_client_.begin(), per_client_.end(), [](const auto& kv) { return kv.second.decoder.complete(); }));
  }

 private:
  struct ClientState {
    explicit ClientState(std::size_t k) : decoder(k) {}
    DecoderState decoder;
    std::size_t received = 0;
  };

  ServerReceipt receive_direct(const BlockPtr& block) {
    ServerReceipt receipt;
    auto it = per_client_.find(block->origin);
    if (it == per_client_.end() || block->k() != cfg_.k) {
      ++violations_;
      receipt.violation = true;
      return receipt;
    }
    ++frames_;
    agr_total_ += block->agr_count;
    auto& st = it->second;
    const bool was_complete = st.decoder.complete();
    ++st.received;
    receipt.offer = st.decoder.offer(block);
    if (receipt.offer == OfferResult::RedundantRejected) ++rejected_;
    if (!st.decoder.complete() && st.received >= cfg_.blocks_per_client) st.decoder.relax();
    if (!was_complete && st.decoder.complete()) {
      receipt.client_decoded = block->origin;
      complete_ = std::all_of(per_client_.begin(), per_client_.end(),
                              [](const auto& kv) { return kv.second.decoder.complete(); });
      receipt.round_complete = complete_;
    }
    return receipt;
  }

  ServerReceipt receive_aggregated(const BlockPtr& block) {
    ServerReceipt receipt;
    const std::size_t n = cfg_.clients.size();
    if (block->k() != cfg_.k || block->agr_count > n ||
        (cfg_.scheme == UploadScheme::CodedAgr &&
         !(block->coeffs == agr_row(cfg_.coefficients, block->block_index, cfg_.k)))) {
      ++violations_;
      receipt.violation = true;
      return receipt;
    }
    ++frames_;
    agr_total_ += block->agr_count;
    auto [it, fresh] = partials_.try_emplace(block->block_index);
    if (fresh) {
      it->second = std::make_shared<EncodedBlock>(*block);
    } else {
      if (it->second->agr_count + block->agr_count > n) {
        ++violations_;
        receipt.violation = true;
        return receipt;
      }
      *it->second = aggregate_blocks(*it->second, *block);
    }
    if (it->second->agr_count == n) {
      BlockPtr full = std::move(it->second);
      partials_.erase(it);
      ++full_indices_;
      receipt.offer = aggregate_.offer(full);
      if (receipt.offer == OfferResult::RedundantRejected) ++rejected_;
      if (!aggregate_.complete() && full_indices_ >= cfg_.k + cfg_.redundancy) aggregate_.relax();
      complete_ = aggregate_.complete();
      receipt.round_complete = complete_;
    }
    return receipt;
  }

  UploadServerConfig cfg_;
  std::map<NodeId, ClientState> per_client_;
  DecoderState aggregate_;
  std::map<std::uint16_t, std::shared_ptr<EncodedBlock>> partials_;
  std::size_t full_indices_ = 0;
  bool complete_ = false;
  std::size_t agr_total_ = 0;
  std::size_t frames_ = 0;
  std::size_t violations_ = 0;
  std::size_t stale_ = 0;
  std::size_t rejected_ = 0;
};

}  // namespace fedcod
