#pragma once

// Download phase: the server streams distinct coded blocks to every client
// until each acknowledges decoding; clients optionally forward what they get.

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "fedcod/coding.hpp"
#include "fedcod/protocol/variant.hpp"

namespace fedcod {

using BlockPtr = std::shared_ptr<const EncodedBlock>;

struct DownloadServerConfig {
  std::uint32_t round = 1;
  std::size_t k = 1;
  DownloadScheme scheme = DownloadScheme::Direct;
  std::size_t budget = 1;  // blocks per destination per round (k + r for coded schemes)
  NodeId server = 0;
  std::uint64_t seed = 0;
};

class DownloadServer {
 public:
  DownloadServer(const ModelVector& global, DownloadServerConfig cfg, std::span<const NodeId> destinations)
      : cfg_(cfg), rng_(cfg.seed) {
    if (coded()) {
      if (cfg_.budget < cfg_.k) fail(Errc::invalid_parameter, "download budget below k");
      parts_ = split(global, cfg_.k);
    } else {
      parts_ = split(global, 1);
    }
    for (NodeId d : destinations) dests_.emplace(d, Destination(coded() ? cfg_.k : 1));
  }

  bool coded() const noexcept {
    return cfg_.scheme == DownloadScheme::Coded || cfg_.scheme == DownloadScheme::NetworkCoded;
  }

  std::size_t partition_length() const noexcept { return parts_.partition_length(); }
  std::size_t block_k() const noexcept { return parts_.k(); }

  /// Next block owed to `dest`, or nothing once it acknowledged decoding or
  /// its budget is spent.
  std::optional<EncodedBlock> next_block(NodeId dest) {
    auto it = dests_.find(dest);
    if (it == dests_.end()) return std::nullopt;
    auto& d = it->second;
    const std::size_t limit = coded() ? cfg_.budget : 1;
    if (d.acked || d.served >= limit) return std::nullopt;

    CoefficientVector coeffs;
    if (coded()) {
      coeffs = d.screen.draw(rng_);
    } else {
      coeffs = CoefficientVector({1.0});
    }
    EncodedBlock block = encode(parts_, coeffs);
    block.round = cfg_.round;
    block.origin = cfg_.server;
    block.block_index = next_index_++;
    block.origin_kind = OriginKind::ServerOrigin;
    ++d.served;
    ++total_;
    return block;
  }

  /// One scheduling pass: the next block for each listed destination.
  std::vector<std::pair<NodeId, EncodedBlock>> step(std::span<const NodeId> destinations) {
    std::vector<std::pair<NodeId, EncodedBlock>> out;
    for (NodeId d : destinations)
      if (auto b = next_block(d)) out.emplace_back(d, std::move(*b));
    return out;
  }

  void on_decode_ack(NodeId dest) {
    if (auto it = dests_.find(dest); it != dests_.end()) it->second.acked = true;
  }

  bool acked(NodeId dest) const {
    auto it = dests_.find(dest);
    return it != dests_.end() && it->second.acked;
  }
  std::size_t served(NodeId dest) const {
    auto it = dests_.find(dest);
    return it == dests_.end() ? 0 : it->second.served;
  }
  std::size_t total_blocks() const noexcept { return total_; }

 private:
  struct Destination {
    explicit Destination(std::size_t k) : screen(k) {}
    std::size_t served = 0;
    bool acked = false;
    CoefficientScreen screen;  // rows already sent to this destination
  };

  DownloadServerConfig cfg_;
  Rng rng_;
  PartitionSet parts_;
  std::map<NodeId, Destination> dests_;
  std::uint16_t next_index_ = 0;
  std::size_t total_ = 0;
};

struct DownloadClientConfig {
  NodeId self = 0;
  NodeId server = 0;
  std::uint32_t round = 1;
  std::size_t k = 1;
  std::size_t original_length = 0;
  DownloadScheme scheme = DownloadScheme::Direct;
  bool forwards = false;             // relays server-origin blocks (D2-C, FedCod, HierFL centers)
  std::vector<NodeId> neighbors;     // forwarding targets
  std::size_t server_budget = 1;     // blocks the server will send at most
  std::uint64_t seed = 0;
};

struct DownloadReceipt {
  OfferResult offer = OfferResult::RedundantRejected;
  std::size_t forwards_queued = 0;
  bool completed = false;  // this block completed the decoder
  bool stale = false;
};

struct ForwardBlock {
  BlockPtr block;
  std::size_t rows_combined = 0;  // rows mixed by re-encoding; 0 for plain forwards
};

class DownloadClient {
 public:
  explicit DownloadClient(DownloadClientConfig cfg)
      : cfg_(std::move(cfg)),
        decoder_(block_k()),
        rng_(cfg_.seed) {
    for (NodeId n : cfg_.neighbors) queues_[n];
  }

  std::size_t block_k() const noexcept {
    return (cfg_.scheme == DownloadScheme::Coded || cfg_.scheme == DownloadScheme::NetworkCoded) ? cfg_.k : 1;
  }

  DownloadReceipt receive(const BlockPtr& block, NodeId from) {
    DownloadReceipt receipt;
    if (block->round != cfg_.round) {
      ++stale_;
      receipt.stale = true;
      return receipt;
    }
    const bool was_complete = decoder_.complete();
    receipt.offer = decoder_.offer(block);
    if (from == cfg_.server) ++from_server_;
    if (was_complete) {
      ++late_;
    } else if (receipt.offer == OfferResult::RedundantRejected) {
      ++rejected_;
    } else if (receipt.offer == OfferResult::Deferred) {
      ++deferred_;
    }
    // Every server row has arrived and rank is still short: stop waiting for
    // better-conditioned rows.
    if (!decoder_.complete() && from_server_ >= cfg_.server_budget && decoder_.deferred() > 0 && decoder_.relax())
      receipt.offer = OfferResult::Complete;
    receipt.completed = !was_complete && decoder_.complete();

    // Network coding re-encodes and forwards on every row that raised the
    // rank, whichever node it came from.
    const bool innovative = receipt.offer == OfferResult::Accepted || receipt.offer == OfferResult::Complete;
    if (cfg_.scheme == DownloadScheme::NetworkCoded) {
      if (innovative || block->origin_kind == OriginKind::ServerOrigin)
        for (auto& [n, q] : queues_)
          if (n != from && !done_.contains(n)) {
            ++q.tokens;
            ++receipt.forwards_queued;
          }
    } else if (block->origin_kind == OriginKind::ServerOrigin) {
      if (cfg_.forwards) {
        auto copy = std::make_shared<EncodedBlock>(*block);
        copy->origin_kind = OriginKind::ClientOrigin;
        BlockPtr fwd = std::move(copy);
        for (auto& [n, q] : queues_)
          if (n != from && !done_.contains(n)) {
            q.blocks.push_back(fwd);
            ++receipt.forwards_queued;
          }
      }
    }
    return receipt;
  }

  /// Next block to hand to `neighbor`, if any.
  std::optional<ForwardBlock> next_forward(NodeId neighbor) {
    auto it = queues_.find(neighbor);
    if (it == queues_.end() || done_.contains(neighbor)) return std::nullopt;
    auto& q = it->second;
    if (!q.blocks.empty()) {
      ForwardBlock f{q.blocks.front(), 0};
      q.blocks.pop_front();
      ++forwarded_;
      return f;
    }
    if (q.tokens > 0 && decoder_.rank() > 0) {
      --q.tokens;
      ++forwarded_;
      return reencode();
    }
    return std::nullopt;
  }

  /// The neighbor finished decoding; drop what is queued for it.
  void on_neighbor_complete(NodeId neighbor) {
    done_.insert(neighbor);
    if (auto it = queues_.find(neighbor); it != queues_.end()) it->second = Queue{};
  }

  bool complete() const noexcept { return decoder_.complete(); }
  std::size_t rank() const noexcept { return decoder_.rank(); }
  ModelVector model() const { return decoder_.finish(cfg_.original_length); }

  std::size_t rejected() const noexcept { return rejected_; }
  std::size_t deferred() const noexcept { return deferred_; }
  std::size_t late() const noexcept { return late_; }
  std::size_t stale() const noexcept { return stale_; }
  std::size_t forwarded() const noexcept { return forwarded_; }
  std::size_t queued_for(NodeId neighbor) const {
    auto it = queues_.find(neighbor);
    return it == queues_.end() ? 0 : it->second.blocks.size() + it->second.tokens;
  }

 private:
  struct Queue {
    std::deque<BlockPtr> blocks;
    std::size_t tokens = 0;
  };

  // Fresh random combination of every row held so far.
  ForwardBlock reencode() {
    const auto& rows = decoder_.accepted();
    const std::size_t k = block_k();
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> mix(rows.size());
    std::vector<double> coeffs(k);
    for (;;) {
      for (auto& m : mix) m = dist(rng_);
      std::fill(coeffs.begin(), coeffs.end(), 0.0);
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < k; ++c) coeffs[c] += mix[r] * rows[r]->coeffs[c];
      if (std::all_of(coeffs.begin(), coeffs.end(), [](double v) { return std::abs(v) >= kMinCoefficient; })) break;
    }
    const std::size_t plen = rows.front()->payload.size();
    std::vector<double> acc(plen, 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& p = rows[r]->payload;
      for (std::size_t m = 0; m < plen; ++m) acc[m] += mix[r] * static_cast<double>(p[m]);
    }
    auto block = std::make_shared<EncodedBlock>();
    block->round = cfg_.round;
    block->origin = cfg_.self;
    block->block_index = reencoded_++;
    block->coeffs = CoefficientVector(std::move(coeffs));
    block->payload.assign(acc.begin(), acc.end());
    block->origin_kind = OriginKind::ClientOrigin;
    return ForwardBlock{std::move(block), rows.size()};
  }

  DownloadClientConfig cfg_;
  DecoderState decoder_;
  Rng rng_;
  std::map<NodeId, Queue> queues_;
  std::set<NodeId> done_;
  std::size_t from_server_ = 0;
  std::size_t rejected_ = 0;
  std::size_t deferred_ = 0;
  std::size_t late_ = 0;
  std::size_t stale_ = 0;
  std::size_t forwarded_ = 0;
  std::uint16_t reencoded_ = 0;
};

}  // namespace fedcod
