#pragma once

// Linear coding of model partitions over the reals: splitting, encoding,
// coefficient generation, incremental decoding and coded aggregation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fedcod/error.hpp"

namespace fedcod {

using NodeId = std::uint16_t;
using Rng = std::mt19937_64;

/// Coefficients closer to zero than this are redrawn.
inline constexpr double kMinCoefficient = 1e-6;
/// A row whose largest remaining pivot (after elimination, on a max-norm
/// scaled row) is at or below this value is linearly dependent.
inline constexpr double kPivotThreshold = 1e-9;
/// Independent rows whose orthogonal residual, relative to the row norm, falls
/// below this floor are held back: accepting them would amplify the 32-bit
/// payload rounding past the decode tolerance.
inline constexpr double kConditioningFloor = 0.03;

struct ModelVector {
  std::vector<float> elements;

  std::size_t size() const noexcept { return elements.size(); }
  bool operator==(const ModelVector&) const = default;
};

struct Partition {
  std::size_t index = 1;  // 1-based
  std::vector<float> data;
};

/// The k equal-length partitions of a zero-padded model.
struct PartitionSet {
  std::vector<Partition> partitions;
  std::size_t original_length = 0;

  std::size_t k() const noexcept { return partitions.size(); }
  std::size_t partition_length() const noexcept {
    return partitions.empty() ? 0 : partitions.front().data.size();
  }
};

inline std::size_t partition_length_for(std::size_t model_length, std::size_t k) {
  return (model_length + k - 1) / k;
}

inline PartitionSet split(const ModelVector& model, std::size_t k) {
  if (k == 0) fail(Errc::invalid_parameter, "split: k must be at least 1");
  if (model.size() == 0) fail(Errc::invalid_parameter, "split: empty model");
  const std::size_t plen = partition_length_for(model.size(), k);
  PartitionSet set;
  set.original_length = model.size();
  set.partitions.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    Partition p;
    p.index = j + 1;
    p.data.assign(plen, 0.0f);
    const std::size_t begin = std::min(j * plen, model.size());
    const std::size_t end = std::min(begin + plen, model.size());
    std::copy(model.elements.begin() + static_cast<std::ptrdiff_t>(begin),
              model.elements.begin() + static_cast<std::ptrdiff_t>(end), p.data.begin());
    set.partitions.push_back(std::move(p));
  }
  return set;
}

/// Concatenates partitions and drops the zero padding.
inline ModelVector join(const PartitionSet& set) {
  ModelVector model;
  model.elements.reserve(set.k() * set.partition_length());
  for (const auto& p : set.partitions) model.elements.insert(model.elements.end(), p.data.begin(), p.data.end());
  model.elements.resize(set.original_length);
  return model;
}

class CoefficientVector {
 public:
  CoefficientVector() = default;

  explicit CoefficientVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) fail(Errc::invalid_parameter, "coefficient vector needs k >= 1");
    for (double v : values_) {
      if (!std::isfinite(v) || std::abs(v) < kMinCoefficient)
        fail(Errc::invalid_parameter, "coefficient magnitude below " + std::to_string(kMinCoefficient));
    }
  }

  std::size_t k() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const CoefficientVector&) const = default;

 private:
  std::vector<double> values_;
};

enum class OriginKind : std::uint8_t { ServerOrigin, ClientOrigin, Aggregated };

struct EncodedBlock {
  std::uint32_t round = 0;
  NodeId origin = 0;
  std::uint16_t block_index = 0;
  CoefficientVector coeffs;
  std::vector<float> payload;
  OriginKind origin_kind = OriginKind::ServerOrigin;
  std::uint16_t agr_count = 1;

  std::size_t k() const noexcept { return coeffs.k(); }
};

inline EncodedBlock encode(const PartitionSet& set, const CoefficientVector& coeffs) {
  if (coeffs.k() != set.k())
    fail(Errc::invalid_parameter, "encode: " + std::to_string(coeffs.k()) + " coefficients for " +
                                      std::to_string(set.k()) + " partitions");
  const std::size_t plen = set.partition_length();
  std::vector<double> acc(plen, 0.0);
  for (std::size_t j = 0; j < set.k(); ++j) {
    const double c = coeffs[j];
    const auto& data = set.partitions[j].data;
    if (data.size() != plen) fail(Errc::invalid_parameter, "encode: partitions differ in length");
    for (std::size_t m = 0; m < plen; ++m) acc[m] += c * static_cast<double>(data[m]);
  }
  EncodedBlock block;
  block.coeffs = coeffs;
  block.payload.assign(acc.begin(), acc.end());
  return block;
}

/// Uniform draws on [-1, 1]; draws with magnitude below kMinCoefficient are redrawn.
inline CoefficientVector random_coefficients(std::size_t k, Rng& rng) {
  if (k == 0) fail(Errc::invalid_parameter, "random_coefficients: k must be at least 1");
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> values(k);
  for (auto& v : values) {
    do {
      v = dist(rng);
    } while (std::abs(v) < kMinCoefficient);
  }
  return CoefficientVector(std::move(values));
}

/// Row j of the Cauchy matrix C[j][i] = 1 / (x_j + y_i), x_j = k + j + 0.5, y_i = i.
///
/// Any k rows are invertible in exact arithmetic, but the matrix is
/// Hilbert-like: a k x k block has condition number ~1e5 at k = 4 and ~1e13
/// at k = 8. With 32-bit payloads it only decodes accurately for k <= 3; the
/// Coded-AGR default is agreed_coefficients().
inline CoefficientVector cauchy_coefficients(std::size_t j, std::size_t k) {
  if (k == 0) fail(Errc::invalid_parameter, "cauchy_coefficients: k must be at least 1");
  std::vector<double> values(k);
  const double x = static_cast<double>(k) + static_cast<double>(j) + 0.5;
  for (std::size_t i = 0; i < k; ++i) values[i] = 1.0 / (x + static_cast<double>(i));
  return CoefficientVector(std::move(values));
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Uniform on [-1, 1) from the top 53 bits.
inline double unit_symmetric(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

}  // namespace detail

/// The coefficient sequence every client agrees on for Coded-AGR.
///
/// Rows 0..k-1 form the interlaced Cauchy matrix 1 / (x_j - y_i) with
/// x_j = j + 0.5 and y_i = i, whose condition number stays below pi for any k,
/// so the r = 0 case always decodes within tolerance regardless of arrival
/// order. Redundancy rows j >= k are pseudo-random values on [-1, 1] keyed by
/// (j, k, i). Every node computes bitwise-identical rows.
inline CoefficientVector agreed_coefficients(std::size_t j, std::size_t k) {
  if (k == 0) fail(Errc::invalid_parameter, "agreed_coefficients: k must be at least 1");
  std::vector<double> values(k);
  if (j < k) {
    for (std::size_t i = 0; i < k; ++i)
      values[i] = 1.0 / (static_cast<double>(j) + 0.5 - static_cast<double>(i));
  } else {
    for (std::size_t i = 0; i < k; ++i) {
      std::uint64_t state = detail::splitmix64((static_cast<std::uint64_t>(k) << 40) ^
                                               (static_cast<std::uint64_t>(j) << 20) ^ i);
      double v = detail::unit_symmetric(state);
      while (std::abs(v) < kMinCoefficient) {
        state = detail::splitmix64(state);
        v = detail::unit_symmetric(state);
      }
      values[i] = v;
    }
  }
  return CoefficientVector(std::move(values));
}

/// Sums two same-index blocks that share a coefficient row.
inline EncodedBlock aggregate_blocks(const EncodedBlock& a, const EncodedBlock& b) {
  if (a.block_index != b.block_index)
    fail(Errc::incompatible_blocks, "block index " + std::to_string(a.block_index) + " vs " +
                                        std::to_string(b.block_index));
  if (a.round != b.round) fail(Errc::incompatible_blocks, "blocks from different rounds");
  if (!(a.coeffs == b.coeffs)) fail(Errc::incompatible_blocks, "coefficient rows differ");
  if (a.payload.size() != b.payload.size()) fail(Errc::incompatible_blocks, "payload lengths differ");
  EncodedBlock out = a;
  for (std::size_t m = 0; m < out.payload.size(); ++m) out.payload[m] += b.payload[m];
  out.agr_count = static_cast<std::uint16_t>(a.agr_count + b.agr_count);
  out.origin_kind = OriginKind::Aggregated;
  return out;
}

enum class OfferResult { Accepted, RedundantRejected, Deferred, Complete };

inline const char* to_string(OfferResult r) {
  switch (r) {
    case OfferResult::Accepted: return "Accepted";
    case OfferResult::RedundantRejected: return "RedundantRejected";
    case OfferResult::Deferred: return "Deferred";
    case OfferResult::Complete: return "Complete";
  }
  return "?";
}

/// Inverse of a row-major n x n matrix by Gauss-Jordan elimination with
/// partial pivoting.
inline std::vector<double> invert(std::vector<double> a, std::size_t n) {
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (std::abs(a[piv * n + col]) == 0.0) fail(Errc::not_decodable, "singular coefficient matrix");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(a[piv * n + c], a[col * n + c]);
        std::swap(inv[piv * n + c], inv[col * n + c]);
      }
    }
    const double d = a[col * n + col];
    for (std::size_t c = 0; c < n; ++c) {
      a[col * n + c] /= d;
      inv[col * n + c] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a[r * n + c] -= f * a[col * n + c];
        inv[r * n + c] -= f * inv[col * n + c];
      }
    }
  }
  return inv;
}

/// Incremental decoder for one model (or one aggregate).
///
/// offer() decides rank with Gaussian elimination and partial pivoting on a
/// max-norm scaled copy of the coefficient row. Independent but poorly
/// conditioned rows are held back (Deferred); relax() admits them when the
/// caller knows no better row is coming.
class DecoderState {
 public:
  explicit DecoderState(std::size_t k, double conditioning_floor = kConditioningFloor)
      : k_(k), floor_(conditioning_floor) {
    if (k == 0) fail(Errc::invalid_parameter, "decoder: k must be at least 1");
  }

  std::size_t k() const noexcept { return k_; }
  std::size_t rank() const noexcept { return rows_.size(); }
  bool complete() const noexcept { return rows_.size() == k_; }
  std::size_t deferred() const noexcept { return deferred_.size(); }
  const std::vector<std::shared_ptr<const EncodedBlock>>& accepted() const noexcept { return rows_; }

  OfferResult offer(const EncodedBlock& block) { return offer(std::make_shared<const EncodedBlock>(block)); }

  OfferResult offer(std::shared_ptr<const EncodedBlock> block) {
    if (block->k() != k_)
      fail(Errc::invalid_parameter,
           "decoder expects k=" + std::to_string(k_) + ", block has k=" + std::to_string(block->k()));
    if (complete()) return OfferResult::RedundantRejected;
    auto residual = eliminate(block->coeffs.values());
    if (!residual) return OfferResult::RedundantRejected;
    if (orthogonal_residual(block->coeffs.values()) < floor_) {
      deferred_.push_back(std::move(block));
      return OfferResult::Deferred;
    }
    admit(std::move(block), std::move(*residual));
    return complete() ? OfferResult::Complete : OfferResult::Accepted;
  }

  /// Admits held-back rows that still raise the rank. Returns true when the
  /// decoder is complete afterwards.
  bool relax() {
    auto pending = std::move(deferred_);
    deferred_.clear();
    for (auto& block : pending) {
      if (complete()) break;
      if (auto residual = eliminate(block->coeffs.values())) admit(std::move(block), std::move(*residual));
    }
    return complete();
  }

  ModelVector finish(std::size_t original_length) const {
    if (!complete())
      fail(Errc::not_decodable, "rank " + std::to_string(rank()) + " < k=" + std::to_string(k_));
    const std::size_t plen = rows_.front()->payload.size();
    if (plen * k_ < original_length) fail(Errc::invalid_parameter, "original length exceeds decoded capacity");
    std::vector<double> a(k_ * k_);
    for (std::size_t r = 0; r < k_; ++r) {
      if (rows_[r]->payload.size() != plen) fail(Errc::invalid_parameter, "decoder payload lengths differ");
      for (std::size_t c = 0; c < k_; ++c) a[r * k_ + c] = rows_[r]->coeffs[c];
    }
    // Row r of A holds the coefficients of block r, so M = A * G and G = A^-1 * M.
    const auto inv = invert(std::move(a), k_);
    ModelVector out;
    out.elements.resize(k_ * plen);
    std::vector<double> acc(plen);
    for (std::size_t i = 0; i < k_; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t j = 0; j < k_; ++j) {
        const double f = inv[i * k_ + j];
        const auto& p = rows_[j]->payload;
        for (std::size_t m = 0; m < plen; ++m) acc[m] += f * static_cast<double>(p[m]);
      }
      std::copy(acc.begin(), acc.end(), out.elements.begin() + static_cast<std::ptrdiff_t>(i * plen));
    }
    out.elements.resize(original_length);
    return out;
  }

 private:
  struct EchelonRow {
    std::size_t pivot;
    std::vector<double> values;  // values[pivot] == 1
  };

  std::optional<EchelonRow> eliminate(std::span<const double> coeffs) const {
    std::vector<double> v(coeffs.begin(), coeffs.end());
    double scale = 0.0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) return std::nullopt;
    for (double& x : v) x /= scale;
    for (const auto& row : echelon_) {
      const double f = v[row.pivot];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < k_; ++c) v[c] -= f * row.values[c];
      v[row.pivot] = 0.0;
    }
    std::size_t pivot = 0;
    for (std::size_t c = 1; c < k_; ++c)
      if (std::abs(v[c]) > std::abs(v[pivot])) pivot = c;
    if (std::abs(v[pivot]) <= kPivotThreshold) return std::nullopt;
    const double p = v[pivot];
    for (double& x : v) x /= p;
    v[pivot] = 1.0;
    return EchelonRow{pivot, std::move(v)};
  }

  // Norm of the component orthogonal to the accepted rows, relative to the
  // row norm. Two Gram-Schmidt passes keep the basis orthonormal.
  double orthogonal_residual(std::span<const double> coeffs) const {
    std::vector<double> v(coeffs.begin(), coeffs.end());
    const double norm = std::sqrt(dot(v, v));
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : ortho_) {
        const double d = dot(v, q);
        for (std::size_t c = 0; c < k_; ++c) v[c] -= d * q[c];
      }
    }
    return std::sqrt(dot(v, v)) / norm;
  }

  void admit(std::shared_ptr<const EncodedBlock> block, EchelonRow row) {
    std::vector<double> v(block->coeffs.values().begin(), block->coeffs.values().end());
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : ortho_) {
        const double d = dot(v, q);
        for (std::size_t c = 0; c < k_; ++c) v[c] -= d * q[c];
      }
    }
    const double n = std::sqrt(dot(v, v));
    for (double& x : v) x /= n;
    ortho_.push_back(std::move(v));
    echelon_.push_back(std::move(row));
    rows_.push_back(std::move(block));
  }

  static double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }

  std::size_t k_;
  double floor_;
  std::vector<std::shared_ptr<const EncodedBlock>> rows_;
  std::vector<std::shared_ptr<const EncodedBlock>> deferred_;
  std::vector<EchelonRow> echelon_;
  std::vector<std::vector<double>> ortho_;
};

/// Draws random coefficient rows that a decoder holding the rows drawn so far
/// would accept outright. Once k rows are out, further draws are unscreened.
class CoefficientScreen {
 public:
  explicit CoefficientScreen(std::size_t k) : decoder_(k) {}

  CoefficientVector draw(Rng& rng) {
    constexpr int kAttempts = 64;
    for (int attempt = 0;; ++attempt) {
      auto coeffs = random_coefficients(decoder_.k(), rng);
      if (decoder_.complete()) return coeffs;
      EncodedBlock probe;
      probe.coeffs = coeffs;
      const auto result = decoder_.offer(probe);
      if (result == OfferResult::Accepted || result == OfferResult::Complete || attempt + 1 >= kAttempts)
        return coeffs;
    }
  }

 private:
  DecoderState decoder_;
};

/// Max elementwise error scaled by max(1, max |reference|).
inline double relative_error(std::span<const float> got, std::span<const double> reference) {
  double worst = 0.0;
  double mag = 1.0;
  for (std::size_t i = 0; i < reference.size(); ++i) mag = std::max(mag, std::abs(reference[i]));
  if (got.size() != reference.size()) return std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < got.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(got[i]) - reference[i]));
  return worst / mag;
}

inline double relative_error(const ModelVector& got, const ModelVector& reference) {
  std::vector<double> ref(reference.elements.begin(), reference.elements.end());
  return relative_error(got.elements, ref);
}

}  // namespace fedcod
