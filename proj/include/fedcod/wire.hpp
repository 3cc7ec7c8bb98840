#pragma once

// Big-endian frame layout shared by the simulator's byte accounting and any
// socket transport.
//
//   offset  size  field
//   0       4     magic "FCOD"
//   4       1     version (1)
//   5       1     msg_type
//   6       4     round
//   10      2     origin
//   12      2     block_index
//   14      2     k
//   16      1     flags (bit0 ServerOrigin, bit1 Aggregated)
//   17      2     agr_count
//   19      4     payload_len (bytes)
//   23      8k    coefficients, IEEE-754 binary64 (Block frames only)
//   ...     n     payload, IEEE-754 binary32 scalars
//
// The coefficient count is not stored separately: a Block frame carries
// exactly k coefficients and every other message type carries none.

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedcod/coding.hpp"
#include "fedcod/error.hpp"

namespace fedcod {

enum class MsgType : std::uint8_t {
  Block = 1,
  RoundStart = 2,
  DownloadComplete = 3,
  UploadComplete = 4,
  DecodeAck = 5,
};

inline constexpr std::array<std::uint8_t, 4> kFrameMagic = {'F', 'C', 'O', 'D'};
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 23;

namespace frame_flags {
inline constexpr std::uint8_t kServerOrigin = 0x01;
inline constexpr std::uint8_t kAggregated = 0x02;
inline constexpr std::uint8_t kKnown = kServerOrigin | kAggregated;
}  // namespace frame_flags

struct Frame {
  MsgType msg_type = MsgType::Block;
  std::uint32_t round = 0;
  std::uint16_t origin = 0;
  std::uint16_t block_index = 0;
  std::uint16_t k = 0;
  std::uint8_t flags = 0;
  std::uint16_t agr_count = 0;
  std::vector<double> coefficients;
  std::vector<float> payload;

  bool operator==(const Frame&) const = default;
};

inline std::size_t frame_size(const Frame& f) {
  return kFrameHeaderSize + 8 * f.coefficients.size() + 4 * f.payload.size();
}

/// On-wire size of a Block frame carrying `block`.
inline std::size_t frame_size_of(const EncodedBlock& block) {
  return kFrameHeaderSize + 8 * block.k() + 4 * block.payload.size();
}

inline std::size_t block_frame_size(std::size_t k, std::size_t partition_length) {
  return kFrameHeaderSize + 8 * k + 4 * partition_length;
}

inline constexpr std::size_t control_frame_size() { return kFrameHeaderSize; }

namespace detail {

inline bool known_type(std::uint8_t t) { return t >= 1 && t <= 5; }

template <typename T>
void put_be(std::vector<std::uint8_t>& out, T value) {
  for (int shift = static_cast<int>(sizeof(T) * 8) - 8; shift >= 0; shift -= 8)
    out.push_back(static_cast<std::uint8_t>(value >> shift));
}

template <typename T>
T get_be(std::span<const std::uint8_t> in, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value = static_cast<T>((value << 8) | in[offset + i]);
  return value;
}

}  // namespace detail

inline void validate_frame(const Frame& f) {
  if (!detail::known_type(static_cast<std::uint8_t>(f.msg_type))) fail(Errc::invalid_frame, "unknown msg_type");
  if ((f.flags & ~frame_flags::kKnown) != 0) fail(Errc::invalid_frame, "reserved flag bits set");
  if (f.msg_type == MsgType::Block) {
    if (f.k == 0) fail(Errc::invalid_frame, "block frame with k=0");
    if (f.coefficients.size() != f.k)
      fail(Errc::invalid_frame, "block frame carries " + std::to_string(f.coefficients.size()) +
                                    " coefficients for k=" + std::to_string(f.k));
  } else if (!f.coefficients.empty() || !f.payload.empty()) {
    fail(Errc::invalid_frame, "control frame with coefficients or payload");
  }
  if (f.payload.size() > 0xFFFFFFFFu / 4) fail(Errc::invalid_frame, "payload too large");
}

inline std::vector<std::uint8_t> frame_encode(const Frame& f) {
  validate_frame(f);
  std::vector<std::uint8_t> out;
  out.reserve(frame_size(f));
  for (std::uint8_t b : kFrameMagic) out.push_back(b);
  out.push_back(kFrameVersion);
  out.push_back(static_cast<std::uint8_t>(f.msg_type));
  detail::put_be(out, f.round);
  detail::put_be(out, f.origin);
  detail::put_be(out, f.block_index);
  detail::put_be(out, f.k);
  out.push_back(f.flags);
  detail::put_be(out, f.agr_count);
  detail::put_be(out, static_cast<std::uint32_t>(4 * f.payload.size()));
  for (double c : f.coefficients) detail::put_be(out, std::bit_cast<std::uint64_t>(c));
  for (float v : f.payload) detail::put_be(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

/// Total frame length announced by a header, once at least the header is
/// available. Lets a stream reader know how many bytes to wait for.
inline std::optional<std::size_t> peek_frame_size(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize) return std::nullopt;
  const auto type = static_cast<MsgType>(bytes[5]);
  const std::size_t k = detail::get_be<std::uint16_t>(bytes, 14);
  const std::size_t payload_len = detail::get_be<std::uint32_t>(bytes, 19);
  return kFrameHeaderSize + (type == MsgType::Block ? 8 * k : 0) + payload_len;
}

inline Frame frame_decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize)
    fail(Errc::incomplete_frame, "need " + std::to_string(kFrameHeaderSize) + " header bytes, have " +
                                     std::to_string(bytes.size()));
  if (!std::equal(kFrameMagic.begin(), kFrameMagic.end(), bytes.begin())) fail(Errc::unsupported_frame, "bad magic");
  if (bytes[4] != kFrameVersion) fail(Errc::unsupported_frame, "version " + std::to_string(bytes[4]));
  if (!detail::known_type(bytes[5])) fail(Errc::unsupported_frame, "msg_type " + std::to_string(bytes[5]));

  Frame f;
  f.msg_type = static_cast<MsgType>(bytes[5]);
  f.round = detail::get_be<std::uint32_t>(bytes, 6);
  f.origin = detail::get_be<std::uint16_t>(bytes, 10);
  f.block_index = detail::get_be<std::uint16_t>(bytes, 12);
  f.k = detail::get_be<std::uint16_t>(bytes, 14);
  f.flags = bytes[16];
  f.agr_count = detail::get_be<std::uint16_t>(bytes, 17);
  const std::uint32_t payload_len = detail::get_be<std::uint32_t>(bytes, 19);

  if ((f.flags & ~frame_flags::kKnown) != 0) fail(Errc::malformed_frame, "reserved flag bits set");
  if (payload_len % 4 != 0) fail(Errc::malformed_frame, "payload_len not a multiple of 4");
  const bool block = f.msg_type == MsgType::Block;
  if (block && f.k == 0) fail(Errc::malformed_frame, "block frame with k=0");
  if (!block && payload_len != 0) fail(Errc::malformed_frame, "control frame with payload");

  const std::size_t coeff_count = block ? f.k : 0;
  const std::size_t expected = kFrameHeaderSize + 8 * coeff_count + payload_len;
  if (bytes.size() < expected)
    fail(Errc::incomplete_frame, "declared " + std::to_string(expected) + " bytes, have " + std::to_string(bytes.size()));
  if (bytes.size() > expected)
    fail(Errc::malformed_frame, std::to_string(bytes.size() - expected) + " trailing bytes");

  std::size_t offset = kFrameHeaderSize;
  f.coefficients.resize(coeff_count);
  for (auto& c : f.coefficients) {
    c = std::bit_cast<double>(detail::get_be<std::uint64_t>(bytes, offset));
    offset += 8;
  }
  f.payload.resize(payload_len / 4);
  for (auto& v : f.payload) {
    v = std::bit_cast<float>(detail::get_be<std::uint32_t>(bytes, offset));
    offset += 4;
  }
  return f;
}

inline Frame to_frame(const EncodedBlock& block) {
  Frame f;
  f.msg_type = MsgType::Block;
  f.round = block.round;
  f.origin = block.origin;
  f.block_index = block.block_index;
  f.k = static_cast<std::uint16_t>(block.k());
  f.flags = (block.origin_kind == OriginKind::ServerOrigin ? frame_flags::kServerOrigin : 0) |
            (block.origin_kind == OriginKind::Aggregated ? frame_flags::kAggregated : 0);
  f.agr_count = block.agr_count;
  f.coefficients.assign(block.coeffs.values().begin(), block.coeffs.values().end());
  f.payload = block.payload;
  return f;
}

inline EncodedBlock to_block(const Frame& f) {
  if (f.msg_type != MsgType::Block) fail(Errc::invalid_frame, "not a block frame");
  if (f.agr_count == 0) fail(Errc::invalid_frame, "block frame with agr_count=0");
  EncodedBlock b;
  b.round = f.round;
  b.origin = f.origin;
  b.block_index = f.block_index;
  b.coeffs = CoefficientVector(f.coefficients);
  b.payload = f.payload;
  b.agr_count = f.agr_count;
  b.origin_kind = (f.flags & frame_flags::kAggregated)     ? OriginKind::Aggregated
                  : (f.flags & frame_flags::kServerOrigin) ? OriginKind::ServerOrigin
                                                           : OriginKind::ClientOrigin;
  return b;
}

inline Frame control_frame(MsgType type, std::uint32_t round, NodeId origin) {
  Frame f;
  f.msg_type = type;
  f.round = round;
  f.origin = origin;
  return f;
}

}  // namespace fedcod
