#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fedcod {

enum class Errc {
  invalid_parameter,
  not_decodable,
  incompatible_blocks,
  invalid_frame,
  unsupported_frame,
  incomplete_frame,
  malformed_frame,
  protocol_violation,
  invalid_config,
  config_error,
  stalled_round,
  comparison_error,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_parameter: return "invalid-parameter";
    case Errc::not_decodable: return "not-decodable";
    case Errc::incompatible_blocks: return "incompatible-blocks";
    case Errc::invalid_frame: return "invalid-frame";
    case Errc::unsupported_frame: return "unsupported-frame";
    case Errc::incomplete_frame: return "incomplete-frame";
    case Errc::malformed_frame: return "malformed-frame";
    case Errc::protocol_violation: return "protocol-violation";
    case Errc::invalid_config: return "invalid-config";
    case Errc::config_error: return "config-error";
    case Errc::stalled_round: return "stalled-round";
    case Errc::comparison_error: return "comparison-error";
  }
  return "unknown";
}

/// Base exception for every failure reported by the library. The code
/// identifies the failure class; the message carries the details.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Raised by the config loader; `path()` is the JSON key path at fault,
/// e.g. "topology.links[3].mean_mbps".
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(Errc::config_error, (path.empty() ? std::string("<root>") : path) + ": " + what),
        path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// A simulated round exceeded its time cap (or could make no progress).
class StalledRound : public Error {
 public:
  StalledRound(std::uint32_t round, std::string client, std::string link, const std::string& what)
      : Error(Errc::stalled_round, what), round_(round), client_(std::move(client)), link_(std::move(link)) {}

  std::uint32_t round() const noexcept { return round_; }
  const std::string& client() const noexcept { return client_; }
  const std::string& link() const noexcept { return link_; }

 private:
  std::uint32_t round_;
  std::string client_;
  std::string link_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace fedcod
