#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

namespace fedcod {

enum class Variant { Baseline, HierFL, D1NC, D2C, U1C, U2AGR, U3AGR, FedCod, FedCodAdaptive };

enum class DownloadScheme { Direct, Hierarchical, NetworkCoded, Coded };
enum class UploadScheme { Direct, Hierarchical, CodedRelay, CodedAgr };

/// How a relay client releases aggregated blocks.
enum class AgrMode { Relay, NoWait, Wait };

/// Which agreed coefficient sequence Coded-AGR uses.
enum class AgrCoefficients { Agreed, Cauchy };

inline constexpr std::array<Variant, 9> kAllVariants = {
    Variant::Baseline, Variant::HierFL, Variant::D1NC,   Variant::D2C,           Variant::U1C,
    Variant::U2AGR,    Variant::U3AGR,  Variant::FedCod, Variant::FedCodAdaptive,
};

constexpr std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::HierFL: return "hierfl";
    case Variant::D1NC: return "d1-nc";
    case Variant::D2C: return "d2-c";
    case Variant::U1C: return "u1-c";
    case Variant::U2AGR: return "u2-agr";
    case Variant::U3AGR: return "u3-agr";
    case Variant::FedCod: return "fedcod";
    case Variant::FedCodAdaptive: return "fedcod-adaptive";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (Variant v : kAllVariants)
    if (variant_name(v) == lower) return v;
  return std::nullopt;
}

constexpr std::string_view agr_mode_name(AgrMode m) {
  switch (m) {
    case AgrMode::Relay: return "relay";
    case AgrMode::NoWait: return "no-wait";
    case AgrMode::Wait: return "wait";
  }
  return "?";
}

struct VariantSpec {
  Variant variant = Variant::Baseline;
  AgrMode agr_mode = AgrMode::Relay;
  double agr_window = 0.0;  // seconds, NoWait only
  AgrCoefficients coefficients = AgrCoefficients::Agreed;
  std::string label;

  static VariantSpec make(Variant v) {
    VariantSpec s;
    s.variant = v;
    s.label = std::string(variant_name(v));
    switch (v) {
      case Variant::U1C: s.agr_mode = AgrMode::Relay; break;
      case Variant::U2AGR: s.agr_mode = AgrMode::NoWait; break;
      case Variant::U3AGR:
      case Variant::FedCod:
      case Variant::FedCodAdaptive: s.agr_mode = AgrMode::Wait; break;
      default: break;
    }
    return s;
  }

  DownloadScheme download() const {
    switch (variant) {
      case Variant::HierFL: return DownloadScheme::Hierarchical;
      case Variant::D1NC: return DownloadScheme::NetworkCoded;
      case Variant::D2C:
      case Variant::FedCod:
      case Variant::FedCodAdaptive: return DownloadScheme::Coded;
      default: return DownloadScheme::Direct;
    }
  }

  UploadScheme upload() const {
    switch (variant) {
      case Variant::HierFL: return UploadScheme::Hierarchical;
      case Variant::U1C: return UploadScheme::CodedRelay;
      case Variant::U2AGR:
      case Variant::U3AGR:
      case Variant::FedCod:
      case Variant::FedCodAdaptive: return UploadScheme::CodedAgr;
      default: return UploadScheme::Direct;
    }
  }

  bool adaptive() const { return variant == Variant::FedCodAdaptive; }

  /// Whether redundancy r changes anything for this variant.
  bool uses_redundancy() const {
    return download() == DownloadScheme::Coded || download() == DownloadScheme::NetworkCoded ||
           upload() == UploadScheme::CodedRelay || upload() == UploadScheme::CodedAgr;
  }
};

}  // namespace fedcod
