#pragma once

// Adaptive redundancy: starts high, sheds one redundant block per stable
// round, doubles on a slowdown and keeps doubling while rounds keep getting
// faster.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>

#include "fedcod/error.hpp"

namespace fedcod {

enum class RedundancyPhase { ColdStart, Steady, Recovering };

inline const char* to_string(RedundancyPhase p) {
  switch (p) {
    case RedundancyPhase::ColdStart: return "cold-start";
    case RedundancyPhase::Steady: return "steady";
    case RedundancyPhase::Recovering: return "recovering";
  }
  return "?";
}

struct ControllerParams {
  std::size_t k = 1;
  int r_init = 1;
  int r_lb_init = 1;
  double lambda = 1.1;
  int r_max = 2;
  int window = 5;  // stable rounds before r_lb decays
  int reduction_step = 1;
  int recovery_factor = 2;
  int lb_decay_step = 1;

  static ControllerParams defaults(std::size_t k) {
    ControllerParams p;
    p.k = k;
    p.r_init = static_cast<int>(k);
    p.r_lb_init = static_cast<int>((k + 3) / 4);
    p.r_max = static_cast<int>(2 * k);
    return p;
  }
};

struct RedundancyState {
  int r = 0;
  int r_lb = 0;
  int r_max = 0;
  std::optional<double> t_last;
  double lambda = 1.1;
  RedundancyPhase phase = RedundancyPhase::ColdStart;
  int stable_rounds = 0;
  int window = 5;
  std::size_t k = 1;
  int reduction_step = 1;
  int recovery_factor = 2;
  int lb_decay_step = 1;

  /// Coding redundancy r / k.
  double ratio() const { return static_cast<double>(r) / static_cast<double>(k); }

  bool operator==(const RedundancyState&) const = default;
};

inline RedundancyState controller_init(const ControllerParams& p) {
  if (p.k == 0) fail(Errc::invalid_config, "controller: k must be at least 1");
  if (!(p.lambda > 1.0)) fail(Errc::invalid_config, "controller: lambda must exceed 1");
  if (p.r_lb_init < 0 || p.r_lb_init > p.r_init)
    fail(Errc::invalid_config, "controller: need 0 <= r_lb (" + std::to_string(p.r_lb_init) + ") <= r (" +
                                   std::to_string(p.r_init) + ")");
  if (p.r_init > p.r_max)
    fail(Errc::invalid_config, "controller: r (" + std::to_string(p.r_init) + ") exceeds r_max (" +
                                   std::to_string(p.r_max) + ")");
  if (p.window < 1) fail(Errc::invalid_config, "controller: stability window must be at least 1");
  if (p.reduction_step < 1 || p.recovery_factor < 2 || p.lb_decay_step < 1)
    fail(Errc::invalid_config, "controller: step sizes must be positive and recovery factor at least 2");
  RedundancyState s;
  s.r = p.r_init;
  s.r_lb = p.r_lb_init;
  s.r_max = p.r_max;
  s.lambda = p.lambda;
  s.window = p.window;
  s.k = p.k;
  s.reduction_step = p.reduction_step;
  s.recovery_factor = p.recovery_factor;
  s.lb_decay_step = p.lb_decay_step;
  return s;
}

inline RedundancyState controller_init(std::size_t k, int r_init, int r_lb_init, double lambda, int r_max,
                                       int window) {
  auto p = ControllerParams::defaults(k);
  p.r_init = r_init;
  p.r_lb_init = r_lb_init;
  p.lambda = lambda;
  p.r_max = r_max;
  p.window = window;
  return controller_init(p);
}

/// Feeds one round's communication time into the controller.
inline RedundancyState controller_update(RedundancyState s, double t_cur) {
  if (!(t_cur > 0.0)) fail(Errc::invalid_parameter, "controller_update: t_cur must be positive");
  if (!s.t_last) {
    s.t_last = t_cur;
    s.phase = RedundancyPhase::Steady;
    return s;
  }
  const double t_last = *s.t_last;
  switch (s.phase) {
    case RedundancyPhase::ColdStart:
    case RedundancyPhase::Steady:
      if (t_cur <= s.lambda * t_last) {
        s.r = std::max(s.r - s.reduction_step, s.r_lb);
        if (++s.stable_rounds >= s.window) {
          s.r_lb = std::max(s.r_lb - s.lb_decay_step, 0);
          s.stable_rounds = 0;
        }
        s.phase = RedundancyPhase::Steady;
      } else {
        s.r = std::min(std::max(s.r * s.recovery_factor, 1), s.r_max);
        s.r_lb = std::min(std::max(s.r_lb * 2, s.r_lb + 1), s.r_max);
        s.r = std::max(s.r, s.r_lb);
        s.phase = RedundancyPhase::Recovering;
        s.stable_rounds = 0;
      }
      break;
    case RedundancyPhase::Recovering:
      if (t_cur < t_last / s.lambda) {
        s.r = std::min(std::max(s.r * s.recovery_factor, 1), s.r_max);
      } else {
        s.phase = RedundancyPhase::Steady;
      }
      break;
  }
  s.t_last = t_cur;
  return s;
}

}  // namespace fedcod
