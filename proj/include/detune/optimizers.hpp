#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detune/error.hpp"
#include "detune/numerics.hpp"

namespace detune {

enum class OptimizerKind { SGD, RMSProp, Adam, AdamW, RAdam, NAdam };

inline constexpr std::array<OptimizerKind, 6> kAllOptimizers = {
    OptimizerKind::SGD,  OptimizerKind::RMSProp, OptimizerKind::Adam,
    OptimizerKind::AdamW, OptimizerKind::RAdam,  OptimizerKind::NAdam};

inline std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::SGD: return "sgd";
    case OptimizerKind::RMSProp: return "rmsprop";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::AdamW: return "adamw";
    case OptimizerKind::RAdam: return "radam";
    case OptimizerKind::NAdam: return "nadam";
  }
  return "?";
}

inline OptimizerKind parse_optimizer_kind(std::string_view name) {
  for (auto k : kAllOptimizers) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown optimizer: " + std::string(name));
}

/// Hyperparameters shared by all six update rules.
///
/// `momentum` is the first-moment decay: SGD momentum, the RMSProp decay
/// factor, and beta1 for the Adam family. `weight_decay` only enters AdamW.
///
/// By default epsilon sits inside the square root (sqrt(v + eps)), and the
/// RAdam/NAdam rules follow the rectifier and lookahead forms documented on
/// their step functions rather than the original publications. Setting
/// `canonical_epsilon` moves epsilon outside the root (sqrt(v) + eps) for
/// RMSProp, Adam, AdamW and NAdam.
struct OptimizerHyper {
  double lr0 = 0.002373;
  double momentum = 0.937;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0004213;
  bool canonical_epsilon = false;

  void validate() const {
    detail::require(std::isfinite(lr0) && lr0 > 0.0, "hyper: lr0 must be > 0");
    detail::require(momentum >= 0.0 && momentum < 1.0, "hyper: momentum must be in [0, 1)");
    detail::require(beta2 >= 0.0 && beta2 < 1.0, "hyper: beta2 must be in [0, 1)");
    detail::require(std::isfinite(epsilon) && epsilon > 0.0, "hyper: epsilon must be > 0");
    detail::require(std::isfinite(weight_decay) && weight_decay >= 0.0,
                    "hyper: weight_decay must be >= 0");
  }

  friend bool operator==(const OptimizerHyper&, const OptimizerHyper&) = default;
};

/// Per-parameter optimizer memory. m and v start at zero; t counts applied steps.
struct OptimizerState {
  std::uint64_t t = 0;
  std::vector<double> m;
  std::vector<double> v;
  // Bound by the first dispatched step(); direct *_step calls leave it alone.
  std::optional<OptimizerKind> kind;

  OptimizerState() = default;
  explicit OptimizerState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  std::size_t size() const noexcept { return m.size(); }
};

using GradientProvider = std::function<std::vector<double>(std::span<const double>)>;

namespace detail {

inline void check_step_inputs(const OptimizerState& state, std::span<const double> params,
                              std::span<const double> grad, const char* who) {
  if (state.m.size() != params.size() || state.v.size() != params.size() ||
      grad.size() != params.size()) {
    throw InvalidArgument(std::string(who) + ": length mismatch among params (" +
                          std::to_string(params.size()) + "), gradient (" +
                          std::to_string(grad.size()) + ") and state (" +
                          std::to_string(state.m.size()) + ")");
  }
  if (!all_finite(grad)) throw NumericError(std::string(who) + ": non-finite gradient");
}

inline double adaptive_denominator(double v_hat, const OptimizerHyper& h) {
  return h.canonical_epsilon ? std::sqrt(v_hat) + h.epsilon : std::sqrt(v_hat + h.epsilon);
}

// Shared moment recurrences; advances t.
inline void update_moments(OptimizerState& s, std::span<const double> g, double beta1,
                           double beta2) {
  s.t += 1;
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.m[i] = beta1 * s.m[i] + (1.0 - beta1) * g[i];
    s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * g[i] * g[i];
  }
}

inline double bias_correction(double beta, std::uint64_t t) {
  return 1.0 - std::pow(beta, static_cast<double>(t));
}

}  // namespace detail

/// theta <- theta - lr * g. With momentum mu > 0: m <- mu m + g, theta <- theta - lr m.
inline std::span<double> sgd_step(OptimizerState& state, std::span<double> params,
                                  std::span<const double> grad, const OptimizerHyper& h) {
  h.validate();
  detail::check_step_inputs(state, params, grad, "sgd_step");
  state.t += 1;
  if (h.momentum == 0.0) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= h.lr0 * grad[i];
  } else {
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i] = h.momentum * state.m[i] + grad[i];
      params[i] -= h.lr0 * state.m[i];
    }
  }
  return params;
}

/// v <- beta v + (1 - beta) g^2; theta <- theta - lr g / sqrt(v + eps).
/// The decay beta is `h.momentum`.
inline std::span<double> rmsprop_step(OptimizerState& state, std::span<double> params,
                                      std::span<const double> grad, const OptimizerHyper& h) {
  h.validate();
  detail::check_step_inputs(state, params, grad, "rmsprop_step");
  state.t += 1;
  const double beta = h.momentum;
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.v[i] = beta * state.v[i] + (1.0 - beta) * grad[i] * grad[i];
    params[i] -= h.lr0 * grad[i] / detail::adaptive_denominator(state.v[i], h);
  }
  return params;
}

/// Bias-corrected Adam with theta <- theta - lr m_hat / sqrt(v_hat + eps).
inline std::span<double> adam_step(OptimizerState& state, std::span<double> params,
                                   std::span<const double> grad, const OptimizerHyper& h) {
  h.validate();
  detail::check_step_inputs(state, params, grad, "adam_step");
  detail::update_moments(state, grad, h.momentum, h.beta2);
  const double c1 = detail::bias_correction(h.momentum, state.t);
  const double c2 = detail::bias_correction(h.beta2, state.t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] = params[i] - h.lr0 * m_hat / detail::adaptive_denominator(v_hat, h);
  }
  return params;
}

/// Adam followed by decoupled decay: theta <- theta - lr m_hat / sqrt(v_hat + eps) - lambda theta,
/// where the decay uses the pre-step theta.
inline std::span<double> adamw_step(OptimizerState& state, std::span<double> params,
                                    std::span<const double> grad, const OptimizerHyper& h) {
  h.validate();
  detail::check_step_inputs(state, params, grad, "adamw_step");
  detail::update_moments(state, grad, h.momentum, h.beta2);
  const double c1 = detail::bias_correction(h.momentum, state.t);
  const double c2 = detail::bias_correction(h.beta2, state.t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    const double theta = params[i];
    params[i] = theta - h.lr0 * m_hat / detail::adaptive_denominator(v_hat, h) -
                h.weight_decay * theta;
  }
  return params;
}

/// Rectifier R = sqrt((1 - beta2^t) max(1, t - 4/(beta2 - 1)) / beta2^t).
///
/// Note this is not the rectifier of the original RAdam: it grows like
/// 2 sqrt(t) while beta2^t is near 1 and then exponentially once beta2^t
/// decays, so late steps shrink rather than warm up.
inline double radam_rectifier(double beta2, std::uint64_t t) {
  detail::require(beta2 < 1.0, "radam_rectifier: beta2 must be < 1");
  const double td = static_cast<double>(t);
  const double b2t = std::pow(beta2, td);
  const double horizon = std::max(1.0, td - 4.0 / (beta2 - 1.0));
  return std::sqrt((1.0 - b2t) * horizon / b2t);
}

/// Adam moments with the rectifier added under the root:
/// theta <- theta - lr m_hat / sqrt(v_hat + R).
inline std::span<double> radam_step(OptimizerState& state, std::span<double> params,
                                    std::span<const double> grad, const OptimizerHyper& h) {
  h.validate();
  detail::check_step_inputs(state, params, grad, "radam_step");
  detail::update_moments(state, grad, h.momentum, h.beta2);
  const double c1 = detail::bias_correction(h.momentum, state.t);
  const double c2 = detail::bias_correction(h.beta2, state.t);
  const double rect = radam_rectifier(h.beta2, state.t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] = params[i] - h.lr0 * m_hat / std::sqrt(v_hat + rect);
  }
  return params;
}

/// Lookahead Adam. Evaluates g at theta, updates m and v with it, evaluates
/// g~ at theta' = theta - lr m / sqrt(v + eps) (raw moments), then
/// theta <- theta - lr (beta1 g~ + (1 - beta1) g) / sqrt(v_hat + eps).
/// Two gradient evaluations per step.
inline std::span<double> nadam_step(OptimizerState& state, std::span<double> params,
                                    const OptimizerHyper& h, const GradientProvider& provider) {
  h.validate();
  detail::require(static_cast<bool>(provider), "nadam_step: gradient provider required");
  const std::vector<double> g = provider(params);
  detail::check_step_inputs(state, params, g, "nadam_step");
  detail::update_moments(state, g, h.momentum, h.beta2);

  std::vector<double> lookahead(params.begin(), params.end());
  for (std::size_t i = 0; i < params.size(); ++i) {
    lookahead[i] -= h.lr0 * state.m[i] / detail::adaptive_denominator(state.v[i], h);
  }
  if (!all_finite(lookahead)) throw NumericError("nadam_step: non-finite lookahead point");
  const std::vector<double> g_ahead = provider(lookahead);
  if (g_ahead.size() != params.size()) {
    throw InvalidArgument("nadam_step: provider returned wrong length at lookahead point");
  }
  if (!all_finite(g_ahead)) throw NumericError("nadam_step: non-finite lookahead gradient");

  const double c2 = detail::bias_correction(h.beta2, state.t);
  const double b1 = h.momentum;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double v_hat = state.v[i] / c2;
    params[i] -= h.lr0 * (b1 * g_ahead[i] + (1.0 - b1) * g[i]) /
                 detail::adaptive_denominator(v_hat, h);
  }
  return params;
}

namespace detail {

inline void bind_kind(OptimizerState& state, OptimizerKind kind) {
  if (state.kind && *state.kind != kind) {
    throw InvalidArgument("step: optimizer state belongs to " +
                          std::string(to_string(*state.kind)) + ", not " +
                          std::string(to_string(kind)));
  }
  state.kind = kind;
}

}  // namespace detail

/// Dispatch with a precomputed gradient. NAdam needs a provider (see overload).
inline std::span<double> step(OptimizerKind kind, OptimizerState& state, std::span<double> params,
                              std::span<const double> grad, const OptimizerHyper& h) {
  detail::bind_kind(state, kind);
  switch (kind) {
    case OptimizerKind::SGD: return sgd_step(state, params, grad, h);
    case OptimizerKind::RMSProp: return rmsprop_step(state, params, grad, h);
    case OptimizerKind::Adam: return adam_step(state, params, grad, h);
    case OptimizerKind::AdamW: return adamw_step(state, params, grad, h);
    case OptimizerKind::RAdam: return radam_step(state, params, grad, h);
    case OptimizerKind::NAdam:
      throw InvalidArgument("step: nadam requires a gradient provider");
  }
  throw InvalidArgument("step: invalid optimizer kind");
}

/// Dispatch with a gradient provider; single-evaluation rules call it once at theta.
inline std::span<double> step(OptimizerKind kind, OptimizerState& state, std::span<double> params,
                              const OptimizerHyper& h, const GradientProvider& provider) {
  detail::require(static_cast<bool>(provider), "step: gradient provider required");
  if (kind == OptimizerKind::NAdam) {
    detail::bind_kind(state, kind);
    return nadam_step(state, params, h, provider);
  }
  const std::vector<double> g = provider(params);
  return step(kind, state, params, g, h);
}

}  // namespace detune
