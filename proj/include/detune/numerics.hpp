#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "detune/error.hpp"

namespace detune {

using ParamVector = std::vector<double>;

struct ObjectiveEval {
  double loss = 0.0;
  std::vector<double> gradient;
};

// Anything with a fixed dimensionality and an analytic (loss, gradient).
template <typename F>
concept DifferentiableObjective = requires(const F& f, std::span<const double> x) {
  { f.dim() } -> std::convertible_to<std::size_t>;
  { f.evaluate(x) } -> std::same_as<ObjectiveEval>;
};

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

template <DifferentiableObjective F>
ObjectiveEval evaluate(const F& objective, std::span<const double> params) {
  if (params.size() != objective.dim()) {
    throw InvalidArgument("evaluate: parameter length " + std::to_string(params.size()) +
                          " does not match objective dimension " +
                          std::to_string(objective.dim()));
  }
  if (!all_finite(params)) throw InvalidArgument("evaluate: non-finite parameter");
  return objective.evaluate(params);
}

/// Central-difference gradient estimate, one coordinate at a time.
/// Test oracle only; training always uses the analytic gradient.
template <DifferentiableObjective F>
std::vector<double> finite_diff_gradient(const F& objective, std::span<const double> params,
                                         double h = 1e-5) {
  detail::require(h > 0.0, "finite_diff_gradient: step must be positive");
  detail::require(params.size() == objective.dim(), "finite_diff_gradient: dimension mismatch");
  std::vector<double> probe(params.begin(), params.end());
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = objective.evaluate(probe).loss;
    probe[i] = orig - h;
    const double down = objective.evaluate(probe).loss;
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_gradient: non-finite evaluation at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// f(x) = 1/2 |x|^2, minimum 0 at the origin.
class QuadraticBowl {
 public:
  explicit QuadraticBowl(std::size_t dim) : dim_(dim) {
    detail::require(dim >= 1, "quadratic: dim must be >= 1");
  }

  std::size_t dim() const noexcept { return dim_; }

  ObjectiveEval evaluate(std::span<const double> x) const {
    ObjectiveEval out{0.0, std::vector<double>(x.begin(), x.end())};
    for (double v : x) out.loss += 0.5 * v * v;
    return out;
  }

  ParamVector minimizer() const { return ParamVector(dim_, 0.0); }

 private:
  std::size_t dim_;
};

// Chained Rosenbrock: sum_i b (x_{i+1} - x_i^2)^2 + (a - x_i)^2, minimum 0 at x = (a, a^2, ...)
// for a = 1 the familiar all-ones point.
class Rosenbrock {
 public:
  Rosenbrock(std::size_t dim, double a = 1.0, double b = 100.0) : dim_(dim), a_(a), b_(b) {
    detail::require(dim >= 2, "rosenbrock: dim must be >= 2");
    detail::require(b > 0.0, "rosenbrock: b must be positive");
  }

  std::size_t dim() const noexcept { return dim_; }

  ObjectiveEval evaluate(std::span<const double> x) const {
    ObjectiveEval out{0.0, std::vector<double>(dim_, 0.0)};
    for (std::size_t i = 0; i + 1 < dim_; ++i) {
      const double r = x[i + 1] - x[i] * x[i];
      const double s = a_ - x[i];
      out.loss += b_ * r * r + s * s;
      out.gradient[i] += -4.0 * b_ * x[i] * r - 2.0 * s;
      out.gradient[i + 1] += 2.0 * b_ * r;
    }
    return out;
  }

  // Closed form exists for dim 2 (any a) and for a = 1 (any dim).
  ParamVector minimizer() const {
    if (dim_ == 2) return {a_, a_ * a_};
    if (a_ != 1.0) throw InvalidArgument("rosenbrock: no closed-form minimizer for a != 1");
    return ParamVector(dim_, 1.0);
  }

 private:
  std::size_t dim_;
  double a_;
  double b_;
};

enum class TestObjectiveKind { Quadratic, Rosenbrock };

inline TestObjectiveKind parse_test_objective_kind(std::string_view name) {
  if (name == "quadratic") return TestObjectiveKind::Quadratic;
  if (name == "rosenbrock") return TestObjectiveKind::Rosenbrock;
  throw InvalidArgument("unsupported test objective kind: " + std::string(name));
}

struct TestObjectiveParams {
  double a = 1.0;
  double b = 100.0;
};

class TestObjective {
 public:
  explicit TestObjective(std::variant<QuadraticBowl, Rosenbrock> impl) : impl_(std::move(impl)) {}

  std::size_t dim() const {
    return std::visit([](const auto& o) { return o.dim(); }, impl_);
  }
  ObjectiveEval evaluate(std::span<const double> x) const {
    return std::visit([&](const auto& o) { return o.evaluate(x); }, impl_);
  }
  ParamVector minimizer() const {
    return std::visit([](const auto& o) { return o.minimizer(); }, impl_);
  }

 private:
  std::variant<QuadraticBowl, Rosenbrock> impl_;
};

inline TestObjective make_test_objective(TestObjectiveKind kind, std::size_t dim,
                                         TestObjectiveParams p = {}) {
  switch (kind) {
    case TestObjectiveKind::Quadratic:
      return TestObjective(QuadraticBowl(dim));
    case TestObjectiveKind::Rosenbrock:
      return TestObjective(Rosenbrock(dim, p.a, p.b));
  }
  throw InvalidArgument("unsupported test objective kind");
}

}  // namespace detune
