#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "detune/error.hpp"
#include "detune/hpo/trial.hpp"
#include "detune/optimizers.hpp"
#include "detune/rng.hpp"

namespace detune::hpo {

// ---------------------------------------------------------------------------
// Step 1: every (scale, optimizer) pair once with default hyperparameters.

inline Leaderboard factorial_sweep(const std::vector<std::string>& scales,
                                   const std::vector<OptimizerKind>& optimizers,
                                   const TrialConfig& defaults, const Trainer& trainer,
                                   const RunOptions& opts = {}) {
  detail::require(!scales.empty(), "factorial_sweep: no scales");
  detail::require(!optimizers.empty(), "factorial_sweep: no optimizers");
  std::vector<TrialConfig> configs;
  for (const auto& scale : scales) {
    for (auto kind : optimizers) {
      TrialConfig c = defaults;
      c.scale = scale;
      c.optimizer = kind;
      configs.push_back(std::move(c));
    }
  }
  return make_leaderboard(run_trials(configs, trainer, opts.workers), opts.metric, opts.tie_break);
}

// ---------------------------------------------------------------------------
// Step 2: named configuration sets, plus a strict one-axis-at-a-time mode.

struct ConfigSet {
  std::string name;
  std::size_t epochs = 100;
  std::size_t batch = 64;
  double lr0 = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;

  void validate() const {
    detail::require(!name.empty(), "config set: empty name");
    detail::require(batch >= 1, "config set " + name + ": batch must be >= 1");
    detail::require(lr0 > 0.0, "config set " + name + ": lr0 must be > 0");
    detail::require(momentum >= 0.0 && momentum < 1.0, "config set " + name + ": momentum must be in [0, 1)");
    detail::require(weight_decay >= 0.0, "config set " + name + ": weight_decay must be >= 0");
  }

  TrialConfig apply(TrialConfig base) const {
    base.label = name;
    base.epochs = epochs;
    base.batch = batch;
    base.hyper.lr0 = lr0;
    base.hyper.momentum = momentum;
    base.hyper.weight_decay = weight_decay;
    return base;
  }
};

/// The four reference configuration sets H-1 ... H-4 (epochs, batch, lr0, momentum, weight decay).
inline std::vector<ConfigSet> reference_config_sets() {
  return {{"H-1", 50, 32, 0.1, 0.9, 0.001},
          {"H-2", 75, 64, 0.01, 0.8, 0.005},
          {"H-3", 100, 64, 0.001, 0.7, 0.01},
          {"H-4", 100, 64, 0.002373, 0.937, 0.0004213}};
}

/// Cells of the reference set grid that were never trained in the reference
/// study: H-4 with Adam and AdamW.
inline std::set<std::pair<std::string, OptimizerKind>> unreported_cells() {
  return {{"H-4", OptimizerKind::Adam}, {"H-4", OptimizerKind::AdamW}};
}

struct OfatOptions {
  RunOptions run;
  bool paper_faithful = false;  // skip unreported_cells()
};

/// Evaluates every (config set x optimizer) on one scale; optimizer-major order.
inline Leaderboard ofat_evaluate(const std::vector<ConfigSet>& sets, const std::string& scale,
                                 const std::vector<OptimizerKind>& optimizers,
                                 const TrialConfig& base, const Trainer& trainer,
                                 const OfatOptions& opts = {}) {
  detail::require(!sets.empty(), "ofat_evaluate: no configuration sets");
  detail::require(!optimizers.empty(), "ofat_evaluate: no optimizers");
  const auto skip = opts.paper_faithful ? unreported_cells() : decltype(unreported_cells()){};
  std::vector<TrialConfig> configs;
  for (auto kind : optimizers) {
    for (const auto& set : sets) {
      set.validate();
      if (skip.contains({set.name, kind})) continue;
      TrialConfig c = set.apply(base);
      c.scale = scale;
      c.optimizer = kind;
      configs.push_back(std::move(c));
    }
  }
  return make_leaderboard(run_trials(configs, trainer, opts.run.workers), opts.run.metric,
                          opts.run.tie_break);
}

/// Sets one named hyperparameter axis on a config. Integer axes are rounded.
inline void set_axis(TrialConfig& c, std::string_view axis, double value) {
  if (axis == "lr0") {
    c.hyper.lr0 = value;
  } else if (axis == "momentum") {
    c.hyper.momentum = value;
  } else if (axis == "weight_decay") {
    c.hyper.weight_decay = value;
  } else if (axis == "beta2") {
    c.hyper.beta2 = value;
  } else if (axis == "epsilon") {
    c.hyper.epsilon = value;
  } else if (axis == "dropout") {
    c.dropout = value;
  } else if (axis == "epochs") {
    detail::require(value >= 0.0, "epochs must be >= 0");
    c.epochs = static_cast<std::size_t>(std::llround(value));
  } else if (axis == "batch") {
    detail::require(value >= 1.0, "batch must be >= 1");
    c.batch = static_cast<std::size_t>(std::llround(value));
  } else {
    throw InvalidArgument("unknown hyperparameter axis: " + std::string(axis));
  }
}

inline double get_axis(const TrialConfig& c, std::string_view axis) {
  if (axis == "lr0") return c.hyper.lr0;
  if (axis == "momentum") return c.hyper.momentum;
  if (axis == "weight_decay") return c.hyper.weight_decay;
  if (axis == "beta2") return c.hyper.beta2;
  if (axis == "epsilon") return c.hyper.epsilon;
  if (axis == "dropout") return c.dropout;
  if (axis == "epochs") return static_cast<double>(c.epochs);
  if (axis == "batch") return static_cast<double>(c.batch);
  throw InvalidArgument("unknown hyperparameter axis: " + std::string(axis));
}

struct AxisLevels {
  std::string axis;
  std::vector<double> levels;
};

/// One trial per (axis, level); each differs from `base` on exactly that axis.
inline Leaderboard strict_ofat(const TrialConfig& base, const std::vector<AxisLevels>& axes,
                               const Trainer& trainer, const RunOptions& opts = {}) {
  detail::require(!axes.empty(), "strict_ofat: no axes");
  std::vector<TrialConfig> configs;
  for (const auto& a : axes) {
    for (double level : a.levels) {
      TrialConfig c = base;
      set_axis(c, a.axis, level);
      c.label = a.axis + "=" + io::format_double(level);
      configs.push_back(std::move(c));
    }
  }
  return make_leaderboard(run_trials(configs, trainer, opts.workers), opts.metric, opts.tie_break);
}

// ---------------------------------------------------------------------------
// Step 3: random search.

enum class SamplingLaw { LinearUniform, LogUniform };

inline std::string_view to_string(SamplingLaw law) {
  return law == SamplingLaw::LogUniform ? "log-uniform" : "linear-uniform";
}

inline SamplingLaw parse_sampling_law(std::string_view s) {
  if (s == "log-uniform" || s == "log") return SamplingLaw::LogUniform;
  if (s == "linear-uniform" || s == "linear" || s == "uniform") return SamplingLaw::LinearUniform;
  throw InvalidArgument("unknown sampling law: " + std::string(s));
}

struct SearchAxis {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;
  SamplingLaw law = SamplingLaw::LinearUniform;

  void validate() const {
    detail::require(std::isfinite(lower) && std::isfinite(upper) && lower <= upper,
                    "search axis " + name + ": need lower <= upper");
    if (law == SamplingLaw::LogUniform) {
      detail::require(lower > 0.0, "search axis " + name + ": log-uniform bounds must be > 0");
    }
  }
};

struct SearchSpace {
  std::vector<SearchAxis> axes;

  void validate() const {
    detail::require(!axes.empty(), "search space: no axes");
    std::set<std::string> seen;
    for (const auto& a : axes) {
      a.validate();
      detail::require(seen.insert(a.name).second, "search space: duplicate axis " + a.name);
    }
  }
};

/// Reference random-search ranges: dropout linear, the rest log-uniform.
inline SearchSpace reference_search_space() {
  return {{{"dropout", 0.18, 0.37, SamplingLaw::LinearUniform},
           {"lr0", 1.177e-3, 8.838e-3, SamplingLaw::LogUniform},
           {"momentum", 0.8, 0.97, SamplingLaw::LogUniform},
           {"weight_decay", 5.7413e-5, 4.823e-4, SamplingLaw::LogUniform}}};
}

/// exp(U(ln lo, ln hi)), clamped so rounding never leaves [lo, hi].
inline double log_uniform_sample(Stream& rng, double lo, double hi) {
  detail::require(lo > 0.0 && hi > 0.0, "log_uniform_sample: bounds must be positive");
  detail::require(lo <= hi, "log_uniform_sample: lo must be <= hi");
  if (lo == hi) {
    rng.uniform();  // keep the stream position independent of the bounds
    return lo;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  return std::clamp(std::exp(a + (b - a) * rng.uniform()), lo, hi);
}

inline double sample_axis(const SearchAxis& axis, Stream& rng) {
  if (axis.law == SamplingLaw::LogUniform) return log_uniform_sample(rng, axis.lower, axis.upper);
  return std::clamp(rng.uniform(axis.lower, axis.upper), axis.lower, axis.upper);
}

inline TrialConfig sample_config(const SearchSpace& space, const TrialConfig& base, Stream& rng) {
  TrialConfig c = base;
  for (const auto& axis : space.axes) set_axis(c, axis.name, sample_axis(axis, rng));
  return c;
}

struct RandomSearchResult {
  TrialRecord best;
  Leaderboard board;
  std::vector<double> best_so_far;  // running max of the ranking metric, logical order
};

/// Draws all n configs up front (so the draw sequence never depends on
/// training), trains them, and ranks by the ranking metric.
inline RandomSearchResult random_search(const SearchSpace& space, std::size_t n_trials,
                                        const TrialConfig& base,
                                        const std::vector<std::string>& fixed_axes,
                                        const Trainer& trainer, Stream& rng,
                                        const RunOptions& opts = {}) {
  space.validate();
  detail::require(n_trials >= 1, "random_search: n_trials must be >= 1");
  for (const auto& a : space.axes) {
    detail::require(std::find(fixed_axes.begin(), fixed_axes.end(), a.name) == fixed_axes.end(),
                    "random_search: axis " + a.name + " is both searched and fixed");
  }
  std::vector<TrialConfig> configs;
  for (std::size_t i = 0; i < n_trials; ++i) {
    TrialConfig c = sample_config(space, base, rng);
    c.label = "search-" + std::string(i < 9 ? "0" : "") + std::to_string(i + 1);
    configs.push_back(std::move(c));
  }
  auto records = run_trials(configs, trainer, opts.workers);
  RandomSearchResult out;
  double running = 0.0;
  for (const auto& r : records) {
    running = std::max(running, metric_value(r, opts.metric));
    out.best_so_far.push_back(running);
  }
  out.board = make_leaderboard(std::move(records), opts.metric, opts.tie_break);
  out.best = select_best(out.board);
  return out;
}

}  // namespace detune::hpo
