#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "detune/error.hpp"
#include "detune/hpo/search.hpp"
#include "detune/hpo/trial.hpp"
#include "detune/optimizers.hpp"
#include "detune/rng.hpp"

namespace detune::hpo {

struct Step1 {
  std::vector<std::string> scales{"n", "s", "m", "l", "x"};
  std::vector<OptimizerKind> optimizers{kAllOptimizers.begin(), kAllOptimizers.end()};
};

enum class Step2Mode { ConfigSets, StrictOfat };

struct Step2 {
  Step2Mode mode = Step2Mode::ConfigSets;
  std::vector<ConfigSet> sets = reference_config_sets();
  std::vector<OptimizerKind> optimizers{OptimizerKind::SGD, OptimizerKind::Adam, OptimizerKind::AdamW};
  bool paper_faithful = false;
  std::vector<AxisLevels> axes;  // StrictOfat only
};

struct Step3 {
  SearchSpace space = reference_search_space();
  std::size_t trials = 20;
  std::size_t epochs = 100;
  std::size_t batch = 64;
};

/// A three-step tuning protocol. Any step may be absent; a missing step 1
/// means step 2 starts from `base.scale`, a missing step 2 means step 3
/// searches around the step-1 winner (or `base`).
struct Protocol {
  std::string name = "custom";
  TrialConfig base;  // defaults for step 1 and fallback seed config
  std::optional<Step1> step1;
  std::optional<Step2> step2;
  std::optional<Step3> step3;

  void validate() const {
    detail::require(step1 || step2 || step3, "protocol: no steps");
    if (step1) {
      detail::require(!step1->scales.empty(), "protocol: step1 has no scales");
      detail::require(!step1->optimizers.empty(), "protocol: step1 has no optimizers");
    }
    if (step2) {
      if (step2->mode == Step2Mode::ConfigSets) {
        detail::require(!step2->sets.empty(), "protocol: step2 has no configuration sets");
        detail::require(!step2->optimizers.empty(), "protocol: step2 has no optimizers");
        for (const auto& s : step2->sets) s.validate();
      } else {
        detail::require(!step2->axes.empty(), "protocol: strict step2 has no axes");
      }
    }
    if (step3) {
      step3->space.validate();
      detail::require(step3->trials >= 1, "protocol: step3 needs at least one trial");
      detail::require(step3->batch >= 1, "protocol: step3 batch must be >= 1");
    }
    base.hyper.validate();
  }
};

/// 5 scales x 6 optimizers, then the four reference sets x {SGD, Adam, AdamW},
/// then 20 random-search trials at batch 64 / 100 epochs.
inline Protocol paper_protocol(std::uint64_t seed = 0) {
  Protocol p;
  p.name = "paper";
  p.base.seed = seed;
  p.step1 = Step1{};
  p.step2 = Step2{};
  p.step3 = Step3{};
  return p;
}

struct StepReport {
  std::string name;
  std::vector<TrialRecord> trials;  // logical order
  Leaderboard board;
  TrialRecord best;
};

struct CampaignReport {
  std::string protocol;
  std::uint64_t seed = 0;
  std::vector<StepReport> steps;
  std::vector<double> best_so_far;  // running max of val mAP50 over all trials, in order
  TrialRecord selected;
};

class CampaignAborted : public std::runtime_error {
 public:
  CampaignAborted(const std::string& what, CampaignReport partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const CampaignReport& partial() const noexcept { return partial_; }

 private:
  CampaignReport partial_;
};

namespace detail {

inline std::string divergence_diagnostic(const StepReport& step) {
  std::string msg = "campaign aborted: every trial in " + step.name + " diverged";
  for (const auto& r : step.trials) {
    msg += "\n  [" + std::to_string(r.index) + "] " + r.config.scale + "/" +
           std::string(to_string(r.config.optimizer)) + " " + r.config.label;
    if (!r.note.empty()) msg += ": " + r.note;
  }
  return msg;
}

}  // namespace detail

/// Runs the protocol. Selection uses validation mAP50 with the work count as
/// tie-break, so the whole report is a function of (protocol, trainer).
/// `rng` feeds the random-search step only.
inline CampaignReport run_campaign(const Protocol& protocol, const Trainer& trainer, Stream& rng,
                                   std::size_t workers = 1) {
  protocol.validate();
  const RunOptions opts{workers, RankMetric::ValMap50, TieBreak::Work};

  CampaignReport report;
  report.protocol = protocol.name;
  report.seed = protocol.base.seed;
  double running = 0.0;

  auto finish_step = [&](std::string name, Leaderboard board) {
    StepReport step;
    step.name = std::move(name);
    step.trials = board.rows;
    std::sort(step.trials.begin(), step.trials.end(),
              [](const TrialRecord& a, const TrialRecord& b) { return a.index < b.index; });
    for (const auto& r : step.trials) {
      running = std::max(running, r.metrics.map50_val);
      report.best_so_far.push_back(running);
    }
    step.board = std::move(board);
    if (all_diverged(step.board)) {
      report.steps.push_back(step);
      throw CampaignAborted(detail::divergence_diagnostic(step), report);
    }
    step.best = select_best(step.board);
    report.steps.push_back(std::move(step));
    return report.steps.back().best;
  };

  TrialConfig current = protocol.base;
  std::optional<TrialRecord> overall;
  auto consider = [&](const TrialRecord& r) {
    if (!overall || ranks_before(r, *overall, opts.metric, opts.tie_break)) overall = r;
  };

  if (protocol.step1) {
    const auto best = finish_step(
        "step1", factorial_sweep(protocol.step1->scales, protocol.step1->optimizers, protocol.base,
                                 trainer, opts));
    consider(best);
    current.scale = best.config.scale;
    current.optimizer = best.config.optimizer;
  }
  if (protocol.step2) {
    const Step2& s2 = *protocol.step2;
    Leaderboard board;
    if (s2.mode == Step2Mode::ConfigSets) {
      board = ofat_evaluate(s2.sets, current.scale, s2.optimizers, current, trainer,
                            OfatOptions{opts, s2.paper_faithful});
    } else {
      board = strict_ofat(current, s2.axes, trainer, opts);
    }
    const auto best = finish_step("step2", std::move(board));
    consider(best);
    current = best.config;
  }
  if (protocol.step3) {
    const Step3& s3 = *protocol.step3;
    TrialConfig base = current;
    base.epochs = s3.epochs;
    base.batch = s3.batch;
    auto result = random_search(s3.space, s3.trials, base, {"epochs", "batch"}, trainer, rng, opts);
    const auto best = finish_step("step3", std::move(result.board));
    consider(best);
  }
  report.selected = *overall;
  return report;
}

}  // namespace detune::hpo
