#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "detune/hpo/trial.hpp"
#include "detune/surrogate/train.hpp"

namespace detune::hpo {

/// Trains the surrogate detector for one trial config. Datasets are built on
/// first use per (scale, seed) and shared between concurrent trials.
class SurrogateTrainer {
 public:
  explicit SurrogateTrainer(surrogate::DataSpec data = {}) : data_(std::move(data)) {}

  std::shared_ptr<const surrogate::Dataset> dataset(const std::string& scale, std::uint64_t seed) const {
    const auto& ladder_scale = surrogate::parse_scale(scale);
    std::lock_guard lock(cache_->mutex);
    auto& slot = cache_->datasets[{scale, seed}];
    if (!slot) {
      slot = std::make_shared<const surrogate::Dataset>(surrogate::make_dataset(data_, ladder_scale, seed));
    }
    return slot;
  }

  TrialOutcome operator()(const TrialConfig& c) const {
    const auto ds = dataset(c.scale, c.seed);
    surrogate::TrainConfig tc;
    tc.epochs = c.epochs;
    tc.batch = c.batch;
    tc.optimizer = c.optimizer;
    tc.hyper = c.hyper;
    tc.dropout = c.dropout;
    tc.scale = surrogate::parse_scale(c.scale);
    tc.seed = c.seed;

    const auto result = surrogate::train(tc, ds->train, ds->val);
    TrialOutcome out;
    out.work = result.gradient_evaluations;
    if (result.diverged) {
      out.status = TrialStatus::Diverged;
      out.note = "non-finite loss or parameters after " + std::to_string(result.history.size()) + " epochs";
      return out;
    }
    try {
      const auto val = surrogate::evaluate_split(result.params, ds->val);
      out.metrics.precision = val.precision;
      out.metrics.recall = val.recall;
      out.metrics.map50_val = val.map50;
      out.metrics.map50_train = surrogate::split_map50(result.params, ds->train);
      out.metrics.map50_test = surrogate::split_map50(result.params, ds->test);
    } catch (const NumericError& e) {
      out.status = TrialStatus::Diverged;
      out.note = e.what();
      out.metrics = {};
    }
    return out;
  }

  const surrogate::DataSpec& data_spec() const { return data_; }

 private:
  struct Cache {
    std::mutex mutex;
    std::map<std::pair<std::string, std::uint64_t>, std::shared_ptr<const surrogate::Dataset>> datasets;
  };

  surrogate::DataSpec data_;
  // Shared so copies (std::function stores one) reuse the same datasets.
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

}  // namespace detune::hpo
