#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "detune/error.hpp"
#include "detune/hpo/campaign.hpp"
#include "detune/hpo/search.hpp"
#include "detune/hpo/trial.hpp"
#include "detune/optimizers.hpp"

// Canonical JSON for configs, protocols and run manifests. nlohmann's default
// object type is an ordered std::map, so keys always come out sorted, and
// doubles are printed in shortest round-trip form.

namespace detune::io {

using json = nlohmann::json;

inline constexpr const char* kToolkitVersion = "1.0.0";
inline constexpr const char* kApIntegration = "all-point-monotone-envelope";

namespace detail {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("field '") + key + "': " + e.what());
  }
}

inline std::vector<OptimizerKind> kinds_from(const json& j) {
  std::vector<OptimizerKind> out;
  for (const auto& k : j) out.push_back(parse_optimizer_kind(k.get<std::string>()));
  return out;
}

inline json kinds_to(const std::vector<OptimizerKind>& kinds) {
  json arr = json::array();
  for (auto k : kinds) arr.push_back(std::string(to_string(k)));
  return arr;
}

}  // namespace detail

inline json optimizer_to_json(OptimizerKind kind, const OptimizerHyper& h) {
  return {{"kind", std::string(to_string(kind))},
          {"lr0", h.lr0},
          {"momentum", h.momentum},
          {"beta2", h.beta2},
          {"epsilon", h.epsilon},
          {"weight_decay", h.weight_decay},
          {"canonical_epsilon", h.canonical_epsilon}};
}

inline OptimizerHyper hyper_from_json(const json& j, OptimizerHyper h = {}) {
  h.lr0 = detail::get_or(j, "lr0", h.lr0);
  h.momentum = detail::get_or(j, "momentum", h.momentum);
  h.beta2 = detail::get_or(j, "beta2", h.beta2);
  h.epsilon = detail::get_or(j, "epsilon", h.epsilon);
  h.weight_decay = detail::get_or(j, "weight_decay", h.weight_decay);
  h.canonical_epsilon = detail::get_or(j, "canonical_epsilon", h.canonical_epsilon);
  return h;
}

inline json config_to_json(const hpo::TrialConfig& c) {
  return {{"label", c.label},
          {"scale", c.scale},
          {"optimizer", optimizer_to_json(c.optimizer, c.hyper)},
          {"epochs", c.epochs},
          {"batch", c.batch},
          {"dropout", c.dropout},
          {"seed", c.seed}};
}

inline hpo::TrialConfig config_from_json(const json& j, hpo::TrialConfig c = {}) {
  c.label = detail::get_or(j, "label", c.label);
  c.scale = detail::get_or(j, "scale", c.scale);
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    if (o.contains("kind")) c.optimizer = parse_optimizer_kind(o.at("kind").get<std::string>());
    c.hyper = hyper_from_json(o, c.hyper);
  }
  c.epochs = detail::get_or(j, "epochs", c.epochs);
  c.batch = detail::get_or(j, "batch", c.batch);
  c.dropout = detail::get_or(j, "dropout", c.dropout);
  c.seed = detail::get_or(j, "seed", c.seed);
  return c;
}

inline json space_to_json(const hpo::SearchSpace& s) {
  json axes = json::array();
  for (const auto& a : s.axes) {
    axes.push_back({{"name", a.name},
                    {"lower", a.lower},
                    {"upper", a.upper},
                    {"law", std::string(hpo::to_string(a.law))}});
  }
  return {{"axes", axes}};
}

inline hpo::SearchSpace space_from_json(const json& j) {
  if (!j.contains("axes") || !j.at("axes").is_array()) throw DataError("search space: missing 'axes' array");
  hpo::SearchSpace s;
  for (const auto& a : j.at("axes")) {
    hpo::SearchAxis axis;
    axis.name = a.at("name").get<std::string>();
    axis.lower = a.at("lower").get<double>();
    axis.upper = a.at("upper").get<double>();
    axis.law = hpo::parse_sampling_law(detail::get_or<std::string>(a, "law", "linear-uniform"));
    s.axes.push_back(std::move(axis));
  }
  s.validate();
  return s;
}

inline json config_set_to_json(const hpo::ConfigSet& s) {
  return {{"name", s.name},
          {"epochs", s.epochs},
          {"batch", s.batch},
          {"lr0", s.lr0},
          {"momentum", s.momentum},
          {"weight_decay", s.weight_decay}};
}

inline hpo::ConfigSet config_set_from_json(const json& j) {
  hpo::ConfigSet s;
  s.name = j.at("name").get<std::string>();
  s.epochs = detail::get_or(j, "epochs", s.epochs);
  s.batch = detail::get_or(j, "batch", s.batch);
  s.lr0 = detail::get_or(j, "lr0", s.lr0);
  s.momentum = detail::get_or(j, "momentum", s.momentum);
  s.weight_decay = detail::get_or(j, "weight_decay", s.weight_decay);
  s.validate();
  return s;
}

inline json protocol_to_json(const hpo::Protocol& p) {
  json j{{"name", p.name}, {"base", config_to_json(p.base)}};
  j["step1"] = nullptr;
  j["step2"] = nullptr;
  j["step3"] = nullptr;
  if (p.step1) {
    j["step1"] = {{"scales", p.step1->scales}, {"optimizers", detail::kinds_to(p.step1->optimizers)}};
  }
  if (p.step2) {
    json sets = json::array();
    for (const auto& s : p.step2->sets) sets.push_back(config_set_to_json(s));
    json axes = json::array();
    for (const auto& a : p.step2->axes) axes.push_back({{"axis", a.axis}, {"levels", a.levels}});
    j["step2"] = {{"mode", p.step2->mode == hpo::Step2Mode::ConfigSets ? "config-sets" : "strict-ofat"},
                  {"sets", sets},
                  {"optimizers", detail::kinds_to(p.step2->optimizers)},
                  {"paper_faithful", p.step2->paper_faithful},
                  {"axes", axes}};
  }
  if (p.step3) {
    j["step3"] = {{"space", space_to_json(p.step3->space)},
                  {"trials", p.step3->trials},
                  {"epochs", p.step3->epochs},
                  {"batch", p.step3->batch}};
  }
  return j;
}

/// Missing fields take the reference-protocol defaults; a null or absent step is skipped.
inline hpo::Protocol protocol_from_json(const json& j) {
  try {
    hpo::Protocol p;
    p.name = detail::get_or<std::string>(j, "name", "custom");
    if (j.contains("base")) p.base = config_from_json(j.at("base"));
    if (j.contains("step1") && !j.at("step1").is_null()) {
      const json& s = j.at("step1");
      hpo::Step1 s1;
      if (s.contains("scales")) s1.scales = s.at("scales").get<std::vector<std::string>>();
      if (s.contains("optimizers")) s1.optimizers = detail::kinds_from(s.at("optimizers"));
      p.step1 = std::move(s1);
    }
    if (j.contains("step2") && !j.at("step2").is_null()) {
      const json& s = j.at("step2");
      hpo::Step2 s2;
      const auto mode = detail::get_or<std::string>(s, "mode", "config-sets");
      if (mode == "strict-ofat") {
        s2.mode = hpo::Step2Mode::StrictOfat;
      } else if (mode != "config-sets") {
        throw DataError("protocol: unknown step2 mode '" + mode + "'");
      }
      if (s.contains("sets")) {
        s2.sets.clear();
        for (const auto& cs : s.at("sets")) s2.sets.push_back(config_set_from_json(cs));
      }
      if (s.contains("optimizers")) s2.optimizers = detail::kinds_from(s.at("optimizers"));
      s2.paper_faithful = detail::get_or(s, "paper_faithful", false);
      if (s.contains("axes")) {
        for (const auto& a : s.at("axes")) {
          s2.axes.push_back({a.at("axis").get<std::string>(), a.at("levels").get<std::vector<double>>()});
        }
      }
      p.step2 = std::move(s2);
    }
    if (j.contains("step3") && !j.at("step3").is_null()) {
      const json& s = j.at("step3");
      hpo::Step3 s3;
      if (s.contains("space")) s3.space = space_from_json(s.at("space"));
      s3.trials = detail::get_or(s, "trials", s3.trials);
      s3.epochs = detail::get_or(s, "epochs", s3.epochs);
      s3.batch = detail::get_or(s, "batch", s3.batch);
      p.step3 = std::move(s3);
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("protocol: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("protocol: ") + e.what());
  }
}

inline json metrics_to_json(const hpo::TrialMetrics& m) {
  return {{"precision", m.precision},
          {"recall", m.recall},
          {"map50_train", m.map50_train},
          {"map50_val", m.map50_val},
          {"map50_test", m.map50_test}};
}

/// Wall time is left out on purpose: it is the only non-reproducible field.
inline json record_to_json(const hpo::TrialRecord& r) {
  return {{"index", r.index},
          {"config", config_to_json(r.config)},
          {"metrics", metrics_to_json(r.metrics)},
          {"work", r.work},
          {"status", std::string(hpo::to_string(r.status))},
          {"note", r.note}};
}

inline json environment_fingerprint() {
  json env;
#if defined(__clang__)
  env["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  env["compiler"] = std::string("gcc ") + __VERSION__;
#else
  env["compiler"] = "unknown";
#endif
  env["cxx_standard"] = static_cast<long>(__cplusplus);
#if defined(__linux__)
  env["platform"] = "linux";
#elif defined(__APPLE__)
  env["platform"] = "darwin";
#elif defined(_WIN32)
  env["platform"] = "windows";
#else
  env["platform"] = "unknown";
#endif
  env["pointer_bits"] = static_cast<int>(8 * sizeof(void*));
  return env;
}

inline json manifest_json(const hpo::CampaignReport& report, const hpo::Protocol& protocol) {
  json steps = json::array();
  for (const auto& s : report.steps) {
    json trials = json::array();
    for (const auto& r : s.trials) trials.push_back(record_to_json(r));
    steps.push_back({{"name", s.name}, {"trials", trials}, {"best_index", s.best.index}});
  }
  return {{"version", kToolkitVersion},
          {"ap_integration", kApIntegration},
          {"seed", report.seed},
          {"protocol", protocol_to_json(protocol)},
          {"steps", steps},
          {"best_so_far", report.best_so_far},
          {"selected", record_to_json(report.selected)},
          {"environment", environment_fingerprint()}};
}

inline std::string dump_canonical(const json& j) { return j.dump(2) + "\n"; }

}  // namespace detune::io
