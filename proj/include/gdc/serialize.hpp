#pragma once

#include <json.hpp>

#include "gdc/calibrate.hpp"
#include "gdc/episodes.hpp"

namespace gdc {

inline nlohmann::json config_to_json(const GdcConfig& c) {
  nlohmann::json j = {{"beta", c.beta},
                      {"m", c.m},
                      {"k", c.k},
                      {"alpha1", c.alpha1},
                      {"alpha2", c.alpha2},
                      {"n_samples", c.n_samples},
                      {"metric", to_string(c.metric.kind)},
                      {"cov_mode", to_string(c.cov_mode)},
                      {"seed", c.seed}};
  if (c.metric.kind == MetricKind::SquaredDelta) j["delta"] = c.metric.delta;
  return j;
}

inline GdcConfig config_from_json(const nlohmann::json& j) {
  try {
    GdcConfig c;
    c.beta = j.at("beta").get<double>();
    c.m = j.at("m").get<double>();
    c.k = j.at("k").get<std::size_t>();
    c.alpha1 = j.at("alpha1").get<double>();
    c.alpha2 = j.at("alpha2").get<double>();
    c.n_samples = j.at("n_samples").get<std::size_t>();
    c.metric.kind = parse_metric(j.at("metric").get<std::string>());
    if (j.contains("delta")) c.metric.delta = j.at("delta").get<double>();
    c.cov_mode = parse_cov_mode(j.at("cov_mode").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad config record: ") + e.what());
  }
}

inline nlohmann::json result_to_json(const EpisodeResult& r, const GdcConfig& config,
                                     bool per_task) {
  nlohmann::json j = {{"mean", r.mean},
                      {"ci95", r.ci95},
                      {"num_tasks", r.per_task_accuracy.size()},
                      {"config", config_to_json(config)}};
  if (per_task) j["per_task"] = r.per_task_accuracy;
  return j;
}

}  // namespace gdc
