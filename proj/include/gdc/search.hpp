#pragma once

// Hyperparameter search: uniform sampling over discrete grids, median pruning
// at a task checkpoint, an append-only JSON-lines trial log that a later run
// resumes from, and confirmation of the best trials on the novel split.
//
// Trials run one after another; the tasks inside a trial run in parallel. A
// prune decision therefore sees exactly the trials that precede it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gdc/calibrate.hpp"
#include "gdc/common.hpp"
#include "gdc/dataset.hpp"
#include "gdc/episodes.hpp"
#include "gdc/rng.hpp"
#include "gdc/serialize.hpp"

namespace gdc {

/// Candidate values of one hyperparameter.
struct Axis {
  std::vector<double> values;

  /// low, low + step, ... up to high (inclusive, within 1e-9 steps).
  static Axis grid(double low, double high, double step) {
    if (!(step > 0.0) || !(high >= low)) {
      throw ValidationError("search axis needs step > 0 and high >= low");
    }
    Axis a;
    const auto count = static_cast<std::size_t>(std::floor((high - low) / step + 1e-9)) + 1;
    for (std::size_t j = 0; j < count; ++j) a.values.push_back(low + static_cast<double>(j) * step);
    return a;
  }

  static Axis set(std::vector<double> values) {
    if (values.empty()) throw ValidationError("search axis must not be empty");
    return Axis{std::move(values)};
  }

  std::size_t size() const noexcept { return values.size(); }
};

enum class SpacePreset {
  Wide,    ///< alpha1 in [0, 10000] step 1000, alpha2 multiplier in {0, 0.1, 1, 10, 100}
  Narrow,  ///< alpha1 in [0, 1000] step 100, alpha2 multiplier in [0, 1000] step 100
};

inline SpacePreset parse_preset(std::string_view name) {
  if (name == "wide") return SpacePreset::Wide;
  if (name == "narrow") return SpacePreset::Narrow;
  throw ValidationError("unknown search space preset '" + std::string(name) + "'");
}

struct SearchSpace {
  Axis beta = Axis::grid(0.0, 10.0, 0.25);
  Axis m = Axis::grid(0.0, 3.0, 0.25);
  Axis k = Axis::grid(2.0, 2.0, 2.0);
  Axis n_samples = Axis::grid(100.0, 1000.0, 50.0);
  Axis alpha1 = Axis::grid(0.0, 10000.0, 1000.0);
  /// alpha2 = multiplier * alpha1 when alpha2_is_multiplier, else alpha2 itself.
  Axis alpha2 = Axis::set({0.0, 0.1, 1.0, 10.0, 100.0});
  bool alpha2_is_multiplier = true;
  std::vector<MetricKind> metrics{MetricKind::SquaredEuclidean};
  Axis delta = Axis::set({1.0});
  CovMode cov_mode = CovMode::WeightedAverage;

  static SearchSpace preset(SpacePreset p, std::size_t num_base_classes) {
    SearchSpace s;
    const double top_k = static_cast<double>(std::max<std::size_t>(2, num_base_classes));
    s.k = Axis::grid(2.0, top_k, 2.0);
    if (p == SpacePreset::Narrow) {
      s.alpha1 = Axis::grid(0.0, 1000.0, 100.0);
      s.alpha2 = Axis::grid(0.0, 1000.0, 100.0);
    }
    return s;
  }

  void validate() const {
    for (const Axis* a : {&beta, &m, &k, &n_samples, &alpha1, &alpha2, &delta}) {
      if (a->values.empty()) throw ValidationError("search space has an empty axis");
    }
    if (metrics.empty()) throw ValidationError("search space has no metric");
  }
};

struct SampledConfig {
  GdcConfig config;
  double alpha2_value = 0.0;  // multiplier or absolute, as drawn
};

/// Independent uniform draw from each axis, in a fixed axis order.
inline SampledConfig sample_config(const SearchSpace& space, std::uint64_t trial_seed,
                                   std::uint64_t config_seed = 0) {
  space.validate();
  Rng rng(trial_seed);
  auto pick = [&](const Axis& a) { return a.values[rng.uniform_index(a.size())]; };
  SampledConfig s;
  GdcConfig& c = s.config;
  c.beta = pick(space.beta);
  c.m = pick(space.m);
  c.k = static_cast<std::size_t>(std::llround(pick(space.k)));
  c.n_samples = static_cast<std::size_t>(std::llround(pick(space.n_samples)));
  c.alpha1 = pick(space.alpha1);
  s.alpha2_value = pick(space.alpha2);
  c.alpha2 = space.alpha2_is_multiplier ? s.alpha2_value * c.alpha1 : s.alpha2_value;
  c.metric.kind = space.metrics[rng.uniform_index(space.metrics.size())];
  const double delta = pick(space.delta);
  if (c.metric.kind == MetricKind::SquaredDelta) c.metric.delta = delta;
  c.cov_mode = space.cov_mode;
  c.seed = config_seed;
  return s;
}

enum class TrialStatus { Running, Pruned, Complete };

inline std::string_view to_string(TrialStatus s) noexcept {
  switch (s) {
    case TrialStatus::Running: return "running";
    case TrialStatus::Pruned: return "pruned";
    case TrialStatus::Complete: return "complete";
  }
  return "unknown";
}

inline TrialStatus parse_trial_status(std::string_view s) {
  if (s == "running") return TrialStatus::Running;
  if (s == "pruned") return TrialStatus::Pruned;
  if (s == "complete") return TrialStatus::Complete;
  throw ValidationError("unknown trial status '" + std::string(s) + "'");
}

struct TrialRecord {
  std::size_t index = 0;
  std::uint64_t trial_seed = 0;
  GdcConfig config;
  double alpha2_value = 0.0;
  std::vector<double> accuracies;
  TrialStatus status = TrialStatus::Running;
  std::optional<double> checkpoint_mean;
  std::optional<double> median_at_decision;
  std::optional<double> final_validation_mean;

  bool operator==(const TrialRecord&) const = default;
};

inline double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct PruneDecision {
  bool prune = false;
  std::optional<double> median;  // basis of the decision; empty when no prior trial
};

/// Median pruner over the checkpoint means of finished (pruned or complete) trials.
class MedianPruner {
 public:
  explicit MedianPruner(std::size_t checkpoint = 100) : checkpoint_(checkpoint) {}

  std::size_t checkpoint() const noexcept { return checkpoint_; }

  PruneDecision decide(double running_mean) const {
    if (finished_.empty()) return {};
    const double median = median_of(finished_);
    return {running_mean < median, median};
  }

  void record(double checkpoint_mean) { finished_.push_back(checkpoint_mean); }

  const std::vector<double>& basis() const noexcept { return finished_; }

 private:
  std::size_t checkpoint_;
  std::vector<double> finished_;
};

using PruneHook = std::function<PruneDecision(double running_mean)>;

/// Evaluates `tasks_per_trial` validation tasks. Once `checkpoint` tasks are
/// done (and more remain), the hook may prune the trial.
inline TrialRecord run_trial(const PartitionView& split, const BaseModel& base,
                             const GdcConfig& config, const EvalOptions& opts,
                             std::size_t tasks_per_trial, std::size_t checkpoint,
                             const PruneHook& prune_hook) {
  TrialRecord r;
  r.config = config;
  const std::size_t first = std::min(checkpoint, tasks_per_trial);
  r.accuracies = evaluate_tasks(split, base, config, opts, 0, first);
  if (first == checkpoint && checkpoint > 0) r.checkpoint_mean = mean_of(r.accuracies);
  if (tasks_per_trial > checkpoint && prune_hook) {
    const auto decision = prune_hook(*r.checkpoint_mean);
    r.median_at_decision = decision.median;
    if (decision.prune) {
      r.status = TrialStatus::Pruned;
      return r;
    }
  }
  if (tasks_per_trial > first) {
    auto rest = evaluate_tasks(split, base, config, opts, first, tasks_per_trial - first);
    r.accuracies.insert(r.accuracies.end(), rest.begin(), rest.end());
  }
  r.status = TrialStatus::Complete;
  r.final_validation_mean = mean_of(r.accuracies);
  return r;
}

inline nlohmann::json trial_to_json(const TrialRecord& r) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"trial", r.index},
          {"trial_seed", r.trial_seed},
          {"config", config_to_json(r.config)},
          {"alpha2_value", r.alpha2_value},
          {"status", to_string(r.status)},
          {"checkpoint_mean", opt(r.checkpoint_mean)},
          {"median_at_decision", opt(r.median_at_decision)},
          {"validation_mean", opt(r.final_validation_mean)},
          {"accuracies", r.accuracies}};
}

inline TrialRecord trial_from_json(const nlohmann::json& j) {
  auto opt = [&](const char* key) -> std::optional<double> {
    const auto& v = j.at(key);
    return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  };
  try {
    TrialRecord r;
    r.index = j.at("trial").get<std::size_t>();
    r.trial_seed = j.at("trial_seed").get<std::uint64_t>();
    r.config = config_from_json(j.at("config"));
    r.alpha2_value = j.at("alpha2_value").get<double>();
    r.status = parse_trial_status(j.at("status").get<std::string>());
    r.checkpoint_mean = opt("checkpoint_mean");
    r.median_at_decision = opt("median_at_decision");
    r.final_validation_mean = opt("validation_mean");
    r.accuracies = j.at("accuracies").get<std::vector<double>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad trial record: ") + e.what());
  }
}

inline std::vector<TrialRecord> read_trial_log(const std::filesystem::path& path) {
  std::vector<TrialRecord> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(trial_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ValidationError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void append_trial_log(const std::filesystem::path& path, const TrialRecord& r) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw ValidationError("cannot open trial log '" + path.string() + "'");
  out << trial_to_json(r).dump() << '\n';
  if (!out) throw ValidationError("write to trial log '" + path.string() + "' failed");
}

struct TuneOptions {
  SearchSpace space;
  std::size_t trials = 10;
  std::size_t tasks_per_trial = 200;
  std::size_t checkpoint = 100;
  std::uint64_t seed = 0;
  EpisodeSpec episode{};
  TrainRecipe recipe{};
  std::size_t workers = 1;
};

inline std::uint64_t trial_seed_for(std::uint64_t seed, std::size_t trial_index) {
  return derive_seed(seed, {0x7e1a1U, static_cast<std::uint64_t>(trial_index)});
}

/// Caches base statistics per beta, since every trial may draw a new one.
class BaseCache {
 public:
  explicit BaseCache(const FeatureDataset& ds) : ds_(ds) {}

  const BaseModel& get(double beta) {
    auto it = cache_.find(beta);
    if (it == cache_.end()) it = cache_.emplace(beta, prepare_base(ds_, beta)).first;
    return it->second;
  }

 private:
  const FeatureDataset& ds_;
  std::map<double, BaseModel> cache_;
};

/// Runs trials up to opts.trials on the validation split. Trials already in
/// the log are replayed into the pruner, not re-run; new trials are appended.
/// Returns every trial, logged and new, in index order.
inline std::vector<TrialRecord> run_search(const FeatureDataset& ds, const TuneOptions& opts,
                                           const std::optional<std::filesystem::path>& log_path,
                                           BaseCache* cache = nullptr) {
  opts.space.validate();
  std::vector<TrialRecord> trials;
  if (log_path) trials = read_trial_log(*log_path);
  MedianPruner pruner(opts.checkpoint);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    if (t.index != i || t.trial_seed != trial_seed_for(opts.seed, i)) {
      throw ValidationError("trial log does not match this search (trial " + std::to_string(i) +
                            ")");
    }
    if (t.status == TrialStatus::Running) {
      throw ValidationError("trial log holds an unfinished trial " + std::to_string(i));
    }
    if (t.checkpoint_mean) pruner.record(*t.checkpoint_mean);
  }

  BaseCache local(ds);
  BaseCache& bases = cache ? *cache : local;
  const PartitionView split = ds.partition(Split::Validation);
  EvalOptions eval;
  eval.episode = opts.episode;
  eval.recipe = opts.recipe;
  eval.base_seed = derive_seed(opts.seed, {0x7a5c5U});
  eval.workers = opts.workers;

  for (std::size_t i = trials.size(); i < opts.trials; ++i) {
    const std::uint64_t trial_seed = trial_seed_for(opts.seed, i);
    const auto sampled = sample_config(opts.space, trial_seed, opts.seed);
    GdcConfig config = sampled.config;
    const BaseModel& base = bases.get(config.beta);
    config.k = std::min(config.k, base.stats.size());
    TrialRecord r = run_trial(split, base, config, eval, opts.tasks_per_trial, opts.checkpoint,
                              [&](double running) { return pruner.decide(running); });
    r.index = i;
    r.trial_seed = trial_seed;
    r.alpha2_value = sampled.alpha2_value;
    if (r.checkpoint_mean) pruner.record(*r.checkpoint_mean);
    if (log_path) append_trial_log(*log_path, r);
    trials.push_back(std::move(r));
  }
  return trials;
}

struct ConfirmedTrial {
  std::size_t trial_index = 0;
  GdcConfig config;
  double validation_mean = 0.0;
  EpisodeResult novel;
};

/// Re-evaluates the top_n complete trials (by validation mean, ties by trial
/// index) on the novel split; results sorted by novel mean, descending.
inline std::vector<ConfirmedTrial> confirm_top(const FeatureDataset& ds,
                                               const std::vector<TrialRecord>& trials,
                                               std::size_t top_n, std::size_t novel_tasks,
                                               const TuneOptions& opts,
                                               BaseCache* cache = nullptr) {
  std::vector<const TrialRecord*> done;
  for (const auto& t : trials) {
    if (t.status == TrialStatus::Complete) done.push_back(&t);
  }
  if (done.size() < top_n) {
    throw ValidationError("confirm_top: " + std::to_string(done.size()) +
                          " complete trials, need " + std::to_string(top_n));
  }
  std::stable_sort(done.begin(), done.end(), [](const TrialRecord* a, const TrialRecord* b) {
    return *a->final_validation_mean > *b->final_validation_mean;
  });
  done.resize(top_n);

  BaseCache local(ds);
  BaseCache& bases = cache ? *cache : local;
  const PartitionView split = ds.partition(Split::Novel);
  EvalOptions eval;
  eval.episode = opts.episode;
  eval.recipe = opts.recipe;
  eval.num_tasks = novel_tasks;
  eval.base_seed = derive_seed(opts.seed, {0x70e1U});
  eval.workers = opts.workers;

  std::vector<ConfirmedTrial> out;
  for (const TrialRecord* t : done) {
    ConfirmedTrial c;
    c.trial_index = t->index;
    c.config = t->config;
    c.validation_mean = *t->final_validation_mean;
    c.novel = evaluate(split, bases.get(t->config.beta), t->config, eval);
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const ConfirmedTrial& a, const ConfirmedTrial& b) {
    return a.novel.mean > b.novel.mean;
  });
  return out;
}

}  // namespace gdc
