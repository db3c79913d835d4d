#pragma once

// N-way K-shot episodes: task sampling, the per-task calibrate/augment/train
// pipeline, and aggregation into a mean with a 95% confidence half-width.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gdc/calibrate.hpp"
#include "gdc/classify.hpp"
#include "gdc/common.hpp"
#include "gdc/dataset.hpp"
#include "gdc/parallel.hpp"
#include "gdc/rng.hpp"
#include "gdc/sampling.hpp"
#include "gdc/stats.hpp"
#include "gdc/transforms.hpp"

namespace gdc {

struct EpisodeSpec {
  std::size_t way = 5;
  std::size_t shot = 1;
  std::size_t queries = 15;
  /// Randomly permute query labels within each task (chance-level control).
  bool shuffle_query_labels = false;
};

/// Raw (untransformed) support and query points of one episode.
struct Task {
  std::size_t way = 0;
  std::size_t shot = 0;
  std::size_t queries = 0;
  std::uint64_t task_seed = 0;
  Matrix support;
  std::vector<ClassId> support_labels;
  std::vector<std::size_t> support_rows;
  Matrix query;
  std::vector<ClassId> query_labels;
  std::vector<std::size_t> query_rows;
};

inline std::uint64_t task_seed_for(std::uint64_t base_seed, std::size_t task_index) {
  return derive_seed(base_seed, {static_cast<std::uint64_t>(task_index)});
}

/// Picks `way` classes uniformly, then shot + queries distinct points per
/// class; the first `shot` become support points.
inline Task sample_task(const PartitionView& split, const EpisodeSpec& spec,
                        std::uint64_t task_seed) {
  if (spec.way < 1 || spec.shot < 1 || spec.queries < 1) {
    throw ValidationError("sample_task: way, shot and queries must be positive");
  }
  if (split.classes.size() < spec.way) {
    throw ValidationError("sample_task: split '" + std::string(to_string(split.split)) + "' has " +
                          std::to_string(split.classes.size()) + " classes, need " +
                          std::to_string(spec.way));
  }
  const FeatureDataset& ds = *split.dataset;
  Rng rng(task_seed);
  std::vector<ClassId> classes = split.classes;
  rng.partial_shuffle(std::span<ClassId>(classes), spec.way);
  classes.resize(spec.way);

  Task t;
  t.way = spec.way;
  t.shot = spec.shot;
  t.queries = spec.queries;
  t.task_seed = task_seed;
  const std::size_t per_class = spec.shot + spec.queries;
  for (ClassId id : classes) {
    std::vector<std::size_t> rows = split.members.at(id);
    if (rows.size() < per_class) {
      throw ValidationError("sample_task: class " + std::to_string(id) + " has " +
                            std::to_string(rows.size()) + " points, need " +
                            std::to_string(per_class));
    }
    rng.partial_shuffle(std::span<std::size_t>(rows), per_class);
    for (std::size_t i = 0; i < per_class; ++i) {
      auto& dest_rows = i < spec.shot ? t.support_rows : t.query_rows;
      auto& dest_labels = i < spec.shot ? t.support_labels : t.query_labels;
      dest_rows.push_back(rows[i]);
      dest_labels.push_back(id);
    }
  }
  auto gather = [&](const std::vector<std::size_t>& rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), ds.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      m.row(Eigen::Index(i)) = ds.row(rows[i]).cast<double>();
    }
    return m;
  };
  t.support = gather(t.support_rows);
  t.query = gather(t.query_rows);
  if (spec.shuffle_query_labels) {
    Rng label_rng(derive_seed(task_seed, {0x9e37U}));
    label_rng.shuffle(std::span<ClassId>(t.query_labels));
  }
  return t;
}

/// Everything the pipeline needs from the base split for one beta.
struct BaseModel {
  TransformChoice transform;
  std::vector<ClassStats> stats;
};

inline BaseModel prepare_base(const FeatureDataset& ds, double beta) {
  BaseModel b;
  b.transform = {select_transform(ds), beta};
  b.stats = compute_base_stats(ds.partition(Split::Base), b.transform);
  return b;
}

/// Query accuracy of one task: transform, augment the support set around
/// calibrated distributions, train the classifier.
inline double run_episode(const Task& task, const BaseModel& base, const GdcConfig& config,
                          TrainRecipe recipe = {}) {
  if (config.beta != base.transform.beta) {
    throw ValidationError("run_episode: config beta differs from the base statistics' beta");
  }
  config.validate(base.stats.size());
  const Matrix support = apply_transform_rows(task.support, base.transform);
  const Matrix query = apply_transform_rows(task.query, base.transform);
  const auto augmented =
      augment_task(support, task.support_labels, base.stats, config, task.task_seed);
  recipe.shuffle_seed = derive_seed(config.seed, {task.task_seed, 0x7a11U});
  const auto model = train(augmented, recipe);
  return accuracy(model, query, task.query_labels);
}

struct EpisodeResult {
  std::vector<double> per_task_accuracy;
  double mean = 0.0;
  double ci95 = 0.0;
};

/// Mean and 1.96 * s / sqrt(T), with s the sample standard deviation (0 for T = 1).
inline EpisodeResult summarize(std::vector<double> per_task) {
  EpisodeResult r;
  r.per_task_accuracy = std::move(per_task);
  const auto t = static_cast<double>(r.per_task_accuracy.size());
  if (r.per_task_accuracy.empty()) return r;
  r.mean = std::accumulate(r.per_task_accuracy.begin(), r.per_task_accuracy.end(), 0.0) / t;
  if (r.per_task_accuracy.size() > 1) {
    double ss = 0.0;
    for (double a : r.per_task_accuracy) ss += (a - r.mean) * (a - r.mean);
    r.ci95 = 1.96 * std::sqrt(ss / (t - 1.0)) / std::sqrt(t);
  }
  return r;
}

struct EvalOptions {
  EpisodeSpec episode{};
  TrainRecipe recipe{};
  std::size_t num_tasks = 1;
  std::uint64_t base_seed = 0;
  std::size_t workers = 1;
};

/// Accuracies of tasks [first, first + count) of the seeded task sequence.
inline std::vector<double> evaluate_tasks(const PartitionView& split, const BaseModel& base,
                                          const GdcConfig& config, const EvalOptions& opts,
                                          std::size_t first, std::size_t count) {
  config.validate(base.stats.size());
  std::vector<double> acc(count);
  parallel_for(count, opts.workers, [&](std::size_t i) {
    const Task task = sample_task(split, opts.episode, task_seed_for(opts.base_seed, first + i));
    acc[i] = run_episode(task, base, config, opts.recipe);
  });
  return acc;
}

inline EpisodeResult evaluate(const PartitionView& split, const BaseModel& base,
                              const GdcConfig& config, const EvalOptions& opts) {
  if (opts.num_tasks < 1) throw ValidationError("evaluate: need at least one task");
  return summarize(evaluate_tasks(split, base, config, opts, 0, opts.num_tasks));
}

inline EpisodeResult evaluate(const FeatureDataset& ds, Split split, const GdcConfig& config,
                              const EvalOptions& opts) {
  const BaseModel base = prepare_base(ds, config.beta);
  return evaluate(ds.partition(split), base, config, opts);
}

}  // namespace gdc
