#pragma once

// Multinomial logistic regression trained with plain minibatch SGD on mean
// cross-entropy: zero initialisation, trained bias, no regularisation, no
// learning-rate schedule, the last partial batch kept.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gdc/common.hpp"
#include "gdc/rng.hpp"
#include "gdc/sampling.hpp"

namespace gdc {

struct TrainRecipe {
  std::size_t batch_size = 1024;
  std::size_t epochs = 200;
  double learning_rate = 0.08;
  std::uint64_t shuffle_seed = 0;
};

struct LogRegModel {
  Matrix weights;                // N x d
  Vector bias;                   // N
  std::vector<ClassId> classes;  // ascending

  std::size_t num_classes() const noexcept { return classes.size(); }
};

struct Prediction {
  ClassId class_id = 0;
  Vector probabilities;
};

/// Row-wise softmax of logits, max-shifted.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double mx = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - mx).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

struct LossGradient {
  double loss = 0.0;
  Matrix d_weights;
  Vector d_bias;
};

/// Mean cross-entropy over the rows of x and its gradient. `targets` holds
/// class positions (indices into model.classes).
inline LossGradient cross_entropy(const LogRegModel& model, const Matrix& x,
                                  std::span<const std::size_t> targets) {
  const auto rows = x.rows();
  Matrix logits = x * model.weights.transpose();
  logits.rowwise() += model.bias.transpose();
  Matrix p = softmax_rows(logits);
  LossGradient g;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto t = static_cast<Eigen::Index>(targets[static_cast<std::size_t>(r)]);
    // log-sum-exp form stays finite when p(r, t) underflows to zero
    const double mx = logits.row(r).maxCoeff();
    g.loss += mx + std::log((logits.row(r).array() - mx).exp().sum()) - logits(r, t);
    p(r, t) -= 1.0;
  }
  const double inv = 1.0 / static_cast<double>(rows);
  g.loss *= inv;
  p *= inv;
  g.d_weights = p.transpose() * x;
  g.d_bias = p.colwise().sum().transpose();
  return g;
}

inline std::vector<ClassId> distinct_classes(std::span<const ClassId> labels) {
  std::vector<ClassId> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

inline LogRegModel zero_model(std::vector<ClassId> classes, Eigen::Index dim) {
  LogRegModel m;
  m.weights = Matrix::Zero(static_cast<Eigen::Index>(classes.size()), dim);
  m.bias = Vector::Zero(static_cast<Eigen::Index>(classes.size()));
  m.classes = std::move(classes);
  return m;
}

inline LogRegModel train(const Matrix& x, std::span<const ClassId> labels,
                         const TrainRecipe& recipe) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw ValidationError("train: feature rows and labels differ in count");
  }
  if (recipe.batch_size == 0) throw ValidationError("train: batch size must be positive");
  auto classes = distinct_classes(labels);
  if (classes.size() < 2) throw ValidationError("train: need at least two distinct classes");
  if (!x.allFinite()) throw ValidationError("train: non-finite feature value");

  const std::size_t count = labels.size();
  std::vector<std::size_t> targets(count);
  for (std::size_t i = 0; i < count; ++i) {
    targets[i] = static_cast<std::size_t>(
        std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin());
  }

  LogRegModel model = zero_model(std::move(classes), x.cols());
  std::vector<std::size_t> order(count);
  std::vector<std::size_t> batch_targets;
  Matrix batch;
  const std::size_t steps_per_epoch = (count + recipe.batch_size - 1) / recipe.batch_size;

  for (std::size_t epoch = 0; epoch < recipe.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(recipe.shuffle_seed, {epoch}));
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::size_t begin = step * recipe.batch_size;
      const std::size_t end = std::min(count, begin + recipe.batch_size);
      batch.resize(static_cast<Eigen::Index>(end - begin), x.cols());
      batch_targets.resize(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        batch.row(Eigen::Index(i - begin)) = x.row(Eigen::Index(order[i]));
        batch_targets[i - begin] = targets[order[i]];
      }
      const auto g = cross_entropy(model, batch, batch_targets);
      if (!std::isfinite(g.loss)) {
        throw PipelineError("train: non-finite loss at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(step));
      }
      model.weights.noalias() -= recipe.learning_rate * g.d_weights;
      model.bias.noalias() -= recipe.learning_rate * g.d_bias;
    }
  }
  return model;
}

inline LogRegModel train(const AugmentedSet& data, const TrainRecipe& recipe) {
  return train(data.features, data.labels, recipe);
}

/// Softmax over W x + b; argmax with ties going to the earliest class.
template <typename Derived>
Prediction predict(const LogRegModel& model, const Eigen::MatrixBase<Derived>& features) {
  if (features.size() != model.weights.cols()) {
    throw ValidationError("predict: feature length " + std::to_string(features.size()) +
                          " does not match model dimension " +
                          std::to_string(model.weights.cols()));
  }
  Vector logits = model.weights * features + model.bias;
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i) {
    if (logits(i) > logits(best)) best = i;
  }
  Prediction p;
  p.class_id = model.classes[static_cast<std::size_t>(best)];
  p.probabilities = (logits.array() - logits(best)).exp();
  p.probabilities /= p.probabilities.sum();
  return p;
}

/// Fraction of rows of `query` whose predicted class equals the label.
inline double accuracy(const LogRegModel& model, const Matrix& query,
                       std::span<const ClassId> labels) {
  if (labels.empty()) throw ValidationError("accuracy: empty query set");
  if (static_cast<std::size_t>(query.rows()) != labels.size()) {
    throw ValidationError("accuracy: query rows and labels differ in count");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predict(model, query.row(Eigen::Index(i)).transpose()).class_id == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace gdc
