#pragma once

// Distance-weighted calibration of a novel class distribution from the
// statistics of its nearest base classes, followed by covariance shrinkage.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gdc/common.hpp"
#include "gdc/stats.hpp"

namespace gdc {

/// How the covariance of the weighted variable X' is formed from base covariances.
enum class CovMode {
  WeightedAverage,  ///< sum(w_i * Sigma_i) / sum(w_i)
  IndependentSum,   ///< sum(w_i^2 * Sigma_i) / (1 + sum(w_i))^2
};

inline std::string_view to_string(CovMode m) noexcept {
  return m == CovMode::WeightedAverage ? "weighted_average" : "independent_sum";
}

inline CovMode parse_cov_mode(std::string_view name) {
  if (name == "weighted_average") return CovMode::WeightedAverage;
  if (name == "independent_sum") return CovMode::IndependentSum;
  throw ValidationError("unknown covariance mode '" + std::string(name) + "'");
}

struct GdcConfig {
  double beta = 1.0;
  double m = 1.0;
  std::size_t k = 2;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  std::size_t n_samples = 0;
  DistanceMetric metric{};
  CovMode cov_mode = CovMode::WeightedAverage;
  std::uint64_t seed = 0;

  void validate(std::size_t num_base_classes) const {
    if (!std::isfinite(beta)) throw ValidationError("beta must be finite");
    if (!(m >= 0.0)) throw ValidationError("m must be >= 0");
    if (k < 1 || k > num_base_classes) {
      throw ValidationError("k=" + std::to_string(k) + " must lie in [1, " +
                            std::to_string(num_base_classes) + "]");
    }
    if (!(alpha1 >= 0.0)) throw ValidationError("alpha1 must be >= 0");
    if (!(alpha2 >= 0.0)) throw ValidationError("alpha2 must be >= 0");
    metric.validate();
  }

  bool operator==(const GdcConfig& o) const {
    return beta == o.beta && m == o.m && k == o.k && alpha1 == o.alpha1 && alpha2 == o.alpha2 &&
           n_samples == o.n_samples && metric.kind == o.metric.kind &&
           metric.delta == o.metric.delta && cov_mode == o.cov_mode && seed == o.seed;
  }
};

struct CalibratedDistribution {
  Vector mu_prime;
  Matrix sigma_prime_s;
  std::size_t source_support_index = 0;
  std::vector<std::pair<ClassId, double>> weights;
};

/// w_i = 1 / (1 + d_i^m), with 0^0 taken as 1.
inline std::vector<double> weights(std::span<const double> distances, double m) {
  std::vector<double> w;
  w.reserve(distances.size());
  for (double d : distances) {
    if (!(d >= 0.0)) throw ValidationError("weights: negative distance");
    w.push_back(1.0 / (1.0 + std::pow(d, m)));
  }
  return w;
}

struct Moments {
  Vector mu;
  Matrix sigma;
};

/// Mean and covariance of X' = (x + sum w_i X_i) / (1 + sum w_i).
template <typename Derived>
Moments calibrated_moments(const Eigen::MatrixBase<Derived>& x_tilde,
                           std::span<const ClassStats* const> selected,
                           std::span<const double> w, CovMode mode) {
  if (selected.empty()) throw ValidationError("calibrated_moments: empty selection");
  if (selected.size() != w.size()) {
    throw ValidationError("calibrated_moments: selection and weight counts differ");
  }
  const Eigen::Index d = x_tilde.size();
  double w_sum = 0.0;
  Vector mu = x_tilde;
  Matrix sigma = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const ClassStats& s = *selected[i];
    w_sum += w[i];
    mu.noalias() += w[i] * s.mu;
    sigma.noalias() += (mode == CovMode::WeightedAverage ? w[i] : w[i] * w[i]) * s.sigma;
  }
  mu /= 1.0 + w_sum;
  if (mode == CovMode::WeightedAverage) {
    sigma /= w_sum;
  } else {
    sigma /= (1.0 + w_sum) * (1.0 + w_sum);
  }
  return {std::move(mu), std::move(sigma)};
}

/// sigma + alpha1 * s1 * I + alpha2 * s2 * (ones - I), where s1 and s2 are the
/// mean diagonal and mean off-diagonal entries of sigma.
inline Matrix shrink(const Matrix& sigma, double alpha1, double alpha2) {
  const Eigen::Index d = sigma.rows();
  const double diag_sum = sigma.diagonal().sum();
  const double s1 = diag_sum / static_cast<double>(d);
  const double s2 = d > 1 ? (sigma.sum() - diag_sum) / static_cast<double>(d * d - d) : 0.0;
  Matrix out = sigma;
  const double off = alpha2 * s2;
  const double on = alpha1 * s1;
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) out(r, c) += r == c ? on : off;
  }
  return out;
}

/// top_k, weights, calibrated moments and shrinkage for one transformed support point.
template <typename Derived>
CalibratedDistribution calibrate_support_point(const Eigen::MatrixBase<Derived>& x_tilde,
                                               std::span<const ClassStats> base_stats,
                                               const GdcConfig& config,
                                               std::size_t support_index = 0) {
  const auto nearest = top_k(x_tilde, base_stats, config.k, config.metric);
  std::vector<double> dist;
  std::vector<const ClassStats*> selected;
  for (const auto& n : nearest) {
    dist.push_back(n.distance);
    selected.push_back(&base_stats[n.index]);
  }
  // MahalanobisLog distances may be negative; weights are defined on d >= 0.
  if (config.metric.kind == MetricKind::MahalanobisLog) {
    for (double& d : dist) d = std::max(d, 0.0);
  }
  const auto w = weights(dist, config.m);
  auto moments = calibrated_moments(x_tilde, selected, w, config.cov_mode);
  CalibratedDistribution out;
  out.mu_prime = std::move(moments.mu);
  out.sigma_prime_s = shrink(moments.sigma, config.alpha1, config.alpha2);
  out.source_support_index = support_index;
  for (std::size_t i = 0; i < nearest.size(); ++i) out.weights.emplace_back(nearest[i].class_id, w[i]);
  return out;
}

}  // namespace gdc
