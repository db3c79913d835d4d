#pragma once

// Gaussianizing power transforms. Tukey's ladder is used when every feature
// value in the dataset is non-negative, Yeo-Johnson otherwise.

#include <cmath>
#include <string>
#include <string_view>

#include "gdc/common.hpp"
#include "gdc/dataset.hpp"

namespace gdc {

enum class TransformKind { Tukey, YeoJohnson };

inline std::string_view to_string(TransformKind k) noexcept {
  return k == TransformKind::Tukey ? "tukey" : "yeo_johnson";
}

struct TransformChoice {
  TransformKind kind = TransformKind::Tukey;
  double beta = 1.0;
};

/// Offset applied inside log() when Tukey's beta is zero, so exact zeros
/// (common after relu) map to a finite value.
inline constexpr double kTukeyLogEpsilon = 1e-12;

inline TransformKind select_transform(const FeatureDataset& ds) {
  if (ds.size() == 0) throw ValidationError("select_transform: empty dataset");
  return (ds.features().array() >= 0.0F).all() ? TransformKind::Tukey
                                                 : TransformKind::YeoJohnson;
}

inline double tukey(double x, double beta) {
  if (!(x >= 0.0)) {
    throw ValidationError("tukey: negative input " + std::to_string(x));
  }
  if (beta == 0.0) return std::log(x == 0.0 ? x + kTukeyLogEpsilon : x);
  if (beta == 1.0) return x;
  return std::pow(x, beta);
}

inline double yeo_johnson(double x, double beta) {
  if (x >= 0.0) {
    if (beta == 0.0) return std::log1p(x);
    return (std::pow(x + 1.0, beta) - 1.0) / beta;
  }
  if (beta == 2.0) return -std::log1p(-x);
  return -(std::pow(-x + 1.0, 2.0 - beta) - 1.0) / (2.0 - beta);
}

template <typename Derived>
Vector tukey(const Eigen::MatrixBase<Derived>& x, double beta) {
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = static_cast<double>(x(i));
    if (!(v >= 0.0)) {
      throw ValidationError("tukey: negative input " + std::to_string(v) + " at index " +
                            std::to_string(i));
    }
    out(i) = tukey(v, beta);
  }
  return out;
}

template <typename Derived>
Vector yeo_johnson(const Eigen::MatrixBase<Derived>& x, double beta) {
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = yeo_johnson(static_cast<double>(x(i)), beta);
  return out;
}

template <typename Derived>
Vector apply_transform(const Eigen::MatrixBase<Derived>& x, const TransformChoice& choice) {
  return choice.kind == TransformKind::Tukey ? tukey(x, choice.beta)
                                             : yeo_johnson(x, choice.beta);
}

/// Row-wise transform of a whole matrix (rows are points).
template <typename Derived>
Matrix apply_transform_rows(const Eigen::MatrixBase<Derived>& rows, const TransformChoice& choice) {
  Matrix out(rows.rows(), rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    out.row(r) = apply_transform(rows.row(r).transpose(), choice).transpose();
  }
  return out;
}

/// Same dataset with every feature vector transformed (stored back as f32).
inline FeatureDataset apply_transform(const FeatureDataset& ds, const TransformChoice& choice) {
  RowMatrixF out = apply_transform_rows(ds.features(), choice).cast<float>();
  return FeatureDataset(ds.dim(), ds.labels(), std::move(out), ds.manifest());
}

}  // namespace gdc
