#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gdc/binio.hpp"
#include "gdc/common.hpp"
#include "gdc/dataset.hpp"
#include "gdc/transforms.hpp"

namespace gdc {

/// First and second moments of one base class in transformed feature space.
struct ClassStats {
  ClassId class_id = 0;
  Vector mu;
  Matrix sigma;
  std::size_t count = 0;
};

enum class MetricKind { SquaredEuclidean, MahalanobisLog, SquaredDelta };

inline std::string_view to_string(MetricKind k) noexcept {
  switch (k) {
    case MetricKind::SquaredEuclidean: return "squared_euclidean";
    case MetricKind::MahalanobisLog: return "mahalanobis_log";
    case MetricKind::SquaredDelta: return "squared_delta";
  }
  return "unknown";
}

inline MetricKind parse_metric(std::string_view name) {
  if (name == "squared_euclidean") return MetricKind::SquaredEuclidean;
  if (name == "mahalanobis_log") return MetricKind::MahalanobisLog;
  if (name == "squared_delta") return MetricKind::SquaredDelta;
  throw ValidationError("unknown distance metric '" + std::string(name) + "'");
}

struct DistanceMetric {
  MetricKind kind = MetricKind::SquaredEuclidean;
  double delta = 1.0;

  void validate() const {
    if (kind == MetricKind::SquaredDelta && !(delta > 0.0)) {
      throw ValidationError("squared_delta metric needs delta > 0");
    }
  }
};

/// Mean and unbiased covariance (divisor count-1) of the given rows, two-pass.
/// A single row gives a zero covariance.
inline ClassStats class_moments(ClassId id, const Matrix& rows) {
  if (rows.rows() == 0) throw ValidationError("class " + std::to_string(id) + " has no points");
  ClassStats s;
  s.class_id = id;
  s.count = static_cast<std::size_t>(rows.rows());
  s.mu = rows.colwise().mean().transpose();
  if (s.count == 1) {
    s.sigma = Matrix::Zero(rows.cols(), rows.cols());
    return s;
  }
  const Matrix centered = rows.rowwise() - s.mu.transpose();
  s.sigma = (centered.transpose() * centered) / static_cast<double>(s.count - 1);
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose()).eval();
  return s;
}

/// One ClassStats per base class, ascending class id, on transformed features.
inline std::vector<ClassStats> compute_base_stats(const PartitionView& base,
                                                  const TransformChoice& transform) {
  const FeatureDataset& ds = *base.dataset;
  std::vector<ClassStats> out;
  out.reserve(base.classes.size());
  for (ClassId id : base.classes) {
    const auto& rows = base.members.at(id);
    Matrix x(static_cast<Eigen::Index>(rows.size()), ds.dim());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      x.row(Eigen::Index(r)) = apply_transform(ds.row(rows[r]).transpose(), transform).transpose();
    }
    out.push_back(class_moments(id, x));
  }
  return out;
}

namespace detail {

/// Ridge added to a singular covariance before inversion: 1e-6 * mean diagonal.
inline Eigen::LDLT<Matrix> invertible_factor(const Matrix& sigma, ClassId id) {
  Eigen::LDLT<Matrix> ldlt(sigma);
  auto usable = [](const Eigen::LDLT<Matrix>& f) {
    return f.info() == Eigen::Success && f.isPositive() && (f.vectorD().array() > 0.0).all();
  };
  if (usable(ldlt)) return ldlt;
  const double mean_diag = sigma.diagonal().mean();
  if (mean_diag > 0.0) {
    const Matrix ridged =
        sigma + 1e-6 * mean_diag * Matrix::Identity(sigma.rows(), sigma.cols());
    ldlt.compute(ridged);
    if (usable(ldlt)) return ldlt;
  }
  throw PipelineError("mahalanobis_log: covariance of class " + std::to_string(id) +
                      " is singular after ridge repair");
}

}  // namespace detail

template <typename Derived>
double distance(const Eigen::MatrixBase<Derived>& x_tilde, const ClassStats& stats,
                const DistanceMetric& metric) {
  if (x_tilde.size() != stats.mu.size()) {
    throw ValidationError("distance: dimension mismatch");
  }
  switch (metric.kind) {
    case MetricKind::SquaredEuclidean:
      return (x_tilde - stats.mu).squaredNorm();
    case MetricKind::SquaredDelta:
      return (x_tilde - metric.delta * stats.mu).squaredNorm();
    case MetricKind::MahalanobisLog: {
      const auto ldlt = detail::invertible_factor(stats.sigma, stats.class_id);
      const Vector diff = x_tilde - stats.mu;
      const double log_det = ldlt.vectorD().array().log().sum();
      return log_det + diff.dot(ldlt.solve(diff));
    }
  }
  return 0.0;
}

struct Neighbor {
  ClassId class_id = 0;
  double distance = 0.0;
  std::size_t index = 0;  // position in the stats list passed to top_k
};

/// The k nearest classes, ascending by distance, ties by ascending class id.
template <typename Derived>
std::vector<Neighbor> top_k(const Eigen::MatrixBase<Derived>& x_tilde,
                            std::span<const ClassStats> all_stats, std::size_t k,
                            const DistanceMetric& metric) {
  if (k < 1 || k > all_stats.size()) {
    throw ValidationError("top_k: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(all_stats.size()) + "]");
  }
  std::vector<Neighbor> all;
  all.reserve(all_stats.size());
  for (std::size_t i = 0; i < all_stats.size(); ++i) {
    all.push_back({all_stats[i].class_id, distance(x_tilde, all_stats[i], metric), i});
  }
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.class_id < b.class_id);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  return all;
}

// Stats cache (little-endian):
//   "GDCS" | version u32 = 1 | dim u32 | class_count u64 |
//   class_count x [class_id u32][count u64][mu: dim x f64][lower triangle of sigma, row-major, f64]
inline constexpr std::string_view kStatsMagic = "GDCS";
inline constexpr std::uint32_t kStatsVersion = 1;

inline void write_stats_cache(std::span<const ClassStats> stats, std::uint32_t dim,
                              const std::filesystem::path& path) {
  binio::ByteWriter w;
  w.header(kStatsMagic, kStatsVersion, dim, stats.size());
  for (const auto& s : stats) {
    if (s.mu.size() != dim) throw ValidationError("stats cache: dimension mismatch");
    w.u32(s.class_id);
    w.u64(s.count);
    for (Eigen::Index i = 0; i < s.mu.size(); ++i) w.f64(s.mu(i));
    for (Eigen::Index r = 0; r < s.sigma.rows(); ++r) {
      for (Eigen::Index c = 0; c <= r; ++c) w.f64(s.sigma(r, c));
    }
  }
  w.save(path);
}

inline std::vector<ClassStats> read_stats_cache(const std::filesystem::path& path) {
  auto in = binio::ByteReader::from_file(path);
  const auto h = binio::read_header(in, kStatsMagic, kStatsVersion, [](std::uint64_t d) {
    return 4 + 8 + 8 * d + 8 * (d * (d + 1) / 2);
  });
  std::vector<ClassStats> out(h.count);
  for (auto& s : out) {
    s.class_id = in.u32();
    s.count = in.u64();
    s.mu.resize(h.dim);
    for (std::uint32_t i = 0; i < h.dim; ++i) s.mu(i) = in.f64();
    s.sigma.resize(h.dim, h.dim);
    for (std::uint32_t r = 0; r < h.dim; ++r) {
      for (std::uint32_t c = 0; c <= r; ++c) s.sigma(r, c) = s.sigma(c, r) = in.f64();
    }
  }
  return out;
}

}  // namespace gdc
