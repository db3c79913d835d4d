#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gdc/binio.hpp"
#include "gdc/calibrate.hpp"
#include "gdc/common.hpp"
#include "gdc/parallel.hpp"
#include "gdc/rng.hpp"
#include "gdc/stats.hpp"

namespace gdc {

enum class Origin : std::uint8_t { Support = 0, Sampled = 1 };

/// Support points followed by the samples drawn around each of them, grouped
/// by support index. Rows of `features` are points.
struct AugmentedSet {
  Matrix features;
  std::vector<ClassId> labels;
  std::vector<Origin> origins;

  Eigen::Index dim() const noexcept { return features.cols(); }
  std::size_t size() const noexcept { return labels.size(); }
};

/// First jitter factor tried when the covariance is not positive definite; it
/// grows tenfold per attempt up to kJitterMax. The added ridge is factor * mean diagonal.
inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterMax = 1e-2;

/// Lower Cholesky factor of sigma, repairing near-singular input with a ridge.
/// A zero matrix yields a zero factor.
inline Matrix covariance_factor(const Matrix& sigma) {
  const Eigen::Index d = sigma.rows();
  if ((sigma.array() == 0.0).all()) return Matrix::Zero(d, d);
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double s1 = sigma.diagonal().mean();
  if (s1 > 0.0) {
    for (double eps = kJitterStart; eps <= kJitterMax * (1.0 + 1e-9); eps *= 10.0) {
      llt.compute(sigma + eps * s1 * Matrix::Identity(d, d));
      if (llt.info() == Eigen::Success) return llt.matrixL();
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
  std::ostringstream msg;
  msg << "covariance is not positive definite after jitter repair (smallest eigenvalue "
      << eig.eigenvalues().minCoeff() << ", mean diagonal " << s1 << ")";
  throw PipelineError(msg.str());
}

/// n rows drawn from N(mu, L L^T) as mu + L z, z filled row by row from `rng`.
inline Matrix sample_mvn(const Vector& mu, const Matrix& factor, std::size_t n, Rng& rng) {
  const Eigen::Index d = mu.size();
  Matrix z(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index c = 0; c < d; ++c) z(r, c) = rng.normal();
  }
  Matrix out = z * factor.transpose();
  out.rowwise() += mu.transpose();
  return out;
}

inline Matrix sample_mvn_from_covariance(const Vector& mu, const Matrix& sigma, std::size_t n,
                                         Rng& rng) {
  if (sigma.rows() != mu.size() || sigma.cols() != mu.size()) {
    throw ValidationError("sample_mvn: covariance shape does not match mean");
  }
  return sample_mvn(mu, covariance_factor(sigma), n, rng);
}

/// Key of the random stream used for the samples around one support point.
inline std::uint64_t support_stream(std::uint64_t seed, std::uint64_t task_key,
                                     std::size_t support_index) {
  return derive_seed(seed, {task_key, static_cast<std::uint64_t>(support_index)});
}

/// Calibrates every support point (rows of `support`, already transformed),
/// draws config.n_samples points around each, and returns the union with the
/// support set. Output is identical for any worker count.
inline AugmentedSet augment_task(const Matrix& support, std::span<const ClassId> labels,
                                 std::span<const ClassStats> base_stats, const GdcConfig& config,
                                 std::uint64_t task_key, std::size_t workers = 1) {
  if (static_cast<std::size_t>(support.rows()) != labels.size()) {
    throw ValidationError("augment_task: support rows and labels differ in count");
  }
  const std::size_t count = labels.size();
  const std::size_t n = config.n_samples;
  const Eigen::Index d = support.cols();

  AugmentedSet out;
  out.features.resize(static_cast<Eigen::Index>(count * (1 + n)), d);
  out.labels.resize(count * (1 + n));
  out.origins.resize(count * (1 + n), Origin::Sampled);
  out.features.topRows(static_cast<Eigen::Index>(count)) = support;
  for (std::size_t i = 0; i < count; ++i) {
    out.labels[i] = labels[i];
    out.origins[i] = Origin::Support;
  }
  if (n == 0) return out;

  parallel_for(count, workers, [&](std::size_t j) {
    const auto dist = calibrate_support_point(support.row(Eigen::Index(j)).transpose(), base_stats,
                                              config, j);
    Rng rng(support_stream(config.seed, task_key, j));
    const auto first = static_cast<Eigen::Index>(count + j * n);
    out.features.middleRows(first, static_cast<Eigen::Index>(n)) =
        sample_mvn_from_covariance(dist.mu_prime, dist.sigma_prime_s, n, rng);
    for (std::size_t r = 0; r < n; ++r) out.labels[count + j * n + r] = labels[j];
  });
  return out;
}

// Augmented-set dump: the feature file layout under magic "GDCA", with one
// origin byte (0 = support, 1 = sampled) after each record's features.
inline constexpr std::string_view kAugmentedMagic = "GDCA";
inline constexpr std::uint32_t kAugmentedVersion = 1;

inline void write_augmented(const AugmentedSet& set, const std::filesystem::path& path) {
  binio::ByteWriter w;
  w.header(kAugmentedMagic, kAugmentedVersion, static_cast<std::uint32_t>(set.dim()), set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    w.u32(set.labels[i]);
    for (Eigen::Index c = 0; c < set.dim(); ++c) {
      w.f32(static_cast<float>(set.features(Eigen::Index(i), c)));
    }
    w.u8(static_cast<std::uint8_t>(set.origins[i]));
  }
  w.save(path);
}

inline AugmentedSet read_augmented(const std::filesystem::path& path) {
  auto in = binio::ByteReader::from_file(path);
  const auto h = binio::read_header(in, kAugmentedMagic, kAugmentedVersion,
                                    [](std::uint64_t d) { return 4 + 4 * d + 1; });
  AugmentedSet set;
  set.features.resize(static_cast<Eigen::Index>(h.count), h.dim);
  set.labels.resize(h.count);
  set.origins.resize(h.count);
  for (std::uint64_t i = 0; i < h.count; ++i) {
    set.labels[i] = in.u32();
    for (std::uint32_t c = 0; c < h.dim; ++c) set.features(Eigen::Index(i), c) = in.f32();
    const std::size_t at = in.offset();
    const auto origin = in.u8();
    if (origin > 1) in.fail_at(at, "bad origin byte " + std::to_string(origin));
    set.origins[i] = static_cast<Origin>(origin);
  }
  return set;
}

}  // namespace gdc
