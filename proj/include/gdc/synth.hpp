#pragma once

// Synthetic Gaussian worlds with known class distributions. Validation and
// novel classes are placed next to a parent base class, so borrowing base
// statistics is genuinely informative and its effect can be measured.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gdc/common.hpp"
#include "gdc/dataset.hpp"
#include "gdc/rng.hpp"
#include "gdc/sampling.hpp"

namespace gdc {

enum class CovarianceFamily { Spherical, Diagonal, RandomSPD };

inline std::string_view to_string(CovarianceFamily f) noexcept {
  switch (f) {
    case CovarianceFamily::Spherical: return "spherical";
    case CovarianceFamily::Diagonal: return "diagonal";
    case CovarianceFamily::RandomSPD: return "random_spd";
  }
  return "unknown";
}

inline CovarianceFamily parse_covariance_family(std::string_view name) {
  if (name == "spherical") return CovarianceFamily::Spherical;
  if (name == "diagonal") return CovarianceFamily::Diagonal;
  if (name == "random_spd") return CovarianceFamily::RandomSPD;
  throw ValidationError("unknown covariance family '" + std::string(name) + "'");
}

struct SynthSpec {
  std::uint32_t dim = 16;
  std::size_t num_base = 20;
  std::size_t num_validation = 5;
  std::size_t num_novel = 5;
  std::size_t points_per_class = 200;
  /// Distance of a held-out class mean from its parent base mean, in units of
  /// the parent's per-coordinate noise scale.
  double novel_offset_scale = 0.5;
  CovarianceFamily covariance_family = CovarianceFamily::Spherical;
  /// Typical per-coordinate noise standard deviation of a class.
  double noise_scale = 0.25;
  /// Per-coordinate standard deviation of base class means.
  double mean_spread = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim == 0 || num_base == 0 || num_validation == 0 || num_novel == 0 ||
        points_per_class == 0) {
      throw ValidationError("synth: all counts must be positive");
    }
    if (!(novel_offset_scale >= 0.0)) throw ValidationError("synth: novel_offset_scale must be >= 0");
    if (!(noise_scale > 0.0) || !(mean_spread >= 0.0)) {
      throw ValidationError("synth: noise_scale must be > 0 and mean_spread >= 0");
    }
  }
};

struct TrueGaussian {
  Vector mu;
  Matrix sigma;
};

struct SynthWorld {
  FeatureDataset dataset;
  std::map<ClassId, TrueGaussian> truth;
  /// Parent base class of each validation and novel class.
  std::map<ClassId, ClassId> parent;
};

namespace detail {

inline Matrix synth_covariance(CovarianceFamily family, Eigen::Index d, double scale, Rng& rng) {
  const double var = scale * scale;
  switch (family) {
    case CovarianceFamily::Spherical: {
      const double s = 0.75 + 0.5 * rng.uniform();
      return (var * s * s) * Matrix::Identity(d, d);
    }
    case CovarianceFamily::Diagonal: {
      Vector diag(d);
      for (Eigen::Index i = 0; i < d; ++i) diag(i) = var * (0.5 + rng.uniform());
      return diag.asDiagonal();
    }
    case CovarianceFamily::RandomSPD: {
      Matrix a(d, d);
      for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) a(r, c) = rng.normal();
      }
      Matrix s = a * a.transpose() / static_cast<double>(d) + 0.1 * Matrix::Identity(d, d);
      return var * s;
    }
  }
  return Matrix::Identity(d, d);
}

}  // namespace detail

/// Class ids: base 0..B-1, validation B..B+V-1, novel B+V..B+V+N-1. Each
/// held-out class picks a parent base class (distinct while base classes last),
/// takes parent mean + offset_scale * parent_noise * u as its mean (u a uniform
/// random unit vector), and the parent covariance as its covariance.
inline SynthWorld generate(const SynthSpec& spec) {
  spec.validate();
  const Eigen::Index d = spec.dim;
  Rng rng(derive_seed(spec.seed, {0x5e7714U}));

  std::map<ClassId, TrueGaussian> truth;
  std::map<ClassId, ClassId> parent;
  SplitManifest manifest;
  for (std::size_t b = 0; b < spec.num_base; ++b) {
    TrueGaussian g;
    g.mu.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) g.mu(i) = spec.mean_spread * rng.normal();
    g.sigma = detail::synth_covariance(spec.covariance_family, d, spec.noise_scale, rng);
    truth[static_cast<ClassId>(b)] = std::move(g);
    manifest.base.insert(static_cast<ClassId>(b));
  }

  std::vector<ClassId> parents(spec.num_base);
  std::iota(parents.begin(), parents.end(), ClassId{0});
  rng.shuffle(std::span<ClassId>(parents));
  const std::size_t held_out = spec.num_validation + spec.num_novel;
  for (std::size_t h = 0; h < held_out; ++h) {
    const auto id = static_cast<ClassId>(spec.num_base + h);
    const ClassId p = parents[h % parents.size()];
    const TrueGaussian& pg = truth.at(p);
    const double parent_noise = std::sqrt(pg.sigma.diagonal().mean());
    TrueGaussian g;
    Vector u(d);
    for (Eigen::Index i = 0; i < d; ++i) u(i) = rng.normal();
    g.mu = pg.mu + (spec.novel_offset_scale * parent_noise / u.norm()) * u;
    g.sigma = pg.sigma;
    truth[id] = std::move(g);
    parent[id] = p;
    (h < spec.num_validation ? manifest.validation : manifest.novel).insert(id);
  }

  const std::size_t total = truth.size() * spec.points_per_class;
  std::vector<ClassId> labels;
  labels.reserve(total);
  RowMatrixF features(static_cast<Eigen::Index>(total), d);
  Eigen::Index row = 0;
  for (const auto& [id, g] : truth) {
    Rng class_rng(derive_seed(spec.seed, {0xc1a55U, id}));
    const Matrix pts = sample_mvn_from_covariance(g.mu, g.sigma, spec.points_per_class, class_rng);
    features.middleRows(row, pts.rows()) = pts.cast<float>();
    row += pts.rows();
    labels.insert(labels.end(), spec.points_per_class, id);
  }
  return SynthWorld{FeatureDataset(spec.dim, std::move(labels), std::move(features),
                                   std::move(manifest)),
                    std::move(truth), std::move(parent)};
}

/// KL(N(mu1, sigma1) || N(mu2, sigma2)).
inline double kl_gaussian(const Vector& mu1, const Matrix& sigma1, const Vector& mu2,
                          const Matrix& sigma2) {
  const Eigen::Index d = mu1.size();
  Eigen::LLT<Matrix> llt2(sigma2);
  if (llt2.info() != Eigen::Success) throw ValidationError("kl_gaussian: sigma2 is singular");
  Eigen::LLT<Matrix> llt1(sigma1);
  if (llt1.info() != Eigen::Success) {
    throw ValidationError("kl_gaussian: sigma1 is not positive definite");
  }
  const Matrix l2 = llt2.matrixL();
  const Matrix l1 = llt1.matrixL();
  const double log_det2 = 2.0 * l2.diagonal().array().log().sum();
  const double log_det1 = 2.0 * l1.diagonal().array().log().sum();
  const double trace = llt2.solve(sigma1).trace();
  const Vector diff = mu2 - mu1;
  const double maha = diff.dot(llt2.solve(diff));
  return 0.5 * (trace + maha - static_cast<double>(d) + log_det2 - log_det1);
}

inline nlohmann::json truth_to_json(const std::map<ClassId, TrueGaussian>& truth) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, g] : truth) {
    nlohmann::json sigma = nlohmann::json::array();
    for (Eigen::Index r = 0; r < g.sigma.rows(); ++r) {
      std::vector<double> row(g.sigma.cols());
      for (Eigen::Index c = 0; c < g.sigma.cols(); ++c) row[std::size_t(c)] = g.sigma(r, c);
      sigma.push_back(row);
    }
    j[std::to_string(id)] = {{"mu", std::vector<double>(g.mu.data(), g.mu.data() + g.mu.size())},
                             {"sigma", sigma}};
  }
  return j;
}

inline std::map<ClassId, TrueGaussian> truth_from_json(const nlohmann::json& j) {
  std::map<ClassId, TrueGaussian> out;
  for (const auto& [key, value] : j.items()) {
    TrueGaussian g;
    const auto mu = value.at("mu").get<std::vector<double>>();
    g.mu = Eigen::Map<const Vector>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    const auto& rows = value.at("sigma");
    g.sigma.resize(g.mu.size(), g.mu.size());
    for (Eigen::Index r = 0; r < g.mu.size(); ++r) {
      for (Eigen::Index c = 0; c < g.mu.size(); ++c) {
        g.sigma(r, c) = rows.at(std::size_t(r)).at(std::size_t(c)).get<double>();
      }
    }
    out[static_cast<ClassId>(std::stoul(key))] = std::move(g);
  }
  return out;
}

}  // namespace gdc
