#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

namespace gdc {
namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.dim = 4;
  s.num_base = 6;
  s.num_validation = 2;
  s.num_novel = 3;
  s.points_per_class = 30;
  s.seed = 5;
  return s;
}

TEST(Synth, GenerationIsDeterministic) {
  const auto a = generate(small_spec());
  const auto b = generate(small_spec());
  EXPECT_TRUE(a.dataset == b.dataset);
  auto other = small_spec();
  other.seed = 6;
  EXPECT_FALSE(generate(other).dataset == a.dataset);
}

TEST(Synth, ClassLayoutMatchesRequestedCounts) {
  const auto w = generate(small_spec());
  EXPECT_EQ(w.dataset.manifest().base.size(), 6U);
  EXPECT_EQ(w.dataset.manifest().validation.size(), 2U);
  EXPECT_EQ(w.dataset.manifest().novel.size(), 3U);
  EXPECT_EQ(w.dataset.size(), 11U * 30U);
  std::set<ClassId> parents;
  for (const auto& [id, p] : w.parent) {
    EXPECT_TRUE(w.dataset.manifest().base.contains(p));
    parents.insert(p);
  }
  EXPECT_EQ(parents.size(), 5U);  // distinct while base classes last
}

TEST(Synth, ZeroOffsetCopiesTheParent) {
  auto s = small_spec();
  s.novel_offset_scale = 0.0;
  const auto w = generate(s);
  for (const auto& [id, p] : w.parent) {
    EXPECT_EQ(w.truth.at(id).mu, w.truth.at(p).mu);
    EXPECT_EQ(w.truth.at(id).sigma, w.truth.at(p).sigma);
  }
}

TEST(Synth, OffsetHasTheRequestedLength) {
  auto s = small_spec();
  s.novel_offset_scale = 0.5;
  const auto w = generate(s);
  for (const auto& [id, p] : w.parent) {
    const double noise = std::sqrt(w.truth.at(p).sigma.diagonal().mean());
    EXPECT_NEAR((w.truth.at(id).mu - w.truth.at(p).mu).norm(), 0.5 * noise, 1e-12);
  }
}

TEST(Synth, SampleMomentsMatchTruth) {
  for (auto family : {CovarianceFamily::Spherical, CovarianceFamily::Diagonal,
                      CovarianceFamily::RandomSPD}) {
    auto s = small_spec();
    s.num_base = 2;
    s.num_validation = 1;
    s.num_novel = 1;
    s.points_per_class = 5000;
    s.covariance_family = family;
    const auto w = generate(s);
    for (const auto& [id, rows] : w.dataset.partition(Split::Base).members) {
      Matrix x(static_cast<Eigen::Index>(rows.size()), 4);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        x.row(Eigen::Index(r)) = w.dataset.row(rows[r]).cast<double>();
      }
      const auto m = class_moments(id, x);
      const auto& t = w.truth.at(id);
      for (Eigen::Index i = 0; i < 4; ++i) {
        EXPECT_LE(std::abs(m.mu(i) - t.mu(i)), 5.0 * std::sqrt(t.sigma(i, i) / 5000.0));
        for (Eigen::Index j = 0; j < 4; ++j) {
          const double se =
              std::sqrt((t.sigma(i, i) * t.sigma(j, j) + t.sigma(i, j) * t.sigma(i, j)) / 5000.0);
          EXPECT_LE(std::abs(m.sigma(i, j) - t.sigma(i, j)), 5.0 * se);
        }
      }
    }
  }
}

TEST(Synth, KlFixtures) {
  const Matrix one = Matrix::Identity(1, 1);
  EXPECT_NEAR(kl_gaussian(Vector{{0.0}}, one, Vector{{1.0}}, one), 0.5, 1e-15);
  EXPECT_NEAR(kl_gaussian(Vector{{0.0}}, one, Vector{{0.0}}, one), 0.0, 1e-15);
  // KL(N(0,1) || N(0,4)) = 0.5 (1/4 - 1 + ln 4)
  EXPECT_NEAR(kl_gaussian(Vector{{0.0}}, one, Vector{{0.0}}, 4 * one),
              0.5 * (0.25 - 1.0 + std::log(4.0)), 1e-15);
  const double forward = kl_gaussian(Vector{{0.0}}, one, Vector{{0.0}}, 4 * one);
  const double backward = kl_gaussian(Vector{{0.0}}, 4 * one, Vector{{0.0}}, one);
  EXPECT_NE(forward, backward);
  EXPECT_NEAR(backward, 0.5 * (4.0 - 1.0 - std::log(4.0)), 1e-15);
}

TEST(Synth, KlIsNonNegative) {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    Matrix a(3, 3), b(3, 3);
    Vector m1(3), m2(3);
    for (int i = 0; i < 3; ++i) {
      m1(i) = rng.normal();
      m2(i) = rng.normal();
      for (int j = 0; j < 3; ++j) {
        a(i, j) = rng.normal();
        b(i, j) = rng.normal();
      }
    }
    const Matrix s1 = a * a.transpose() + 0.1 * Matrix::Identity(3, 3);
    const Matrix s2 = b * b.transpose() + 0.1 * Matrix::Identity(3, 3);
    EXPECT_GE(kl_gaussian(m1, s1, m2, s2), -1e-10);
  }
}

TEST(Synth, TruthJsonRoundTrip) {
  const auto w = generate(small_spec());
  const auto back = truth_from_json(nlohmann::json::parse(truth_to_json(w.truth).dump()));
  ASSERT_EQ(back.size(), w.truth.size());
  for (const auto& [id, g] : w.truth) {
    EXPECT_EQ(back.at(id).mu, g.mu);
    EXPECT_EQ(back.at(id).sigma, g.sigma);
  }
}

TEST(Synth, SpecValidation) {
  auto s = small_spec();
  s.dim = 0;
  EXPECT_THROW(generate(s), ValidationError);
  s = small_spec();
  s.noise_scale = 0.0;
  EXPECT_THROW(generate(s), ValidationError);
}

}  // namespace
}  // namespace gdc
