#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

namespace gdc {
namespace {

ClassStats make_stats(ClassId id, Vector mu, Matrix sigma) {
  ClassStats s;
  s.class_id = id;
  s.mu = std::move(mu);
  s.sigma = std::move(sigma);
  s.count = 10;
  return s;
}

Matrix random_symmetric(Eigen::Index d, Rng& rng) {
  Matrix a(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) a(r, c) = rng.normal();
  }
  return 0.5 * (a + a.transpose());
}

TEST(Calibrate, WeightFixtures) {
  const std::vector<double> d{0.0, 1.0, 3.0, 100.0};
  const auto w = weights(d, 2.25);
  EXPECT_EQ(w[0], 1.0);
  EXPECT_DOUBLE_EQ(w[1], 0.5);
  EXPECT_NEAR(w[3], 3.162177663330557e-05, 1e-18);
  EXPECT_EQ(weights(std::vector<double>{0.0}, 0.0)[0], 0.5);  // 0^0 = 1
  EXPECT_THROW(weights(std::vector<double>{-1.0}, 1.0), ValidationError);
}

TEST(Calibrate, WeightsAreBoundedAndDecreasing) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double m = 0.1 + 3.0 * rng.uniform();
    const double a = 10.0 * rng.uniform();
    const double b = a + 0.01 + rng.uniform();
    const auto w = weights(std::vector<double>{a, b}, m);
    EXPECT_GT(w[0], 0.0);
    EXPECT_LE(w[0], 1.0);
    EXPECT_GT(w[0], w[1]);
  }
}

TEST(Calibrate, OneDimensionalFixture) {
  // x = 0, one base class at mean 2 with d = 4, m = 1: w = 0.2 and mu' = 0.4 / 1.2.
  const ClassStats s = make_stats(0, Vector{{2.0}}, Matrix::Constant(1, 1, 3.0));
  const ClassStats* sel[] = {&s};
  const auto w = weights(std::vector<double>{4.0}, 1.0);
  const auto mom = calibrated_moments(Vector{{0.0}}, sel, w, CovMode::WeightedAverage);
  EXPECT_NEAR(mom.mu(0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(mom.sigma(0, 0), 3.0, 1e-15);
}

TEST(Calibrate, MeanIsConvexCombination) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index d = 3;
    std::vector<ClassStats> stats;
    for (int i = 0; i < 4; ++i) {
      stats.push_back(make_stats(ClassId(i), Vector::Random(d) * 5.0, Matrix::Identity(d, d)));
    }
    const Vector x = Vector::Random(d);
    std::vector<double> dist;
    std::vector<const ClassStats*> sel;
    for (const auto& s : stats) {
      dist.push_back((x - s.mu).squaredNorm());
      sel.push_back(&s);
    }
    const auto w = weights(dist, 1.0 + rng.uniform());
    const double total = 1.0 + std::accumulate(w.begin(), w.end(), 0.0);
    double coeff_sum = 1.0 / total;
    Vector direct = x / total;
    for (std::size_t i = 0; i < w.size(); ++i) {
      coeff_sum += w[i] / total;
      direct += (w[i] / total) * stats[i].mu;
    }
    EXPECT_NEAR(coeff_sum, 1.0, 1e-12);
    const auto mom = calibrated_moments(x, sel, w, CovMode::WeightedAverage);
    EXPECT_TRUE(mom.mu.isApprox(direct, 1e-12));
  }
}

TEST(Calibrate, SaturatesAtSupportPointForLargeM) {
  Rng rng(3);
  std::vector<ClassStats> stats;
  for (int i = 0; i < 5; ++i) {
    Vector mu = Vector::Zero(4);
    mu(i % 4) = 2.0 + i;  // every squared distance from the origin is >= 4
    stats.push_back(make_stats(ClassId(i), mu, Matrix::Identity(4, 4)));
  }
  GdcConfig c;
  c.m = 10.0;
  c.k = 3;
  const Vector x = Vector::Zero(4);
  const auto out = calibrate_support_point(x, std::span<const ClassStats>(stats), c);
  const double nearest = std::sqrt(4.0);
  EXPECT_LE((out.mu_prime - x).norm(), 1e-3 * nearest);
}

TEST(Calibrate, UnitWeightsReduceToPlainAverage) {
  // With every weight 1 the calibrated mean is (x + sum mu) / (1 + k).
  std::vector<ClassStats> stats;
  Rng rng(4);
  for (int i = 0; i < 3; ++i) {
    stats.push_back(make_stats(ClassId(i), Vector::Random(2), Matrix::Identity(2, 2)));
  }
  const Vector x = Vector::Random(2);
  std::vector<const ClassStats*> sel{&stats[0], &stats[1], &stats[2]};
  const std::vector<double> ones(3, 1.0);
  const auto mom = calibrated_moments(x, sel, ones, CovMode::WeightedAverage);
  const Vector direct = (x + stats[0].mu + stats[1].mu + stats[2].mu) / 4.0;
  EXPECT_TRUE(mom.mu.isApprox(direct, 1e-14));
}

TEST(Calibrate, CovarianceModes) {
  const ClassStats a = make_stats(0, Vector::Zero(1), Matrix::Constant(1, 1, 2.0));
  const ClassStats b = make_stats(1, Vector::Zero(1), Matrix::Constant(1, 1, 6.0));
  std::vector<const ClassStats*> sel{&a, &b};
  const std::vector<double> w{0.5, 0.25};
  const auto avg = calibrated_moments(Vector::Zero(1), sel, w, CovMode::WeightedAverage);
  EXPECT_NEAR(avg.sigma(0, 0), (0.5 * 2 + 0.25 * 6) / 0.75, 1e-14);
  const auto ind = calibrated_moments(Vector::Zero(1), sel, w, CovMode::IndependentSum);
  EXPECT_NEAR(ind.sigma(0, 0), (0.25 * 2 + 0.0625 * 6) / (1.75 * 1.75), 1e-14);
}

TEST(Calibrate, ShrinkFixtures) {
  Matrix s(2, 2);
  s << 2, 1, 1, 2;
  Matrix e(2, 2);
  e << 4, 2, 2, 4;
  EXPECT_TRUE(shrink(s, 1.0, 1.0).isApprox(e));
  const Matrix four = 4.0 * Matrix::Identity(3, 3);
  Matrix e2 = four;
  e2.diagonal().array() += 2.0;
  EXPECT_TRUE(shrink(four, 0.5, 7.0).isApprox(e2));  // zero off-diagonal mean
  EXPECT_EQ(shrink(Matrix::Constant(1, 1, 3.0), 1.0, 5.0)(0, 0), 6.0);
}

TEST(Calibrate, ShrinkIdentitySymmetryAndLinearity) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const Matrix s = random_symmetric(6, rng);
    EXPECT_EQ(shrink(s, 0.0, 0.0), s);
    const double a1 = rng.uniform() * 3, a2 = rng.uniform() * 3, c = 0.5 + rng.uniform() * 4;
    const Matrix sh = shrink(s, a1, a2);
    EXPECT_EQ(sh, sh.transpose());
    EXPECT_TRUE(shrink(c * s, a1, a2).isApprox(c * sh, 1e-12));
  }
}

TEST(Calibrate, LargeDiagonalShrinkageMakesPositiveDefinite) {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    Matrix s = random_symmetric(32, rng);
    s.diagonal() = s.diagonal().cwiseAbs().array() + 0.1;  // positive mean diagonal
    const double s1 = s.diagonal().mean();
    double worst = 0.0;
    for (Eigen::Index r = 0; r < 32; ++r) {
      worst = std::max(worst, s.row(r).cwiseAbs().sum() + 31 * std::abs(s.sum() / (32 * 31)));
    }
    const double alpha1 = 2.0 * worst / s1;
    const Matrix sh = shrink(s, alpha1, 1.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sh, Eigen::EigenvaluesOnly);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Calibrate, ConfigValidation) {
  GdcConfig c;
  EXPECT_NO_THROW(c.validate(3));
  c.k = 4;
  EXPECT_THROW(c.validate(3), ValidationError);
  c.k = 1;
  c.m = -1;
  EXPECT_THROW(c.validate(3), ValidationError);
}

TEST(Calibrate, MahalanobisDistancesClampBeforeWeighting) {
  // Tiny variances make log|Sigma| strongly negative; weights must stay in (0, 1].
  std::vector<ClassStats> stats{make_stats(0, Vector::Zero(2), 1e-4 * Matrix::Identity(2, 2)),
                                make_stats(1, Vector::Ones(2), 1e-4 * Matrix::Identity(2, 2))};
  GdcConfig c;
  c.k = 2;
  c.metric.kind = MetricKind::MahalanobisLog;
  const auto out = calibrate_support_point(Vector::Zero(2), std::span<const ClassStats>(stats), c);
  for (const auto& [id, w] : out.weights) {
    EXPECT_GT(w, 0.0);
    EXPECT_LE(w, 1.0);
  }
}

}  // namespace
}  // namespace gdc
