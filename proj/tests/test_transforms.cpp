#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

namespace gdc {
namespace {

TEST(Transforms, TukeyFixtures) {
  const Vector x{{4.0, 9.0}};
  const Vector y = tukey(x, 0.5);
  EXPECT_DOUBLE_EQ(y(0), 2.0);
  EXPECT_DOUBLE_EQ(y(1), 3.0);
  EXPECT_EQ(tukey(1.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(tukey(0.0, 0.0), std::log(1e-12));
  EXPECT_EQ(tukey(0.0, 0.5), 0.0);
}

TEST(Transforms, YeoJohnsonBranchFixtures) {
  // Reference values evaluated independently at 50 digits.
  EXPECT_NEAR(yeo_johnson(3.0, 0.0), 1.3862943611198906, 1e-15);
  EXPECT_NEAR(yeo_johnson(-1.0, 2.0), -0.6931471805599453, 1e-15);
  EXPECT_NEAR(yeo_johnson(-3.0, 0.0), -7.5, 1e-15);
  EXPECT_NEAR(yeo_johnson(2.5, 0.5), 1.741657386773941, 1e-14);
  EXPECT_NEAR(yeo_johnson(-0.7, 1.5), -0.6076809620810595, 1e-14);
  for (double beta : {0.0, 0.5, 1.0, 2.0, 3.0}) EXPECT_EQ(yeo_johnson(0.0, beta), 0.0);
}

TEST(Transforms, IdentityAtBetaOne) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = 10.0 * rng.normal();
    EXPECT_NEAR(yeo_johnson(x, 1.0), x, 1e-12);
    EXPECT_NEAR(tukey(std::abs(x), 1.0), std::abs(x), 1e-12);
  }
}

TEST(Transforms, YeoJohnsonIsStrictlyIncreasing) {
  Rng rng(11);
  for (double beta : {-1.0, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0}) {
    std::vector<double> xs(1000);
    for (auto& x : xs) x = 5.0 * rng.normal();
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    for (std::size_t i = 1; i < xs.size(); ++i) {
      EXPECT_LT(yeo_johnson(xs[i - 1], beta), yeo_johnson(xs[i], beta)) << "beta " << beta;
    }
  }
}

TEST(Transforms, ContinuityAtLimitBranches) {
  for (double x : {0.0, 0.1, 1.0, 3.0, 20.0}) {
    EXPECT_NEAR(yeo_johnson(x, 1e-6), yeo_johnson(x, 0.0), 1e-4);
    EXPECT_NEAR(yeo_johnson(-x, 2.0 - 1e-6), yeo_johnson(-x, 2.0), 1e-4);
  }
}

TEST(Transforms, TukeyRejectsNegativeInputAndNamesIndex) {
  const Vector x{{1.0, 2.0, -0.5}};
  try {
    tukey(x, 0.5);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos);
  }
  EXPECT_THROW(tukey(-1e-300, 2.0), ValidationError);
}

TEST(Transforms, SelectionFollowsSignOfEveryValue) {
  RowMatrixF x(3, 2);
  x << 0.0F, 7.3F, 1.0F, 2.0F, 0.5F, 0.0F;
  SplitManifest m;
  m.base = {0};
  m.validation = {1};
  m.novel = {2};
  EXPECT_EQ(select_transform(FeatureDataset(2, {0, 1, 2}, x, m)), TransformKind::Tukey);
  x(2, 1) = -0.001F;  // a single negative value in the novel split
  EXPECT_EQ(select_transform(FeatureDataset(2, {0, 1, 2}, x, m)), TransformKind::YeoJohnson);
  EXPECT_EQ(select_transform(FeatureDataset(2, {0, 1, 2}, RowMatrixF::Zero(3, 2), m)),
            TransformKind::Tukey);
}

TEST(Transforms, DatasetTransformAtBetaOneIsUnchanged) {
  const auto ds = test::blob_dataset(3, {0, 1}, {2}, {3}, 4, 5);
  EXPECT_TRUE(apply_transform(ds, {TransformKind::YeoJohnson, 1.0}) == ds);
}

}  // namespace
}  // namespace gdc
