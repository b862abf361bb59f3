#include <gtest/gtest.h>

#include <cmath>

#include "gsw/estimator.hpp"
#include "support/oracles.hpp"

namespace gsw {
namespace {

TEST(Estimator, AteAndHorvitzThompson) {
  Vectord a(2), b(2), z(2);
  a << 3, 1;
  b << 0, 0;
  z << 1, -1;
  EXPECT_DOUBLE_EQ(ate(a, b), 2.0);
  EXPECT_DOUBLE_EQ(ht_estimate(z, a, b), 3.0);
  z << 0.5, -1;
  EXPECT_THROW(ht_estimate(z, a, b), DataError);
}

TEST(Estimator, ErrorIsInnerProductWithMu) {
  RandomStream rng(1, 0);
  const Vectord a = oracle::gaussian_vector(rng, 30), b = oracle::gaussian_vector(rng, 30);
  Vectord z(30);
  for (Index i = 0; i < 30; ++i) z[i] = rng.uniform() < 0.5 ? 1 : -1;
  EXPECT_NEAR(ht_estimate(z, a, b) - ate(a, b), z.dot(a + b) / 30.0, 1e-13);
}

TEST(ResidualProjection, OrthogonalToColumnSpace) {
  RandomStream rng(2, 0);
  const Matrixd x = oracle::gaussian_matrix(rng, 40, 3);
  const Vectord mu = oracle::gaussian_vector(rng, 40);
  const auto r = residual_projection(mu, x);
  EXPECT_LE((x.transpose() * r.v).norm(), 1e-12 * x.norm() * mu.norm());
  EXPECT_LE((x * r.beta_ls + r.v - mu).norm(), 1e-12 * mu.norm());
  EXPECT_EQ(r.rank, 3);
  EXPECT_FALSE(r.rank_deficient);
}

TEST(ResidualProjection, RankDeficientGivesMinimumNormBeta) {
  Matrixd x(3, 2);
  x << 1, 1, 2, 2, 3, 3;
  Vectord mu(3);
  mu << 1, 2, 3;
  const auto r = residual_projection(mu, x);
  EXPECT_TRUE(r.rank_deficient);
  EXPECT_NEAR(r.beta_ls[0], 0.5, 1e-12);
  EXPECT_NEAR(r.beta_ls[1], 0.5, 1e-12);
  EXPECT_NEAR(r.v_norm_sq, 0.0, 1e-20);
}

TEST(MseBound, TightenedNeverExceedsBase) {
  RandomStream rng(3, 0);
  for (double phi : {0.1, 0.5, 0.9}) {
    const Matrixd x = oracle::gaussian_matrix(rng, 50, 2);
    const auto s = build_setup(x, phi);
    const auto r = residual_projection(x * Vectord::Ones(2) + 0.1 * oracle::gaussian_vector(rng, 50), x);
    const double base = mse_bound(r, s, 50);
    const double tight = mse_bound_tightened(r, s, 50);
    EXPECT_LE(tight, base * (1 + 1e-14));
    const double expected = r.v_norm_sq / (phi * 50) + s.xi * s.xi * r.beta_ls.squaredNorm() / ((1 - phi) * 50);
    EXPECT_NEAR(base, expected, 1e-12 * expected);
  }
}

TEST(Kappa, DegenerateCases) {
  EXPECT_EQ(kappa_diagnostic(build_setup(Matrixd::Zero(4, 2), 0.5)), 0.0);
  EXPECT_TRUE(std::isinf(kappa_diagnostic(build_setup(Matrixd::Ones(4, 2), 0.5))));
  Matrixd x(2, 1);
  x << 1, 1;
  // Y = X, Y^T Y = 2.
  EXPECT_DOUBLE_EQ(kappa_diagnostic(build_setup(x, 0.5)), 1.0);
}

TEST(FormalCondition, ZeroResidualIsError) {
  Matrixd x(3, 1);
  x << 1, 2, 3;
  const auto s = build_setup(x, 0.5);
  const auto r = residual_projection(x.col(0), x);
  EXPECT_THROW(formal_condition(r, s, 3), DataError);
}

TEST(PredictedVariances, IidAndAsymptotic) {
  Matrixd x = Matrixd::Zero(4, 1);
  Vectord mu(4);
  mu << 1, -1, 2, 0;
  const auto r = residual_projection(mu, x);
  const auto [iid, gsw] = predicted_variances(r, mu, 4);
  EXPECT_DOUBLE_EQ(iid, 6.0 / 16.0);
  EXPECT_NEAR(gsw, 6.0 / 16.0, 1e-15);
}

}  // namespace
}  // namespace gsw
