#include <gtest/gtest.h>

#include <cmath>

#include "gsw/linalg.hpp"
#include "support/oracles.hpp"

namespace gsw {
namespace {

TEST(BuildSetup, NormalizesByMaxRowNorm) {
  Matrixd x(3, 2);
  x << 3, 4, 1, 0, 0, 2;
  const auto s = build_setup(x, 0.2);
  EXPECT_DOUBLE_EQ(s.xi, 5.0);
  EXPECT_DOUBLE_EQ(s.zeta, 2.0);
  EXPECT_NEAR(s.y.rowwise().norm().maxCoeff(), s.zeta, 1e-15);
  EXPECT_DOUBLE_EQ(s.direction_norm_ceiling(), 1 + 4 * 5);
}

TEST(BuildSetup, RejectsBadInput) {
  Matrixd x = Matrixd::Ones(2, 1);
  EXPECT_THROW(build_setup(x, 0.0), ParameterError);
  EXPECT_THROW(build_setup(x, 1.0), ParameterError);
  x(1, 0) = std::nan("");
  EXPECT_THROW(build_setup(x, 0.5), DataError);
}

TEST(BuildSetup, ZeroCovariatesGiveIdentityDesign) {
  const auto s = build_setup(Matrixd::Zero(4, 2), 0.5);
  EXPECT_EQ(s.d(), 0);
  IndexSet all{0, 1, 2, 3};
  const auto cache = init_inverse(s.y, all);
  const auto dir = step_direction(s, all, 2, cache);
  EXPECT_EQ(dir.u, Vectord::Unit(4, 2));
  EXPECT_DOUBLE_EQ(dir.bu_norm_sq, 1.0);
}

TEST(StepDirection, SingleRowExample) {
  // n = 2, Y = [[1],[1]]: u = (1, -1/2) when both are active with pivot 0.
  Matrixd x(2, 1);
  x << 1, 1;
  const auto s = build_setup(x, 0.5);
  IndexSet all{0, 1};
  const auto dir = step_direction(s, all, 0, init_inverse(s.y, all));
  EXPECT_NEAR(dir.u[0], 1.0, 1e-15);
  EXPECT_NEAR(dir.u[1], -0.5, 1e-15);
  EXPECT_NEAR(dir.bu_norm_sq, 1.5, 1e-15);
}

TEST(StepDirection, MatchesQrOracleOnRandomInstances) {
  RandomStream rng(11, 0);
  for (int k = 0; k < 300; ++k) {
    const Index n = oracle::uniform_index(rng, 1, 25);
    const Index d = oracle::uniform_index(rng, 0, 4);
    const auto s = build_setup(oracle::gaussian_matrix(rng, n, d), 0.1 + 0.8 * rng.uniform());
    const Index p = oracle::uniform_index(rng, 0, n - 1);
    IndexSet active;
    for (Index i = 0; i < n; ++i)
      if (i == p || rng.uniform() < 0.5) active.push_back(i);
    const auto dir = step_direction(s, active, p, init_inverse(s.y, active));
    const Vectord ref = oracle::constrained_direction(s.y, active, p);
    ASSERT_LE((dir.u - ref).lpNorm<Eigen::Infinity>(), 1e-9 * ref.lpNorm<Eigen::Infinity>());
    const double bu2 = (oracle::augmented_matrix(s.y) * dir.u).squaredNorm();
    ASSERT_NEAR(dir.bu_norm_sq, bu2, 1e-11 * bu2);
    ASSERT_GE(bu2, 1.0 - 1e-12);
    ASSERT_LE(bu2, s.direction_norm_ceiling() * (1 + 1e-12));
    for (Index i = 0; i < n; ++i) {
      if (!std::binary_search(active.begin(), active.end(), i)) ASSERT_EQ(dir.u[i], 0.0);
    }
  }
}

TEST(StepDirection, InnerProductAndQuadraticAgree) {
  RandomStream rng(12, 0);
  const auto s = build_setup(oracle::gaussian_matrix(rng, 20, 3), 0.4);
  IndexSet active{0, 2, 3, 5, 8, 9, 13, 17, 19};
  const auto cache = init_inverse(s.y, active);
  const Vectord v = oracle::gaussian_vector(rng, 20);
  const auto dir = step_direction(s, active, 5, cache);
  EXPECT_NEAR(direction_inner_product(s, active, 5, cache, v), dir.u.dot(v), 1e-12);
  EXPECT_NEAR(direction_quadratic(s, active, 5, cache, v), std::pow(dir.u.dot(v) / dir.bu_norm_sq, 2), 1e-12);
}

TEST(StepDirection, LongDoubleAgreesWithDouble) {
  RandomStream rng(13, 0);
  const Matrixd x = oracle::gaussian_matrix(rng, 15, 2);
  const auto sd = build_setup(x, 0.5);
  const auto sl = build_setup<long double>(x.cast<long double>(), 0.5L);
  IndexSet active{1, 4, 6, 7, 10, 14};
  const auto ud = step_direction(sd, active, 6, init_inverse(sd.y, active)).u;
  const auto ul = step_direction(sl, active, 6, init_inverse(sl.y, active)).u;
  EXPECT_LE((ud - ul.cast<double>()).lpNorm<Eigen::Infinity>(), 1e-13);
}

TEST(StepDirection, PivotOutsideActiveSetThrows) {
  const auto s = build_setup(Matrixd::Ones(3, 1), 0.5);
  IndexSet active{0, 2};
  EXPECT_THROW(step_direction(s, active, 1, init_inverse(s.y, active)), std::logic_error);
}

TEST(StepDirection, DegenerateDenominatorIsNumericError) {
  const auto s = build_setup(Matrixd::Ones(2, 1), 0.5);
  IndexSet active{0, 1};
  auto cache = init_inverse(s.y, active);
  const double y2 = s.y(0, 0) * s.y(0, 0);
  cache.inverse(0, 0) = 1.0 / y2;  // forces 1 - y^T D y = 0
  EXPECT_THROW(step_direction(s, active, 0, cache), NumericError);
}

TEST(Downdate, TracksDirectInverseThroughRefreshes) {
  RandomStream rng(14, 0);
  const auto s = build_setup(oracle::gaussian_matrix(rng, 150, 4), 0.5);
  IndexSet active(150);
  for (Index i = 0; i < 150; ++i) active[std::size_t(i)] = i;
  auto cache = init_inverse(s.y, active);
  for (int r = 0; r < 140; ++r) {
    const Index gone = active.back();
    active.pop_back();
    cache = downdate_inverse(std::move(cache), s.y.row(gone).transpose());
    ASSERT_LT(cache.dirty_counter, kRefreshInterval);
    ASSERT_LE((cache.inverse - oracle::direct_inverse(s.y, active)).norm(), 1e-10);
  }
  EXPECT_EQ(cache.active_count, 10);
}

TEST(Downdate, EmptyCacheThrows) {
  InverseCached cache = init_inverse<double>(Matrixd(0, 2));
  EXPECT_THROW(downdate_inverse(cache, Vectord::Zero(2)), std::logic_error);
}

TEST(AugmentedImage, StacksIdentityAndCovariates) {
  Matrixd x(2, 1);
  x << 1, -1;
  const auto s = build_setup(x, 0.5);
  Vectord u(2);
  u << 2, 1;
  const Vectord bu = augmented_image(s, u);
  EXPECT_EQ(bu.size(), 3);
  EXPECT_DOUBLE_EQ(bu[2], 1.0);
  EXPECT_EQ(augmented_column(s, 1), (Vectord(3) << 0, 1, -1).finished());
}

}  // namespace
}  // namespace gsw
