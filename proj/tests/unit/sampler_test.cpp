#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "gsw/montecarlo.hpp"
#include "gsw/sampler.hpp"
#include "support/oracles.hpp"

namespace gsw {
namespace {

TEST(PivotFromDraw, UsesAscendingPosition) {
  const IndexSet active{2, 5, 9, 11};
  EXPECT_EQ(pivot_from_draw(active, 0.0), 2);
  EXPECT_EQ(pivot_from_draw(active, 0.49), 5);
  EXPECT_EQ(pivot_from_draw(active, 0.5), 9);
  EXPECT_EQ(pivot_from_draw(active, 0.999999), 11);
  EXPECT_THROW(pivot_from_draw({}, 0.3), std::logic_error);
}

TEST(SampleStep, ChoosesSideWithMeanZero) {
  EXPECT_DOUBLE_EQ(sample_step(1.0, 3.0, 0.75), 1.0);
  EXPECT_DOUBLE_EQ(sample_step(1.0, 3.0, 0.7500001), -3.0);
  // P[+] d+ = P[-] d-: (3/4)(1) = (1/4)(3).
  EXPECT_THROW(sample_step(0.0, 1.0, 0.5), std::logic_error);
}

TEST(FeasibleInterval, SingleCoordinate) {
  Vectord z(1);
  z << 0.25;
  StepDirection<double> dir{Vectord::Ones(1), 0, 1.0};
  const auto in = feasible_interval(z, dir);
  EXPECT_DOUBLE_EQ(in.delta_plus, 0.75);
  EXPECT_DOUBLE_EQ(in.delta_minus, 1.25);
}

TEST(RunGsw, SingleUnitIsFairCoin) {
  const auto s = build_setup(Matrixd::Ones(1, 1), 0.5);
  int plus = 0;
  for (std::uint64_t seed = 0; seed < 4000; ++seed) plus += run_gsw(s, seed)[0] > 0;
  EXPECT_NEAR(plus / 4000.0, 0.5, 4 * std::sqrt(0.25 / 4000));
}

TEST(RunGsw, ProducesSignVectorsAndIsDeterministic) {
  RandomStream rng(21, 0);
  const auto s = build_setup(oracle::gaussian_matrix(rng, 60, 3), 0.5);
  const Vectord z1 = run_gsw(s, 9);
  const Vectord z2 = run_gsw(s, 9);
  EXPECT_EQ(z1, z2);
  EXPECT_TRUE((z1.array().abs() == 1.0).all());
  EXPECT_NE(z1, run_gsw(s, 10));
}

TEST(GswStep, InvariantsHoldEveryRound) {
  RandomStream rng(22, 0);
  const auto s = build_setup(oracle::gaussian_matrix(rng, 40, 2), 0.3);
  auto state = make_design_state(s, RandomStream(1, 0));
  StepDirection<double> dir;
  while (!state.active.empty()) {
    const auto before = state.active.size();
    const auto rec = gsw_step(s, state, dir);
    ASSERT_GE(rec.frozen.size(), 1u);
    ASSERT_EQ(state.active.size() + rec.frozen.size(), before);
    ASSERT_LE(state.z.lpNorm<Eigen::Infinity>(), 1.0);
    ASSERT_TRUE(std::is_sorted(state.active.begin(), state.active.end()));
    for (Index i : state.active) ASSERT_LT(std::abs(state.z[i]), 1.0);
    for (Index i : rec.frozen) ASSERT_EQ(std::abs(state.z[i]), 1.0);
  }
  EXPECT_LE(state.t, 40);
}

TEST(GswStep, PivotPersistsUntilFrozen) {
  RandomStream rng(23, 0);
  const auto s = build_setup(oracle::gaussian_matrix(rng, 30, 2), 0.5);
  auto state = make_design_state(s, RandomStream(4, 0));
  StepDirection<double> dir;
  std::optional<Index> last;
  bool last_frozen = true;
  while (!state.active.empty()) {
    const auto draws_before = state.rng.draws();
    const auto rec = gsw_step(s, state, dir);
    if (!last_frozen) {
      ASSERT_EQ(rec.pivot, *last);
      ASSERT_EQ(state.rng.draws() - draws_before, 1u);  // only the step draw
    }
    last = rec.pivot;
    last_frozen = std::find(rec.frozen.begin(), rec.frozen.end(), rec.pivot) != rec.frozen.end();
  }
}

TEST(RunGsw, PivotOrderIsUniformPermutationWithoutCovariates) {
  // With B = I every step freezes exactly its pivot, so the freeze order is
  // the pivot order, which must be a uniform permutation of 6 units.
  const Index n = 6;
  const auto s = build_setup(Matrixd::Zero(n, 1), 0.5);
  std::map<std::vector<Index>, int> counts;
  const int reps = 60000;
  for (int r = 0; r < reps; ++r) {
    auto state = make_design_state(s, RandomStream(77, std::uint64_t(r)));
    StepDirection<double> dir;
    std::vector<Index> order;
    while (!state.active.empty()) order.push_back(gsw_step(s, state, dir).pivot);
    ++counts[order];
  }
  ASSERT_EQ(counts.size(), 720u);
  const double expected = reps / 720.0;
  double chi2 = 0.0;
  for (const auto& [perm, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_GT(chi_square_pvalue(chi2, 719.0), 1e-3) << "chi2 = " << chi2;
}

TEST(RunGsw, MarginalsAreHalf) {
  RandomStream rng(24, 0);
  const auto s = build_setup(oracle::gaussian_matrix(rng, 10, 2), 0.5);
  Vectord sum = Vectord::Zero(10);
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) sum += run_gsw(s, RandomStream(5, std::uint64_t(r)));
  EXPECT_LE((sum / reps).lpNorm<Eigen::Infinity>(), 4.5 / std::sqrt(double(reps)));
}

TEST(RunGsw, BalancesCovariatesBetterThanCoinFlips) {
  RandomStream rng(25, 0);
  const Matrixd x = oracle::gaussian_matrix(rng, 200, 2);
  // Small phi puts the weight on covariate balance.
  const auto s = build_setup(x, 0.1);
  double gsw_imb = 0.0, iid_imb = 0.0;
  RandomStream coins(26, 0);
  for (int r = 0; r < 200; ++r) {
    gsw_imb += (x.transpose() * run_gsw(s, RandomStream(6, std::uint64_t(r)))).squaredNorm();
    Vectord z(200);
    for (Index i = 0; i < 200; ++i) z[i] = coins.uniform() < 0.5 ? 1.0 : -1.0;
    iid_imb += (x.transpose() * z).squaredNorm();
  }
  EXPECT_LT(gsw_imb, 0.2 * iid_imb);
}

TEST(RunGsw, LongDoubleInstantiation) {
  RandomStream rng(27, 0);
  const Matrix<long double> x = oracle::gaussian_matrix(rng, 20, 2).cast<long double>();
  const auto s = build_setup(x, 0.5L);
  const auto z = run_gsw(s, 3);
  EXPECT_TRUE((z.array().abs() == 1.0L).all());
}

}  // namespace
}  // namespace gsw
