#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cvxorder/black_scholes.hpp"
#include "cvxorder/experiments.hpp"

using namespace cvxorder;

namespace {

McOptions mc(std::uint64_t paths, std::uint64_t seed = 7) {
  McOptions o;
  o.n_paths = paths;
  o.seed = seed;
  return o;
}

SdeModel geometric(double vol) { return BrownianEuler{CoefficientFn::local_vol_wrap(CoefficientFn::constant(vol))}; }

}  // namespace

TEST(CompareEuropean, IdenticalModelsGiveZeroDifference) {
  const auto r = mc_compare_european(geometric(0.2), geometric(0.2),
                                     PayoffFunctional::terminal(ScalarConvexFn::call(100.0)), GridSpec(16, 1.0), 100.0,
                                     mc(20000));
  EXPECT_EQ(r.paired_diff_mean, 0.0);
  EXPECT_EQ(r.paired_diff_se, 0.0);
  EXPECT_EQ(r.estimate_lhs, r.estimate_rhs);
  EXPECT_TRUE(r.confirmed());
}

TEST(CompareEuropean, AffinePayoffHasNoDetectableGap) {
  const auto r = mc_compare_european(geometric(0.1), geometric(0.4),
                                     PayoffFunctional::terminal(ScalarConvexFn::affine(2.0, -1.0)), GridSpec(16, 1.0),
                                     100.0, mc(50000));
  EXPECT_LE(std::abs(r.paired_diff_mean), 3.0 * r.paired_diff_se);
  EXPECT_NEAR(r.estimate_lhs, 199.0, 3.0 * r.se_lhs);
}

TEST(CompareEuropean, ConstantVolatilitiesAreOrdered) {
  const auto r = mc_compare_european(geometric(0.1), geometric(0.3),
                                     PayoffFunctional::terminal(ScalarConvexFn::call(100.0)), GridSpec(32, 1.0), 100.0,
                                     mc(50000));
  EXPECT_EQ(r.verdict, Verdict::dominance_confirmed);
  EXPECT_LT(r.paired_diff_mean, -10.0 * r.paired_diff_se);
}

TEST(CompareEuropean, MixedNoiseKindsAreRejected) {
  const SdeModel levy = LevyEuler{CoefficientFn::constant(1.0), LevySpec(0.5, 1.0, TwoPointJump{-0.3, 0.3, 0.5})};
  EXPECT_THROW(mc_compare_european(geometric(0.2), levy, PayoffFunctional::terminal(ScalarConvexFn::abs()),
                                   GridSpec(4, 1.0), 0.0, mc(10)),
               Error);
}

TEST(Sandwich, ConstantSigmaCollapsesTheBracket) {
  const auto r = bs_sandwich(CoefficientFn::constant(0.25), ScalarConvexFn::call(100.0), GridSpec(64, 1.0), 100.0,
                             mc(100000));
  const double exact = bs_call(100.0, 100.0, 0.25, 1.0);
  EXPECT_NEAR(r.bs_min, exact, 1e-8);
  EXPECT_NEAR(r.bs_max, exact, 1e-8);
  EXPECT_NEAR(r.mc.mean, exact, 3.0 * r.mc.se + r.delta_n);
  EXPECT_EQ(r.verdict, Verdict::dominance_confirmed);
}

TEST(Sandwich, ValuesSitAboveIntrinsic) {
  const auto r = bs_sandwich(CoefficientFn::bounded_rational(0.1, 0.2, 100.0, 100.0), ScalarConvexFn::call(90.0),
                             GridSpec(32, 1.0), 100.0, mc(50000));
  EXPECT_EQ(r.intrinsic, 10.0);
  EXPECT_GE(r.bs_min, r.intrinsic);
  EXPECT_GE(r.mc.mean, r.intrinsic - 3.0 * r.mc.se);
  EXPECT_LE(r.bs_min, r.bs_max);
  EXPECT_EQ(r.verdict, Verdict::dominance_confirmed);
}

TEST(Sandwich, UnboundedSigmaIsRejected) {
  try {
    bs_sandwich(CoefficientFn::affine(1.0, 0.1), ScalarConvexFn::call(1.0), GridSpec(4, 1.0), 1.0, mc(10));
    FAIL() << "expected BoundsUncertified";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::bounds_uncertified);
  }
}

TEST(Peacock, SingleSigmaHasNoComparisons) {
  const std::vector<double> s{0.2};
  const auto r = peacock_scan(s, PayoffFunctional::integral(ScalarConvexFn::call(100.0)), GridSpec(16, 1.0), 100.0,
                              mc(5000));
  ASSERT_EQ(r.estimates.size(), 1u);
  EXPECT_TRUE(r.steps.empty());
  EXPECT_FALSE(r.span.has_value());
}

TEST(Peacock, AffinePayoffIsFlat) {
  const std::vector<double> s{0.1, 0.2, 0.4};
  const auto r = peacock_scan(s, PayoffFunctional::integral(ScalarConvexFn::affine(1.0, 0.0)), GridSpec(16, 1.0),
                              100.0, mc(50000));
  for (const auto& c : r.steps) EXPECT_LE(std::abs(c.paired_diff_mean), 3.0 * c.paired_diff_se) << c.label;
  EXPECT_FALSE(r.strict_span);
}

TEST(Peacock, AsianCallIncreasesWithSigma) {
  const std::vector<double> s{0.1, 0.2, 0.3};
  const auto r = peacock_scan(s, PayoffFunctional::integral(ScalarConvexFn::call(100.0)), GridSpec(32, 1.0), 100.0,
                              mc(50000));
  EXPECT_TRUE(r.monotone);
  EXPECT_TRUE(r.strict_span);
  for (const auto& c : r.steps) EXPECT_TRUE(c.confirmed()) << c.label;
}

TEST(ItoCompare, IntegrandEqualToBoundGivesZeroDifference) {
  const GridSpec g(16, 1.0);
  const std::vector<double> h(16, 0.7);
  const auto r = ito_integrand_compare(make_integrand(IntegrandRule::constant, h), h,
                                       PayoffFunctional::terminal(ScalarConvexFn::call(0.0)), g, mc(10000));
  EXPECT_EQ(r.paired_diff_mean, 0.0);
}

TEST(ItoCompare, DampedIntegrandIsDominated) {
  const GridSpec g(32, 1.0);
  const std::vector<double> h(32, 1.0);
  const auto r = ito_integrand_compare(make_integrand(IntegrandRule::sin_damped, h), h,
                                       PayoffFunctional::terminal(ScalarConvexFn::call(0.0)), g, mc(50000));
  EXPECT_TRUE(r.confirmed());
  EXPECT_LT(r.estimate_lhs, r.estimate_rhs);
}

TEST(ItoCompare, AmplifiedIntegrandDominatesFromBelow) {
  const GridSpec g(32, 1.0);
  const std::vector<double> h(32, 0.5);
  IntegrandOptions io;
  io.direction = Direction::lower;
  const auto r = ito_integrand_compare(make_integrand(IntegrandRule::amplified, h), h,
                                       PayoffFunctional::terminal(ScalarConvexFn::abs()), g, mc(50000), io);
  EXPECT_TRUE(r.confirmed());
}

TEST(ItoCompare, BrokenDominationThrows) {
  const GridSpec g(8, 1.0);
  const std::vector<double> h(8, 0.5);
  try {
    ito_integrand_compare(make_integrand(IntegrandRule::amplified, h), h,
                          PayoffFunctional::terminal(ScalarConvexFn::abs()), g, mc(100));
    FAIL() << "expected DominationViolated";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::domination_violated);
  }
}

TEST(DoleansCompare, ZeroIntegrandKeepsExponentialAtOne) {
  const GridSpec g(16, 1.0);
  const std::vector<double> h(16, 0.3);
  const auto r = doleans_compare(make_integrand(IntegrandRule::zero, h), h,
                                 PayoffFunctional::terminal(ScalarConvexFn::call(1.0)), g, mc(20000));
  EXPECT_EQ(r.estimate_lhs, 0.0);
  EXPECT_TRUE(r.confirmed());
}

TEST(DoleansCompare, ConstantSideMatchesBlackScholes) {
  const GridSpec g(128, 1.0);
  const std::vector<double> h(128, 0.3);
  const auto r = doleans_compare(make_integrand(IntegrandRule::sin_damped, h), h,
                                 PayoffFunctional::terminal(ScalarConvexFn::call(1.0)), g, mc(200000));
  // Discrete exponential vs lognormal: the gap is O(1/n), well under 1e-3 here.
  EXPECT_NEAR(r.estimate_rhs, bs_call(1.0, 1.0, 0.3, 1.0), 3.0 * r.se_rhs + 1e-3);
  EXPECT_TRUE(r.confirmed());
}

TEST(CmCompare, EqualIntegrandsGiveZeroDifference) {
  const auto f = CoefficientFn::sigmoid(0.5, 1.0);
  const std::vector<MixtureTerm> mix{{1.0, 0.5}, {2.0, 1.0}};
  const auto r = completely_monotone_compare(f, f, mix, GridSpec(16, 1.0), mc(10000));
  for (const auto& c : r.per_lambda) EXPECT_EQ(c.paired_diff_mean, 0.0);
  EXPECT_EQ(r.mixed.paired_diff_mean, 0.0);
}

TEST(CmCompare, ZeroLambdaReturnsTheWeight) {
  const std::vector<MixtureTerm> mix{{2.5, 0.0}};
  const auto r = completely_monotone_compare(CoefficientFn::sigmoid(0.4, 1.0), CoefficientFn::sigmoid(0.8, 1.0), mix,
                                             GridSpec(8, 1.0), mc(1000));
  EXPECT_EQ(r.per_lambda[0].estimate_lhs, 2.5);
  EXPECT_EQ(r.per_lambda[0].estimate_rhs, 2.5);
}

TEST(CmCompare, LargerSigmoidDominates) {
  const std::vector<MixtureTerm> mix{{1.0, 1.0}, {1.0, 2.0}};
  const auto r = completely_monotone_compare(CoefficientFn::sigmoid(0.4, 1.0), CoefficientFn::sigmoid(0.8, 1.0), mix,
                                             GridSpec(32, 1.0), mc(50000), true);
  EXPECT_TRUE(r.mixed.confirmed());
  ASSERT_EQ(r.recursion.size(), 2u);
  for (const auto& c : r.recursion) EXPECT_TRUE(c.confirmed()) << c.label;
}

TEST(CmCompare, UnorderedIntegrandsAreRejected) {
  const std::vector<MixtureTerm> mix{{1.0, 1.0}};
  EXPECT_THROW(completely_monotone_compare(CoefficientFn::sigmoid(0.8, 1.0), CoefficientFn::sigmoid(0.4, 1.0), mix,
                                           GridSpec(8, 1.0), mc(10)),
               Error);
}

TEST(TwoPeriod, ZeroSigmaIsExpOfXPlusC) {
  EXPECT_NEAR(two_period_phi(1.0, 0.3, 0.0), std::exp(1.3), 1e-13);
}

TEST(TwoPeriod, SecondDerivativeMatchesClosedForm) {
  const std::vector<double> s{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  const auto r = counterexample_two_period(1.0, 0.0, s);
  EXPECT_NEAR(r.fd_second_derivative, -std::exp(1.0), 1e-3 * std::exp(1.0));
  EXPECT_LT(r.phi[1], r.phi[0]);
  EXPECT_GT(r.decreasing_until, 0.0);
}

TEST(TwoPeriod, SmallBumpIsOutOfRange) {
  const std::vector<double> s{0.0, 0.1};
  try {
    counterexample_two_period(0.25, 0.0, s);
    FAIL() << "expected ParamOutOfRange";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::param_out_of_range);
  }
}

TEST(IntegrandCounterexample, ConstantVHasNoReversal) {
  const auto r = counterexample_integrand(CoefficientFn::constant(0.5), 0.05, 0.15, mc(100000));
  EXPECT_FALSE(r.reversal);
  EXPECT_NEAR(r.phi_sigma, std::exp(0.5 + 0.05 * 0.05 / 2.0), 1e-12);
  EXPECT_NEAR(r.phi_sigma_tilde, std::exp(0.5 + 0.15 * 0.15 / 2.0), 1e-12);
  EXPECT_TRUE(r.mc_agrees);
}

TEST(IntegrandCounterexample, DecreasingSigmoidReverses) {
  const auto r = counterexample_integrand(CoefficientFn::sigmoid(1.0, -2.0), 0.05, 0.15, mc(200000));
  EXPECT_LT(r.phi_prime0, 0.0);
  EXPECT_TRUE(r.reversal);
  EXPECT_GT(r.phi_sigma, r.phi_sigma_tilde);
  EXPECT_GE(r.sigma0, 0.15);
  EXPECT_TRUE(r.mc_agrees);
}

TEST(IntegrandCounterexample, IncreasingVIsRejected) {
  EXPECT_THROW(counterexample_integrand(CoefficientFn::sigmoid(1.0, 2.0), 0.05, 0.15, mc(10)), Error);
}
