#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cvxorder/payoffs.hpp"
#include "cvxorder/rng.hpp"

using namespace cvxorder;

TEST(EvalPayoff, TerminalCallAtTheMoney) {
  const Path p(GridSpec(3, 1.0), {1.0, 1.0, 1.0, 1.0});
  EXPECT_EQ(eval_payoff(PayoffFunctional::terminal(ScalarConvexFn::call(1.0)), p), 0.0);
}

TEST(EvalPayoff, UniformIntegralOfConstantPath) {
  const auto f = ScalarConvexFn::call(1.0);
  const Path p(GridSpec(4, 1.0), std::vector<double>(5, 2.5));
  EXPECT_DOUBLE_EQ(eval_payoff(PayoffFunctional::integral(f), p), f(2.5));
  const std::vector<double> w(5, 0.2);
  EXPECT_DOUBLE_EQ(eval_payoff(PayoffFunctional::integral(f, w), p), f(2.5));
}

TEST(EvalPayoff, RunningMaxPicksTheMaximum) {
  const Path p(GridSpec(2, 1.0), {1.0, 3.0, 2.0});
  EXPECT_EQ(eval_payoff(PayoffFunctional::running_max(ScalarConvexFn::identity()), p), 3.0);
  EXPECT_EQ(eval_payoff(PayoffFunctional::running_min(ScalarConvexFn::identity(), 1.0), p), 1.0);
}

TEST(EvalPayoff, WeightGridMismatchThrows) {
  const Path p(GridSpec(2, 1.0), {1.0, 3.0, 2.0});
  try {
    eval_payoff(PayoffFunctional::integral(ScalarConvexFn::identity(), {0.5, 0.5}), p);
    FAIL() << "expected GridMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::grid_mismatch);
  }
}

TEST(EvalPayoff, CompositeIsWeightedSum) {
  const auto a = PayoffFunctional::terminal(ScalarConvexFn::call(1.0));
  const auto b = PayoffFunctional::running_max(ScalarConvexFn::identity());
  const auto c = PayoffFunctional::composite({a, b}, {2.0, 0.5});
  const std::vector<double> x{0.0, 4.0, 2.0};
  EXPECT_DOUBLE_EQ(c(x), 2.0 * 1.0 + 0.5 * 4.0);
  EXPECT_TRUE(c.convex());
  EXPECT_FALSE(PayoffFunctional::composite({a, b}, {1.0, -1.0}).convex());
}

TEST(EvalStopped, FullPathAtLastIndex) {
  const auto F = PayoffFunctional::integral(ScalarConvexFn::call(0.5));
  const std::vector<double> x{0.0, 1.0, 3.0, 2.0};
  EXPECT_EQ(eval_stopped(F, x, 3), F(x));
}

TEST(EvalStopped, ConstantPathSameForAllDates) {
  const auto F = PayoffFunctional::integral(ScalarConvexFn::put(2.0));
  const std::vector<double> x(6, 1.25);
  for (int k = 0; k <= 5; ++k) EXPECT_DOUBLE_EQ(eval_stopped(F, x, k), F(x));
}

TEST(EvalStopped, FreezeRuleForRunningMax) {
  const auto F = PayoffFunctional::running_max(ScalarConvexFn::identity());
  const std::vector<double> x{1.0, 3.0, 2.0};
  EXPECT_EQ(eval_stopped(F, x, 1), 3.0);
  const std::vector<double> frozen{1.0, 3.0, 3.0};
  EXPECT_EQ(eval_stopped(F, x, 1), F(frozen));
}

TEST(EvalStopped, IgnoresValuesAfterTheStoppingIndex) {
  const auto F = PayoffFunctional::integral(ScalarConvexFn::call(0.0), {0.1, 0.2, 0.3, 0.4});
  std::vector<double> x{1.0, -2.0, 0.5, 4.0};
  const double before = eval_stopped(F, x, 1);
  x[2] = 100.0;
  x[3] = -100.0;
  EXPECT_EQ(eval_stopped(F, x, 1), before);
}

TEST(EvalStopped, IndexOutsidePathThrows) {
  const auto F = PayoffFunctional::terminal(ScalarConvexFn::abs());
  const std::vector<double> x{1.0, 2.0};
  for (int k : {-1, 2}) {
    try {
      eval_stopped(F, x, k);
      FAIL() << "expected IndexOutOfRange";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::index_out_of_range);
    }
  }
}

TEST(ConvexityProbe, BuiltInKindsAreConvex) {
  const std::vector<PayoffFunctional> kinds{
      PayoffFunctional::terminal(ScalarConvexFn::call(0.2)),
      PayoffFunctional::integral(ScalarConvexFn::call(0.0)),
      PayoffFunctional::running_max(ScalarConvexFn::call(0.1), 0.5),
      PayoffFunctional::running_min(ScalarConvexFn::exp_affine(0.5), 1.0),
      PayoffFunctional::max_affine({std::vector<double>(9, 0.1), std::vector<double>(9, -0.2)}, {0.0, 0.3}),
  };
  for (const auto& F : kinds) {
    RngStream s(10, 0);
    const auto rep = convexity_probe(F, 10000, s);
    EXPECT_EQ(rep.trials, 10000);
    EXPECT_LE(rep.max_violation, 1e-12) << F.describe();
    EXPECT_TRUE(F.convex());
  }
}

TEST(ConvexityProbe, NegativeSupNormIsCaught) {
  RngStream s(10, 1);
  const auto F = PayoffFunctional::neg_sup_norm();
  EXPECT_GT(convexity_probe(F, 1000, s).max_violation, 0.0);
  EXPECT_FALSE(F.convex());
}

TEST(ConvexityProbe, DigitalIsNotConvex) {
  RngStream s(10, 2);
  const auto F = PayoffFunctional::digital(0.0);
  EXPECT_GT(convexity_probe(F, 2000, s).max_violation, 0.0);
  EXPECT_FALSE(F.convex());
}

TEST(Growth, DeclaredBoundHoldsOnScaledProbes) {
  const std::vector<PayoffFunctional> kinds{
      PayoffFunctional::terminal(ScalarConvexFn::call(1.5)),
      PayoffFunctional::integral(ScalarConvexFn::power(2.0)),
      PayoffFunctional::running_max(ScalarConvexFn::put(-1.0), 0.5),
      PayoffFunctional::max_affine({{1.0, -2.0, 0.5}}, {3.0}),
  };
  RngStream s(4, 4);
  for (const auto& F : kinds) {
    const double C = F.growth_constant(), r = F.growth_r();
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> a(3);
      double sup = 0.0;
      for (auto& v : a) {
        v = s.normal();
        sup = std::max(sup, std::abs(v));
      }
      for (double c : {0.1, 1.0, 10.0, 1000.0}) {
        std::vector<double> ca(a);
        for (auto& v : ca) v *= c;
        EXPECT_LE(std::abs(F(ca)), C * (1.0 + std::pow(c * sup, r)) * (1.0 + 1e-12)) << F.describe();
      }
    }
  }
}

TEST(Reduction, StateReducibleKinds) {
  EXPECT_TRUE(PayoffFunctional::terminal(ScalarConvexFn::abs()).reduce(4).has_value());
  EXPECT_TRUE(PayoffFunctional::integral(ScalarConvexFn::abs()).reduce(4).has_value());
  EXPECT_TRUE(PayoffFunctional::running_max(ScalarConvexFn::abs()).reduce(4).has_value());
  EXPECT_FALSE(PayoffFunctional::max_affine({{1.0, 0.0}}, {0.0}).reduce(1).has_value());
}

TEST(Reduction, RunningSumReproducesStoppedValues) {
  const std::vector<double> w{0.1, 0.2, 0.3, 0.4};
  const auto F = PayoffFunctional::integral(ScalarConvexFn::call(0.3), w);
  const auto red = F.reduce(3);
  ASSERT_TRUE(red.has_value());
  const std::vector<double> x{0.5, -1.0, 2.0, 0.7};
  double a = red->init(x[0]);
  EXPECT_DOUBLE_EQ(red->stopped_value(0, x[0], a), eval_stopped(F, x, 0));
  for (int k = 1; k <= 3; ++k) {
    a = red->update(k, a, x[k]);
    EXPECT_NEAR(red->stopped_value(k, x[k], a), eval_stopped(F, x, k), 1e-14);
  }
}

TEST(Bermudan, ExerciseDates) {
  const BermudanPayoff all{PayoffFunctional::terminal(ScalarConvexFn::put(1.0)), BermudanPayoff::Exercise::all_dates, {}};
  const BermudanPayoff last{all.F, BermudanPayoff::Exercise::terminal_only, {}};
  const BermudanPayoff mask{all.F, BermudanPayoff::Exercise::mask, {false, true, false, false}};
  for (int k = 0; k <= 3; ++k) {
    EXPECT_TRUE(all.exercisable(k, 3));
    EXPECT_EQ(last.exercisable(k, 3), k == 3);
    EXPECT_EQ(mask.exercisable(k, 3), k == 1 || k == 3);
  }
  EXPECT_THROW(mask.exercisable(0, 5), Error);
}
