#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "cvxorder/snell.hpp"

using namespace cvxorder;

namespace {

InnovationSpec rademacher() { return InnovationSpec::finite_support({-1.0, 1.0}, {0.5, 0.5}); }

BermudanPayoff american(PayoffFunctional F) { return {std::move(F), BermudanPayoff::Exercise::all_dates, {}}; }
BermudanPayoff european(PayoffFunctional F) { return {std::move(F), BermudanPayoff::Exercise::terminal_only, {}}; }

LatticeModel put_model(double vol) {
  return LatticeModel{CoefficientFn::local_vol_wrap(CoefficientFn::constant(vol)), 1.0, 32, std::nullopt};
}

}  // namespace

TEST(SnellBdpp, OnePeriodRademacherPut) {
  // Leaves x = 0 (payoff 1) and x = 2 (payoff 0); stopping at x0 = 1 pays 0.
  const std::vector<InnovationSpec> specs{rademacher()};
  const auto r = snell_bdpp(constant_sections(1.0, 1), specs, american(PayoffFunctional::terminal(ScalarConvexFn::put(1.0))),
                            1.0);
  const double oracle = std::max(0.0, 0.5 * 1.0 + 0.5 * 0.0);
  EXPECT_NEAR(r.reduite_u0, oracle, 1e-14);
}

TEST(SnellBdpp, TerminalOnlyMatchesEuropeanRecursion) {
  const int n = 3;
  const std::vector<InnovationSpec> specs(n, quantize_gaussian(6));
  const std::vector<Section> sig(n, section(CoefficientFn::abs_affine(0.4, 0.2)));
  const auto F = PayoffFunctional::terminal(ScalarConvexFn::call(0.3));
  const auto snell = snell_bdpp(sig, specs, european(F), 0.1);
  const auto euro = backward_convex_order(sig, sig, specs, F, 0.1);
  EXPECT_NEAR(snell.reduite_u0, euro.phi0, 1e-12);
}

TEST(SnellBdpp, ConstantObstacle) {
  const std::vector<InnovationSpec> specs(4, rademacher());
  const auto r = snell_bdpp(constant_sections(1.0, 4), specs,
                            american(PayoffFunctional::terminal(ScalarConvexFn::affine(0.0, 2.5))), 0.0);
  EXPECT_NEAR(r.reduite_u0, 2.5, 1e-14);
}

TEST(SnellBdpp, EnvelopeInvariantsOnGrid) {
  const int n = 8;
  const std::vector<InnovationSpec> specs(n, quantize_gaussian(16));
  const std::vector<Section> sig(n, section(CoefficientFn::abs_affine(0.3, 0.1)));
  EngineOptions opts;
  opts.backend = Backend::grid;
  const auto F = PayoffFunctional::terminal(ScalarConvexFn::put(0.2));
  const auto r = snell_bdpp(sig, specs, american(F), 0.0, opts);
  const auto& u = r.values();
  ASSERT_EQ(u.size(), static_cast<std::size_t>(n + 1));
  const auto& atoms = specs[0].atoms();
  for (int k = 0; k <= n; ++k) {
    const auto& g = u[k].grid();
    EXPECT_TRUE(u[k].is_convex(1e-12)) << k;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double obstacle = r.envelope.obstacles[k].values()[i];
      if (k == n) EXPECT_EQ(u[k].values()[i], obstacle);
      EXPECT_GE(u[k].values()[i], obstacle - 1e-12);
      if (k < n) {
        double cont = 0.0;
        for (const auto& a : atoms) cont += a.prob * u[k + 1](g[i] + sig[k](g[i]) * a.value);
        EXPECT_GE(u[k].values()[i], cont - 1e-10);
        if (r.exercise_region()[k][i]) EXPECT_GE(obstacle, cont - 1e-12 - 1e-10);
      }
    }
  }
}

TEST(SnellBdpp, LatticeAgreesWithTree) {
  const int n = 4;
  const std::vector<InnovationSpec> specs(n, InnovationSpec::finite_support({-1.0, 0.0, 1.0}, {0.3, 0.4, 0.3}));
  const std::vector<Section> sig(n, section(CoefficientFn::abs_affine(0.5, 0.25)));
  const auto b = american(PayoffFunctional::terminal(ScalarConvexFn::put(0.3)));
  EngineOptions tree, lattice;
  tree.backend = Backend::tree;
  lattice.backend = Backend::lattice;
  const auto a = snell_bdpp(sig, specs, b, 0.0, tree);
  const auto c = snell_bdpp(sig, specs, b, 0.0, lattice);
  EXPECT_NEAR(a.reduite_u0, c.reduite_u0, 1e-9);
  EXPECT_TRUE(a.envelope.exact);
  EXPECT_TRUE(c.envelope.exact);
}

TEST(SnellBdpp, MoreExerciseDatesNeverLowerTheValue) {
  const int n = 6;
  const std::vector<InnovationSpec> specs(n, quantize_gaussian(8));
  const std::vector<Section> sig(n, section(CoefficientFn::abs_affine(0.3, 0.3)));
  const auto F = PayoffFunctional::running_max(ScalarConvexFn::call(0.2), 1.0);
  std::vector<bool> some(n + 1, false);
  some[2] = some[4] = true;
  const double v_last = snell_bdpp(sig, specs, european(F), 0.0).reduite_u0;
  const double v_some = snell_bdpp(sig, specs, BermudanPayoff{F, BermudanPayoff::Exercise::mask, some}, 0.0).reduite_u0;
  const double v_all = snell_bdpp(sig, specs, american(F), 0.0).reduite_u0;
  EXPECT_GE(v_some, v_last - 1e-12);
  EXPECT_GE(v_all, v_some - 1e-12);
}

TEST(CompareBermudan, IdenticalModelsGiveEqualReduites) {
  const auto m = put_model(0.2);
  const auto c = compare_bermudan(m.sections(6), m.sections(6), m.specs(6),
                                  american(PayoffFunctional::terminal(ScalarConvexFn::put(100.0))), 100.0);
  EXPECT_EQ(c.u0, c.v0);
  EXPECT_TRUE(c.dominance);
}

TEST(CompareBermudan, PutVolatilityOrderingAndAmericanPremium) {
  const int n = 12;
  const auto lo = put_model(0.2), hi = put_model(0.3);
  const auto F = PayoffFunctional::terminal(ScalarConvexFn::put(100.0));
  const auto c = compare_bermudan(lo.sections(n), hi.sections(n), lo.specs(n), american(F), 100.0);
  EXPECT_TRUE(c.dominance);
  EXPECT_LT(c.u0, c.v0);
  for (const auto* m : {&lo, &hi}) {
    const double am = snell_bdpp(m->sections(n), m->specs(n), american(F), 100.0).reduite_u0;
    const double eu = snell_bdpp(m->sections(n), m->specs(n), european(F), 100.0).reduite_u0;
    EXPECT_GE(am, eu - 1e-12);
  }
}

TEST(CompareBermudan, NonConvexPayoffIsRejected) {
  const auto m = put_model(0.2);
  EXPECT_THROW(compare_bermudan(m.sections(4), m.sections(4), m.specs(4), american(PayoffFunctional::digital(100.0)),
                                100.0),
               Error);
}

TEST(RefineStudy, ZeroVolatilityIsFlatInN) {
  const LatticeModel m{CoefficientFn::constant(0.0), 1.0, 16, std::nullopt};
  const std::vector<int> ns{2, 4, 8};
  const auto rows = refine_study(m, PayoffFunctional::terminal(ScalarConvexFn::put(1.0)), 0.25, ns);
  for (const auto& r : rows) EXPECT_NEAR(r.reduite, 0.75, 1e-14);
}

TEST(RefineStudy, TerminalOnlyMatchesEuropeanPerN) {
  const auto m = put_model(0.2);
  const auto F = PayoffFunctional::terminal(ScalarConvexFn::put(100.0));
  const std::vector<int> ns{4, 8};
  const auto rows = refine_study(m, F, 100.0, ns, {}, BermudanPayoff::Exercise::terminal_only);
  for (const auto& r : rows) {
    const auto euro = backward_convex_order(m.sections(r.n), m.sections(r.n), m.specs(r.n), F, 100.0);
    EXPECT_NEAR(r.reduite, euro.phi0, 1e-12) << r.n;
  }
}

TEST(RefineStudy, SuccessiveDifferencesShrink) {
  const auto m = put_model(0.2);
  EngineOptions opts;
  opts.grid.nodes = 2049;
  const std::vector<int> ns{8, 16, 32, 64};
  const auto rows = refine_study(m, PayoffFunctional::terminal(ScalarConvexFn::put(100.0)), 100.0, ns, opts);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_TRUE(std::isnan(rows[0].diff));
  EXPECT_GT(rows[1].diff, rows[2].diff);
  EXPECT_GT(rows[2].diff, rows[3].diff);
}

TEST(ExerciseBoundary, CsvColumns) {
  const auto m = put_model(0.3);
  const auto b = american(PayoffFunctional::terminal(ScalarConvexFn::put(100.0)));
  EngineOptions tree, grid;
  tree.backend = Backend::tree;
  grid.backend = Backend::grid;
  std::ostringstream os;
  EXPECT_THROW(write_exercise_boundary_csv(os, snell_bdpp(m.sections(4), m.specs(4), b, 100.0, tree), 100.0), Error);
  os.str("");
  const auto r = snell_bdpp(m.sections(4), m.specs(4), b, 100.0, grid);
  write_exercise_boundary_csv(os, r, 100.0);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "k,boundary_x");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 5);
}
