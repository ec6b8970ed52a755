#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "cvxorder/dynamics.hpp"

using namespace cvxorder;

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
  double se() const { return sd / std::sqrt(count); }
  double count = 0.0;
};

template <class Draw>
Moments moments(int n, Draw&& draw) {
  double s = 0.0, s2 = 0.0;
  for (int j = 0; j < n; ++j) {
    const double x = draw(j);
    s += x;
    s2 += x * x;
  }
  Moments m;
  m.count = n;
  m.mean = s / n;
  m.sd = std::sqrt(std::max(0.0, s2 / n - m.mean * m.mean));
  return m;
}

double bs_call_oracle(double s, double k, double vol, double T) {
  const double v = vol * std::sqrt(T);
  const double d1 = (std::log(s / k) + 0.5 * v * v) / v;
  auto N = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  return s * N(d1) - k * N(d1 - v);
}

const InnovationSpec kRademacher = InnovationSpec::finite_support({-1.0, 1.0}, {0.5, 0.5});

}  // namespace

TEST(SimulateDiscrete, ZeroCoefficientIsConstant) {
  RngStream s(1, 0);
  const std::vector<InnovationSpec> specs(5, InnovationSpec::gaussian(1.0));
  const auto p = simulate_discrete(constant_sections(0.0, 5), specs, 2.5, s);
  for (double v : p.values) EXPECT_EQ(v, 2.5);
}

TEST(SimulateDiscrete, OneRademacherStep) {
  const std::vector<InnovationSpec> specs(1, kRademacher);
  for (std::uint64_t j = 0; j < 50; ++j) {
    RngStream s(3, j);
    const auto p = simulate_discrete(constant_sections(1.0, 1), specs, 0.5, s);
    EXPECT_TRUE(p.values[1] == -0.5 || p.values[1] == 1.5);
  }
}

TEST(SimulateDiscrete, TerminalMeanIsStartValue) {
  const int n = 4, N = 1000000;
  const std::vector<InnovationSpec> specs(n, InnovationSpec::gaussian(1.0));
  const std::vector<Section> sig(n, section(CoefficientFn::abs_affine(0.5, 0.3)));
  const auto m = moments(N, [&](int j) {
    RngStream s(5, j);
    return simulate_discrete(sig, specs, 1.0, s).terminal();
  });
  EXPECT_LE(std::abs(m.mean - 1.0), 4.0 * m.se());
}

TEST(EulerBrownian, ZeroVolatilityIsConstant) {
  RngStream s(1, 1);
  const auto p = euler_brownian(CoefficientFn::constant(0.0), GridSpec(16, 1.0), -1.0, s);
  for (double v : p.values) EXPECT_EQ(v, -1.0);
}

TEST(EulerBrownian, TerminalMeanIsStartValue) {
  const GridSpec g(32, 1.0);
  const auto sig = CoefficientFn::abs_affine(0.2, 0.5);
  const auto m = moments(100000, [&](int j) {
    RngStream s(8, j);
    return euler_brownian(sig, g, 0.3, s).terminal();
  });
  EXPECT_LE(std::abs(m.mean - 0.3), 3.0 * m.se());
}

TEST(EulerBrownian, GeometricCallApproachesBlackScholes) {
  const double bs = bs_call_oracle(1.0, 1.0, 0.2, 1.0);
  const auto geo = CoefficientFn::affine(0.0, 0.2);
  for (int n : {8, 32, 128}) {
    const GridSpec g(n, 1.0);
    const auto m = moments(100000, [&](int j) {
      RngStream s(12, j);
      return std::max(euler_brownian(geo, g, 1.0, s).terminal() - 1.0, 0.0);
    });
    EXPECT_LE(std::abs(m.mean - bs), 4.0 * m.se()) << n;
  }
}

TEST(EulerLevy, NoNoiseIsConstant) {
  RngStream s(2, 0);
  const LevySpec levy(0.0, 0.0, TwoPointJump{-1.0, 1.0, 0.5});
  const auto p = euler_levy(CoefficientFn::constant(1.0), levy, GridSpec(10, 1.0), 4.0, s);
  for (double v : p.values) EXPECT_EQ(v, 4.0);
}

TEST(EulerLevy, UnitCoefficientReproducesTheDriver) {
  const LevySpec levy(0.5, 2.0, TwoPointJump{-0.3, 0.3, 0.5});
  const GridSpec g(20, 1.0);
  RngStream a(4, 7), b(4, 7);
  const auto p = euler_levy(CoefficientFn::constant(1.0), levy, g, 1.0, a);
  std::vector<double> dz(g.n);
  levy_increments(levy, g, b, dz);
  double z = 1.0;
  for (int k = 0; k < g.n; ++k) {
    z += dz[k];
    EXPECT_DOUBLE_EQ(p.values[k + 1], z);
  }
}

TEST(EulerLevy, TerminalMeanIsStartValue) {
  const LevySpec levy(0.5, 2.0, TwoPointJump{-0.3, 0.3, 0.5});
  const GridSpec g(32, 1.0);
  const auto kappa = CoefficientFn::clipped(CoefficientFn::abs_affine(0.3, 0.3), 0.0, 3.0);
  const auto m = moments(100000, [&](int j) {
    RngStream s(9, j);
    return euler_levy(kappa, levy, g, 0.0, s).terminal();
  });
  EXPECT_LE(std::abs(m.mean), 3.0 * m.se());
}

TEST(EulerLevy, StepwiseEvaluationHoldsLastGridValue) {
  const Path p(GridSpec(4, 1.0), {0.0, 1.0, 3.0, 2.0, 5.0});
  EXPECT_EQ(evaluate_stepwise(p, 0.3), 1.0);
  EXPECT_EQ(evaluate_stepwise(p, 0.5), 3.0);
  EXPECT_EQ(evaluate_stepwise(p, 1.0), 5.0);
}

TEST(InterpolateIn, NodesMidpointsAndSupBound) {
  const Path p(GridSpec(4, 2.0), {0.0, -1.0, 3.0, 2.0, 5.0});
  for (int k = 0; k <= 4; ++k) EXPECT_EQ(interpolate_in(p, p.grid.t(k)), p.values[k]);
  EXPECT_DOUBLE_EQ(interpolate_in(p, 0.75), 1.0);
  for (int i = 0; i <= 1000; ++i) EXPECT_LE(std::abs(interpolate_in(p, 2.0 * i / 1000.0)), p.sup_abs());
}

TEST(InterpolateIn, OneLipschitzInSupNorm) {
  const GridSpec g(6, 1.0);
  RngStream s(21, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(7), b(7);
    double d = 0.0;
    for (int k = 0; k < 7; ++k) {
      a[k] = s.normal();
      b[k] = s.normal();
      d = std::max(d, std::abs(a[k] - b[k]));
    }
    const Path pa(g, a), pb(g, b);
    for (int i = 0; i <= 200; ++i) {
      const double t = i / 200.0;
      EXPECT_LE(std::abs(interpolate_in(pa, t) - interpolate_in(pb, t)), d + 1e-15);
    }
  }
}

TEST(InterpolateIn, OutsideHorizonThrows) {
  const Path p(GridSpec(2, 1.0), {0.0, 1.0, 2.0});
  try {
    interpolate_in(p, 1.5);
    FAIL() << "expected OutOfRange";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::out_of_range);
  }
}

TEST(LocalVol, ZeroVolatilityIsConstant) {
  RngStream s(1, 2);
  const auto p = simulate_local_vol(CoefficientFn::constant(0.0), GridSpec(12, 1.0), 100.0, s);
  for (double v : p.values) EXPECT_EQ(v, 100.0);
}

TEST(LocalVol, UnboundedVolatilityIsRejected) {
  RngStream s(1, 2);
  EXPECT_THROW(simulate_local_vol(CoefficientFn::affine(0.1, 0.1), GridSpec(12, 1.0), 100.0, s), Error);
}

TEST(LocalVol, ConstantVolMartingaleAndCallPrice) {
  const GridSpec g(64, 1.0);
  std::vector<double> terminal(100000);
  for (int j = 0; j < 100000; ++j) {
    RngStream s(31, j);
    terminal[j] = simulate_local_vol(CoefficientFn::constant(0.2), g, 100.0, s).terminal();
  }
  const auto mean = moments(100000, [&](int j) { return terminal[j]; });
  EXPECT_LE(std::abs(mean.mean - 100.0), 3.0 * mean.se());
  const auto call = moments(100000, [&](int j) { return std::max(terminal[j] - 100.0, 0.0); });
  // Euler bias for the geometric call at n = 64 is far below the MC error.
  EXPECT_LE(std::abs(call.mean - bs_call_oracle(100.0, 100.0, 0.2, 1.0)), 3.0 * call.se() + 0.02);
}

TEST(StochasticIntegral, ZeroAndUnitIntegrands) {
  const std::vector<InnovationSpec> specs(8, InnovationSpec::gaussian(1.0));
  RngStream a(6, 0), b(6, 0);
  const auto zero = discrete_stoch_integral([](const AdaptedHistory&) { return 0.0; }, specs, a);
  for (double v : zero.values) EXPECT_EQ(v, 0.0);
  const auto unit = discrete_stoch_integral([](const AdaptedHistory&) { return 1.0; }, specs, b);
  RngStream c(6, 0);
  double sum = 0.0;
  for (int k = 0; k < 8; ++k) {
    sum += specs[k].sample(c);
    EXPECT_DOUBLE_EQ(unit.values[k + 1], sum);
  }
}

TEST(StochasticIntegral, IntegrandSeesOnlyThePast) {
  const std::vector<InnovationSpec> specs(6, kRademacher);
  RngStream s(2, 2);
  discrete_stoch_integral(
      [](const AdaptedHistory& h) {
        EXPECT_EQ(h.z.size(), static_cast<std::size_t>(h.k));
        EXPECT_EQ(h.x.size(), static_cast<std::size_t>(h.k + 1));
        return 1.0;
      },
      specs, s);
}

TEST(StochasticIntegral, MartingaleTransformHasZeroMean) {
  const std::vector<InnovationSpec> specs(10, InnovationSpec::gaussian(1.0));
  const AdaptedRule rule = [](const AdaptedHistory& h) { return 1.0 + std::abs(std::sin(h.x[h.k])); };
  const auto m = moments(100000, [&](int j) {
    RngStream s(41, j);
    return discrete_stoch_integral(rule, specs, s).terminal();
  });
  EXPECT_LE(std::abs(m.mean), 3.0 * m.se());
}

TEST(Doleans, ZeroIntegrandStaysAtOne) {
  RngStream s(3, 3);
  const auto p = doleans_discrete([](const AdaptedHistory&) { return 0.0; }, GridSpec(10, 1.0), s);
  for (double v : p.values) EXPECT_EQ(v, 1.0);
}

TEST(Doleans, PositiveAndMeanOne) {
  const GridSpec g(16, 1.0);
  const AdaptedRule rule = [](const AdaptedHistory& h) { return 0.3 * (1.0 + 0.5 * std::abs(std::sin(h.x[h.k]))); };
  const auto m = moments(100000, [&](int j) {
    RngStream s(51, j);
    const auto p = doleans_discrete(rule, g, s);
    for (double v : p.values) EXPECT_GT(v, 0.0);
    return p.terminal();
  });
  EXPECT_LE(std::abs(m.mean - 1.0), 3.0 * m.se());
}

TEST(Reproducibility, SameSeedSamePathBitwise) {
  const GridSpec g(50, 1.0);
  const auto sig = CoefficientFn::bounded_rational(0.1, 0.2, 100.0, 100.0);
  RngStream a(77, 5), b(77, 5);
  const auto pa = simulate_local_vol(sig, g, 100.0, a);
  const auto pb = simulate_local_vol(sig, g, 100.0, b);
  EXPECT_EQ(pa.values, pb.values);
}

TEST(PathExport, CsvHasTimeAndValueColumns) {
  const Path p(GridSpec(2, 1.0), {1.0, 2.0, 3.0});
  std::ostringstream os;
  write_path_csv(os, p);
  EXPECT_EQ(os.str(), "t,value\n0,1\n0.5,2\n1,3\n");
}

TEST(PathExport, BinaryBatchRoundTrip) {
  const GridSpec g(3, 1.0);
  const std::vector<Path> paths{Path(g, {1.0, -2.5, 3.25, 0.0}), Path(g, {1e-300, 7.0, -0.0, 42.0})};
  std::stringstream ss;
  write_path_batch(ss, paths);
  const auto bytes = ss.str();
  ASSERT_EQ(bytes.size(), 8u + 16u + 8u * 8u);
  EXPECT_EQ(bytes.substr(0, 8), "CVXPATH1");
  // Little-endian 1.0 = 0x3ff0000000000000 as the first payload double.
  EXPECT_EQ(static_cast<unsigned char>(bytes[24 + 7]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[24 + 6]), 0xf0);
  const auto back = read_path_batch(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], paths[0].values);
  EXPECT_EQ(back[1], paths[1].values);
}
