#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "cvxorder/coefficient.hpp"
#include "cvxorder/errors.hpp"
#include "cvxorder/lattice.hpp"
#include "cvxorder/noise.hpp"
#include "cvxorder/operators.hpp"
#include "cvxorder/payoffs.hpp"

namespace cvxorder {

/// Snell envelope of a Bermudan payoff on the discrete dynamics.
struct SnellResult {
  double reduite_u0 = 0.0;
  BackwardResult envelope;  // u_k, obstacles F_k and exercise flags

  const std::vector<ValueFunction>& values() const { return envelope.values; }
  const std::vector<std::vector<std::uint8_t>>& exercise_region() const { return envelope.exercise; }
  double budget() const { return envelope.budget; }
};

/// u_n = F_n, u_k = max(F_k, E u_{k+1}(x + sigma_k(x) Z_{k+1})) on exercise
/// dates (continuation only elsewhere); returns u_0(x0).
inline SnellResult snell_bdpp(std::span<const Section> sigmas, std::span<const InnovationSpec> specs,
                              const BermudanPayoff& payoff, double x0, const EngineOptions& opts = {}) {
  require(!sigmas.empty() && sigmas.size() == specs.size(), ErrorCode::invalid_argument,
          "snell_bdpp: sigmas and specs must be non-empty and of equal length");
  for (const auto& s : specs) detail::check_growth(payoff.F.growth_r(), s, "snell_bdpp");
  SnellResult r;
  r.envelope = BackwardEngine(sigmas, step_laws(specs, opts), payoff.F, &payoff, x0, opts).run();
  r.reduite_u0 = r.envelope.value;
  return r;
}

struct BermudanComparison {
  double u0 = 0.0;
  double v0 = 0.0;
  bool dominance = false;
  double tolerance = 0.0;
  HypothesisReport hypothesis;
  SnellResult lhs, rhs;
};

/// Reduites u_0 (sigma) and v_0 (theta) with the verdict u_0 <= v_0 + tol.
inline BermudanComparison compare_bermudan(std::span<const Section> sigmas, std::span<const Section> thetas,
                                           std::span<const InnovationSpec> specs, const BermudanPayoff& payoff,
                                           double x0, const EngineOptions& opts = {},
                                           std::span<const Section> kappas = {}) {
  require(!sigmas.empty() && sigmas.size() == thetas.size() && sigmas.size() == specs.size(),
          ErrorCode::invalid_argument, "compare_bermudan: sigmas, thetas and specs must have equal length");
  require(payoff.F.convex(), ErrorCode::hypothesis_unverifiable,
          "compare_bermudan: payoff " + payoff.F.describe() + " is not certified convex");
  const auto laws = step_laws(specs, opts);
  const auto [lo, hi] = comparison_range(sigmas, thetas, laws, x0, opts.grid);
  BermudanComparison c;
  const auto [clo, chi] = certification_range(sigmas, thetas, laws, x0, {lo, hi});
  c.hypothesis = certify_hypothesis(sigmas, thetas, specs, clo, chi, kappas);
  EngineOptions shared = opts;
  shared.grid.lo = lo;
  shared.grid.hi = hi;
  c.lhs = snell_bdpp(sigmas, specs, payoff, x0, shared);
  c.rhs = snell_bdpp(thetas, specs, payoff, x0, shared);
  c.u0 = c.lhs.reduite_u0;
  c.v0 = c.rhs.reduite_u0;
  c.tolerance = kExactTolerance + c.lhs.budget() + c.rhs.budget();
  c.dominance = c.u0 <= c.v0 + c.tolerance;
  return c;
}

/// Discrete model on [0, T] used for grid refinement:
///   Brownian: X_{k+1} = X_k + sqrt(T/n) c(t_k, X_k) Z, Z quantized N(0,1);
///   Levy:     X_{k+1} = X_k + c(t_k, X_k) dL, dL a quantized Levy increment.
struct LatticeModel {
  CoefficientFn coefficient = CoefficientFn::constant(0.0);
  double T = 1.0;
  int quant_points = 32;
  std::optional<LevySpec> levy;

  std::vector<Section> sections(int n) const {
    const double dt = T / n;
    std::vector<Section> out;
    out.reserve(n);
    for (int k = 0; k < n; ++k) out.push_back(section(coefficient, T * k / n, levy ? 1.0 : std::sqrt(dt)));
    return out;
  }
  std::vector<InnovationSpec> specs(int n) const {
    const double dt = T / n;
    if (levy) return std::vector<InnovationSpec>(n, quantize_levy(*levy, dt));
    return std::vector<InnovationSpec>(n, quantize_gaussian(quant_points));
  }
};

struct RefinementRow {
  int n = 0;
  double reduite = 0.0;
  double diff = std::numeric_limits<double>::quiet_NaN();  // |u0(n) - u0(previous n)|
  double budget = 0.0;
};

/// Reduite on refining exercise grids (exercise allowed at every t_k).
inline std::vector<RefinementRow> refine_study(const LatticeModel& model, const PayoffFunctional& payoff, double x0,
                                               std::span<const int> n_list, const EngineOptions& opts = {},
                                               BermudanPayoff::Exercise exercise = BermudanPayoff::Exercise::all_dates) {
  std::vector<RefinementRow> rows;
  for (int n : n_list) {
    require(n >= 1, ErrorCode::invalid_argument, "refine_study: n must be >= 1");
    const BermudanPayoff b{payoff, exercise, {}};
    const auto sig = model.sections(n);
    const auto spc = model.specs(n);
    const auto res = snell_bdpp(sig, spc, b, x0, opts);
    RefinementRow row{n, res.reduite_u0, std::numeric_limits<double>::quiet_NaN(), res.budget()};
    if (!rows.empty()) row.diff = std::abs(row.reduite - rows.back().reduite);
    rows.push_back(row);
  }
  return rows;
}

/// Per step k, the exercise node nearest x0 among nodes with a positive
/// obstacle (NaN when no such node). One-dimensional envelopes only.
inline std::vector<double> exercise_boundary(const SnellResult& r, double x0) {
  std::vector<double> out;
  const auto& vals = r.envelope.values;
  if (vals.empty())
    throw Error(ErrorCode::backend_unavailable, "exercise boundary needs the lattice or grid backend");
  for (std::size_t k = 0; k < vals.size() && k < r.envelope.exercise.size(); ++k) {
    const auto& g = vals[k].grid();
    double best = std::numeric_limits<double>::quiet_NaN();
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (r.envelope.exercise[k][i] && r.envelope.obstacles[k].values()[i] > 0.0 && std::abs(g[i] - x0) < dist) {
        dist = std::abs(g[i] - x0);
        best = g[i];
      }
    out.push_back(best);
  }
  return out;
}

inline void write_exercise_boundary_csv(std::ostream& os, const SnellResult& r, double x0) {
  os << "k,boundary_x\n";
  os.precision(17);
  const auto b = exercise_boundary(r, x0);
  for (std::size_t k = 0; k < b.size(); ++k) {
    os << k << ',';
    if (std::isnan(b[k])) os << "nan";
    else os << b[k];
    os << '\n';
  }
}

}  // namespace cvxorder
