#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cvxorder/coefficient.hpp"
#include "cvxorder/errors.hpp"
#include "cvxorder/lattice.hpp"
#include "cvxorder/noise.hpp"
#include "cvxorder/payoffs.hpp"
#include "cvxorder/quadrature.hpp"
#include "cvxorder/report.hpp"
#include "cvxorder/scalar_fn.hpp"
#include "cvxorder/value_function.hpp"

namespace cvxorder {

namespace detail {

inline void check_growth(double r, const InnovationSpec& spec, std::string_view who) {
  if (r > spec.moment_order_p()) {
    std::ostringstream os;
    os << who << ": growth exponent r = " << r << " exceeds the moment order p = " << spec.moment_order_p()
       << " of the innovation";
    fail(ErrorCode::growth_mismatch, os.str());
  }
}

/// E g(Z) for Z ~ spec. `kinks` are points (in Z units) where g is not
/// smooth; they steer the Gaussian quadrature.
template <class G>
double expect_innovation(const InnovationSpec& spec, G&& g, std::vector<double> kinks, const QuadratureOptions& q) {
  if (const auto* gi = std::get_if<GaussianInnovation>(&spec.kind())) {
    const double sd = std::sqrt(gi->variance);
    for (double& k : kinks) k /= sd;
    return gaussian_expectation([&](double z) { return g(sd * z); }, kinks, q);
  }
  const auto atoms = spec.is_finite_support() ? spec.atoms() : step_law(spec).atoms;
  double s = 0.0;
  for (const auto& a : atoms) s += a.prob * g(a.value);
  return s;
}

}  // namespace detail

/// Q phi(u) = E phi(u Z).
inline double q_operator(const ScalarConvexFn& phi, const InnovationSpec& spec, double u,
                         const QuadratureOptions& q = {}) {
  detail::check_growth(phi.growth_r(), spec, "q_operator");
  if (u == 0.0) return phi(0.0);
  std::vector<double> kinks;
  for (double k : phi.kinks()) kinks.push_back(k / u);
  return detail::expect_innovation(spec, [&](double z) { return phi(u * z); }, std::move(kinks), q);
}

/// E f(x + gamma b(t, x) + u Z).
inline double q_drift_operator(const ScalarConvexFn& f, const CoefficientFn& b, double gamma, double t,
                               const InnovationSpec& spec, double x, double u, const QuadratureOptions& q = {}) {
  detail::check_growth(f.growth_r(), spec, "q_drift_operator");
  const double c = x + gamma * b(t, x);
  if (u == 0.0) return f(c);
  std::vector<double> kinks;
  for (double k : f.kinks()) kinks.push_back((k - c) / u);
  return detail::expect_innovation(spec, [&](double z) { return f(c + u * z); }, std::move(kinks), q);
}

/// E f(x exp(h sqrt(dt) N - dt h^2 / 2)), N ~ N(0, 1).
inline double doleans_step(const ScalarConvexFn& f, double x, double h, double dt, int quad_nodes = 64) {
  require(x >= 0.0, ErrorCode::invalid_argument, "doleans_step: x must be >= 0");
  require(dt > 0.0, ErrorCode::invalid_argument, "doleans_step: dt must be > 0");
  require(std::isfinite(f.growth_r()), ErrorCode::growth_mismatch,
          "doleans_step: exponential growth is not integrable against a lognormal factor");
  const double s = h * std::sqrt(dt);
  if (s == 0.0 || x == 0.0) return f(x);
  std::vector<double> kinks;
  for (double k : f.kinks())
    if (k > 0.0) kinks.push_back((std::log(k / x) + 0.5 * s * s) / s);
  QuadratureOptions q;
  q.hermite_nodes = quad_nodes;
  return gaussian_expectation([&](double z) { return f(x * std::exp(s * z - 0.5 * s * s)); }, kinks, q);
}

// ---------------------------------------------------------------------------
// Hypotheses of the discrete comparison
// ---------------------------------------------------------------------------

enum class Hypothesis { partitioning, domination };

inline std::string_view to_string(Hypothesis h) { return h == Hypothesis::partitioning ? "partitioning" : "domination"; }

struct HypothesisReport {
  Hypothesis kind = Hypothesis::partitioning;
  double probe_lo = 0.0, probe_hi = 0.0;
  std::string detail;
};

namespace detail {

inline bool probe_all(std::span<const Section> a, double lo, double hi, int points,
                      const std::function<bool(std::size_t, double)>& pred) {
  for (std::size_t k = 0; k < a.size(); ++k)
    for (int i = 0; i <= points; ++i) {
      const double x = lo + (hi - lo) * i / points;
      if (!pred(k, x)) return false;
    }
  return true;
}

inline double probe_tol(double v) { return 1e-12 * std::max(1.0, std::abs(v)); }

}  // namespace detail

/// Certifies either hypothesis from the descriptors (convexity flags) and a
/// dense probe of the inequalities on [lo, hi]. Throws HypothesisUnverifiable
/// when neither holds. `kappas` optionally supplies partitioning functions.
inline HypothesisReport certify_hypothesis(std::span<const Section> sigmas, std::span<const Section> thetas,
                                           std::span<const InnovationSpec> specs, double lo, double hi,
                                           std::span<const Section> kappas = {}, int probe_points = 800) {
  require(sigmas.size() == thetas.size() && sigmas.size() == specs.size(), ErrorCode::invalid_argument,
          "certify_hypothesis: sigmas, thetas and specs must have equal length");
  require(kappas.empty() || kappas.size() == sigmas.size(), ErrorCode::invalid_argument,
          "certify_hypothesis: kappas must match sigmas");
  HypothesisReport rep;
  rep.probe_lo = lo;
  rep.probe_hi = hi;
  using detail::probe_tol;
  const bool sigma_nonneg =
      detail::probe_all(sigmas, lo, hi, probe_points, [&](std::size_t k, double x) { return sigmas[k](x) >= 0.0; });
  const bool sigma_le_theta = detail::probe_all(sigmas, lo, hi, probe_points, [&](std::size_t k, double x) {
    const double t = thetas[k](x);
    return sigmas[k](x) <= t + probe_tol(t);
  });
  auto all_convex = [](std::span<const Section> s) {
    return std::all_of(s.begin(), s.end(), [](const Section& c) { return c.convex(); });
  };
  if (sigma_nonneg && sigma_le_theta) {
    if (all_convex(sigmas)) {
      rep.detail = "0 <= sigma <= theta, sigma convex";
      return rep;
    }
    if (all_convex(thetas)) {
      rep.detail = "0 <= sigma <= theta, theta convex";
      return rep;
    }
    if (!kappas.empty() && all_convex(kappas) &&
        detail::probe_all(kappas, lo, hi, probe_points, [&](std::size_t k, double x) {
          const double kv = kappas[k](x);
          return sigmas[k](x) <= kv + probe_tol(kv) && kv <= thetas[k](x) + probe_tol(kv);
        })) {
      rep.detail = "0 <= sigma <= kappa <= theta, kappa convex";
      return rep;
    }
  }
  const bool symmetric = std::all_of(specs.begin(), specs.end(), [](const InnovationSpec& s) { return s.symmetric(); });
  const bool abs_le = detail::probe_all(sigmas, lo, hi, probe_points, [&](std::size_t k, double x) {
    const double t = thetas[k](x);
    return std::abs(sigmas[k](x)) <= t + probe_tol(t);
  });
  if (symmetric && all_convex(thetas) && abs_le) {
    rep.kind = Hypothesis::domination;
    rep.detail = "|sigma| <= theta, theta convex, symmetric innovations";
    return rep;
  }
  std::ostringstream os;
  os << "neither partitioning nor domination certified on [" << lo << ", " << hi << "]: sigma>=0 " << sigma_nonneg
     << ", sigma<=theta " << sigma_le_theta << ", |sigma|<=theta " << abs_le << ", symmetric specs " << symmetric
     << ", theta convex " << all_convex(thetas) << ", sigma convex " << all_convex(sigmas);
  fail(ErrorCode::hypothesis_unverifiable, os.str());
}

// ---------------------------------------------------------------------------
// Discrete convex-order backward induction
// ---------------------------------------------------------------------------

struct ConvexOrderResult {
  double phi0 = 0.0;
  double psi0 = 0.0;
  bool dominance = false;
  double tolerance = 0.0;
  HypothesisReport hypothesis;
  BackwardResult lhs;  // sigma side (Phi_k)
  BackwardResult rhs;  // theta side (Psi_k)
};

inline constexpr double kExactTolerance = 1e-10;

/// Probe interval for hypothesis checks: the union of the state ranges of
/// both dynamics.
inline std::pair<double, double> comparison_range(std::span<const Section> sigmas, std::span<const Section> thetas,
                                                  std::span<const StepLaw> laws, double x0, const GridOptions& g) {
  const auto a = state_range(sigmas, laws, x0, g);
  const auto b = state_range(thetas, laws, x0, g);
  return {std::min(a.first, b.first), std::max(a.second, b.second)};
}

/// Interval on which the hypotheses are probed: the reachable hull of both
/// chains when it can be enumerated, else the grid range.
inline std::pair<double, double> certification_range(std::span<const Section> sigmas, std::span<const Section> thetas,
                                                     std::span<const StepLaw> laws, double x0,
                                                     std::pair<double, double> grid_range) {
  const auto a = reachable_hull(sigmas, laws, x0);
  const auto b = a ? reachable_hull(thetas, laws, x0) : std::nullopt;
  if (!b) return grid_range;
  const double lo = std::min(a->first, b->first), hi = std::max(a->second, b->second);
  const double pad = 1e-9 * std::max(1.0, hi - lo);
  return {lo - pad, hi + pad};
}

/// Phi_0(x0) and Psi_0(x0) for X_{k+1} = X_k + sigma_k(X_k) Z_{k+1} and
/// Y_{k+1} = Y_k + theta_k(Y_k) Z_{k+1}, with the dominance verdict.
inline ConvexOrderResult backward_convex_order(std::span<const Section> sigmas, std::span<const Section> thetas,
                                               std::span<const InnovationSpec> specs, const PayoffFunctional& payoff,
                                               double x0, const EngineOptions& opts = {},
                                               std::span<const Section> kappas = {}) {
  require(!sigmas.empty() && sigmas.size() == thetas.size() && sigmas.size() == specs.size(),
          ErrorCode::invalid_argument, "backward_convex_order: sigmas, thetas and specs must have equal length");
  require(payoff.convex(), ErrorCode::hypothesis_unverifiable,
          "backward_convex_order: payoff " + payoff.describe() + " is not certified convex");
  for (const auto& s : specs) detail::check_growth(payoff.growth_r(), s, "backward_convex_order");
  auto laws = step_laws(specs, opts);
  const auto [lo, hi] = comparison_range(sigmas, thetas, laws, x0, opts.grid);
  ConvexOrderResult r;
  const auto [clo, chi] = certification_range(sigmas, thetas, laws, x0, {lo, hi});
  r.hypothesis = certify_hypothesis(sigmas, thetas, specs, clo, chi, kappas);
  // Both sides share one state grid so their interpolation errors are comparable.
  EngineOptions shared = opts;
  shared.grid.lo = lo;
  shared.grid.hi = hi;
  r.lhs = BackwardEngine(sigmas, laws, payoff, nullptr, x0, shared).run();
  r.rhs = BackwardEngine(thetas, std::move(laws), payoff, nullptr, x0, shared).run();
  r.phi0 = r.lhs.value;
  r.psi0 = r.rhs.value;
  r.tolerance = kExactTolerance + r.lhs.budget + r.rhs.budget;
  r.dominance = r.phi0 <= r.psi0 + r.tolerance;
  return r;
}

// ---------------------------------------------------------------------------
// Laplace recursion
// ---------------------------------------------------------------------------

struct LaplaceOptions {
  int quad_nodes = 64;
  int grid_nodes = 2049;
};

struct LaplaceResult {
  double value = 1.0;      // E exp(lambda X_n)
  double log_value = 0.0;  // tilde f_1(0)
  bool overflow = false;
  std::vector<ValueFunction> trace;  // tilde f_1 .. tilde f_n
};

/// E exp(lambda X_n) for X_n = sum_k f_k(S_{k-1}) Z_k, S the Gaussian random
/// walk, by the backward recursion
///   tf_{n+1} = 0,  tf_k(x) = lambda^2/2 f_k(x)^2 + log E exp(tf_{k+1}(x + lambda f_k(x) + Z)).
/// fks[0] is f_1.
inline LaplaceResult laplace_recursion(std::span<const Section> fks, double lambda, const LaplaceOptions& opts = {}) {
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::invalid_argument, "laplace_recursion: lambda must be >= 0");
  const int n = static_cast<int>(fks.size());
  LaplaceResult res;
  if (n == 0) return res;
  const double walk = 8.0 * std::sqrt(static_cast<double>(n));
  double fmax = 0.0;
  for (const auto& f : fks)
    for (int i = 0; i <= 400; ++i) {
      const double x = -walk + 2.0 * walk * i / 400.0;
      const double v = f(x);
      require(v >= 0.0, ErrorCode::invalid_argument, "laplace_recursion: f_k must be nonnegative");
      fmax = std::max(fmax, v);
    }
  const double L = walk + lambda * n * fmax + 1.0;
  const auto xs = uniform_grid(-L, L, opts.grid_nodes);
  const auto& rule = gauss_hermite(opts.quad_nodes);
  ValueFunction next(xs, std::vector<double>(xs.size(), 0.0));
  res.trace.resize(n);
  std::vector<double> terms(rule.nodes.size());
  for (int k = n; k >= 1; --k) {
    const auto& f = fks[k - 1];
    std::vector<double> cur(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double fk = f(xs[i]);
      const double shift = xs[i] + lambda * fk;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < terms.size(); ++j) {
        terms[j] = next(shift + rule.nodes[j]);
        m = std::max(m, terms[j]);
      }
      double s = 0.0;
      for (std::size_t j = 0; j < terms.size(); ++j) s += rule.weights[j] * std::exp(terms[j] - m);
      cur[i] = 0.5 * lambda * lambda * fk * fk + m + std::log(s);
    }
    next = ValueFunction(xs, std::move(cur));
    res.trace[k - 1] = next;
  }
  res.log_value = res.trace[0](0.0);
  res.overflow = res.log_value > std::log(std::numeric_limits<double>::max());
  res.value = res.overflow ? std::numeric_limits<double>::infinity() : std::exp(res.log_value);
  return res;
}

/// Per-lambda comparison of E exp(lambda X_n) (from f) and E exp(lambda Y_n)
/// (from g), after certifying 0 <= f_k <= g_k and the monotonicity flags.
inline std::vector<ComparisonReport> compare_laplace(std::span<const Section> fks, std::span<const Section> gks,
                                                     std::span<const double> lambdas, const LaplaceOptions& opts = {}) {
  require(fks.size() == gks.size() && !fks.empty(), ErrorCode::invalid_argument,
          "compare_laplace: f and g must have the same non-zero length");
  const double walk = 8.0 * std::sqrt(static_cast<double>(fks.size())) + 4.0;
  const bool ordered = detail::probe_all(fks, -walk, walk, 800, [&](std::size_t k, double x) {
    const double f = fks[k](x), g = gks[k](x);
    return f >= 0.0 && f <= g + detail::probe_tol(g);
  });
  require(ordered, ErrorCode::hypothesis_unverifiable, "compare_laplace: 0 <= f_k <= g_k fails on the probe grid");
  auto all_nondecreasing = [](std::span<const Section> s) {
    return std::all_of(s.begin(), s.end(), [](const Section& c) { return c.nondecreasing(); });
  };
  require(all_nondecreasing(fks) || all_nondecreasing(gks), ErrorCode::hypothesis_unverifiable,
          "compare_laplace: neither all f_k nor all g_k are certified nondecreasing");
  std::vector<ComparisonReport> out;
  for (double lambda : lambdas) {
    const auto lf = laplace_recursion(fks, lambda, opts);
    const auto lg = laplace_recursion(gks, lambda, opts);
    std::ostringstream label;
    label << "laplace lambda=" << lambda;
    out.push_back(exact_report(label.str(), lf.value, lg.value, 1e-9 * std::max(1.0, std::abs(lg.value)), "recursion"));
  }
  return out;
}

}  // namespace cvxorder
