#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "cvxorder/black_scholes.hpp"
#include "cvxorder/coefficient.hpp"
#include "cvxorder/dynamics.hpp"
#include "cvxorder/errors.hpp"
#include "cvxorder/noise.hpp"
#include "cvxorder/operators.hpp"
#include "cvxorder/parallel.hpp"
#include "cvxorder/payoffs.hpp"
#include "cvxorder/quadrature.hpp"
#include "cvxorder/report.hpp"
#include "cvxorder/rng.hpp"

namespace cvxorder {

struct McOptions {
  std::uint64_t n_paths = 100000;
  std::uint64_t seed = 1;
  unsigned threads = default_threads();
  double z = 3.0;
};

/// dX = sigma(t, X) dW, genuine Euler scheme.
struct BrownianEuler {
  CoefficientFn sigma;
};
/// dX = kappa(t, X_-) dZ for a compensated Brownian + compound Poisson Z.
struct LevyEuler {
  CoefficientFn kappa;
  LevySpec levy;
};
using SdeModel = std::variant<BrownianEuler, LevyEuler>;

namespace detail {

inline bool same_noise(const LevySpec& a, const LevySpec& b) {
  if (a.brownian_coeff() != b.brownian_coeff() || a.intensity() != b.intensity()) return false;
  const auto ja = jump_atoms(a.jump_law(), 16), jb = jump_atoms(b.jump_law(), 16);
  if (ja.size() != jb.size()) return false;
  for (std::size_t i = 0; i < ja.size(); ++i)
    if (ja[i].value != jb[i].value || ja[i].prob != jb[i].prob) return false;
  return true;
}

inline const CoefficientFn& model_coefficient(const SdeModel& m) {
  return std::visit(
      [](const auto& x) -> const CoefficientFn& {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, BrownianEuler>) return x.sigma;
        else return x.kappa;
      },
      m);
}

/// Runs body(path_index, stream) for every path, each with its own stream.
template <class Body>
void for_each_path(const McOptions& mc, Body&& body) {
  parallel_for(mc.n_paths, mc.threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) {
      RngStream stream(mc.seed, j);
      body(j, stream);
    }
  });
}

}  // namespace detail

/// Checks that two models can share one innovation stream.
inline void check_crn_compatible(const SdeModel& a, const SdeModel& b) {
  require(a.index() == b.index(), ErrorCode::config_error,
          "CRN comparison needs both models driven by the same kind of noise (Brownian or Levy)");
  if (const auto* la = std::get_if<LevyEuler>(&a)) {
    const auto& lb = std::get<LevyEuler>(b);
    require(detail::same_noise(la->levy, lb.levy), ErrorCode::config_error,
            "CRN comparison needs both Levy models driven by the same Levy process");
  }
}

/// Noise increments for one path of `model` on `grid`.
inline void model_increments(const SdeModel& model, const GridSpec& grid, RngStream& stream, std::span<double> dz) {
  if (const auto* l = std::get_if<LevyEuler>(&model)) levy_increments(l->levy, grid, stream, dz);
  else brownian_increments(grid, stream, dz);
}

/// Paired Monte-Carlo comparison E F(X^lo) <= E F(X^hi) with common noise.
inline ComparisonReport mc_compare_european(const SdeModel& model_lo, const SdeModel& model_hi,
                                            const PayoffFunctional& payoff, const GridSpec& grid, double x0,
                                            const McOptions& mc, std::string label = "european") {
  check_crn_compatible(model_lo, model_hi);
  std::vector<double> lhs(mc.n_paths), rhs(mc.n_paths);
  const auto& c_lo = detail::model_coefficient(model_lo);
  const auto& c_hi = detail::model_coefficient(model_hi);
  detail::for_each_path(mc, [&](std::size_t j, RngStream& stream) {
    std::vector<double> dz(grid.n), x(grid.n + 1), y(grid.n + 1);
    model_increments(model_lo, grid, stream, dz);
    euler_from_increments(c_lo, grid, x0, dz, x);
    euler_from_increments(c_hi, grid, x0, dz, y);
    lhs[j] = payoff(x);
    rhs[j] = payoff(y);
  });
  return paired_report(std::move(label), lhs, rhs, mc.seed, mc.z);
}

// ---------------------------------------------------------------------------
// Black-Scholes sandwich
// ---------------------------------------------------------------------------

struct SandwichReport {
  double sigma_min = 0.0, sigma_max = 0.0;
  double bs_min = 0.0, bs_max = 0.0;  // closed-form / exact quadrature values
  Estimate mc;                        // local-vol Euler value
  double delta_n = 0.0;               // |E_n - E_{n/2}| on common paths
  double lower = 0.0, upper = 0.0;    // bracket incl. 3 se and delta_n
  double intrinsic = 0.0;
  std::uint64_t nonpositive_paths = 0;
  std::uint64_t seed = 0;
  double z = 3.0;
  Verdict verdict = Verdict::inconclusive;
};

/// E f(S^{sigma}_T) for constant sigma, exactly (lognormal quadrature).
inline double bs_value(const ScalarConvexFn& f, double s0, double sigma, double T) {
  return doleans_step(f, s0, sigma, T);
}

/// Brackets the local-vol value of a terminal payoff between the
/// Black-Scholes values at the certified bounds of sigma.
inline SandwichReport bs_sandwich(const CoefficientFn& local_sigma, const ScalarConvexFn& f, const GridSpec& grid,
                                  double s0, const McOptions& mc) {
  const auto& tr = local_sigma.traits();
  require(tr.bounded() && *tr.lower >= 0.0, ErrorCode::bounds_uncertified,
          "bs_sandwich: sigma must carry certified bounds 0 <= sigma_min <= sigma_max, got " + local_sigma.describe());
  require(s0 > 0.0, ErrorCode::invalid_argument, "bs_sandwich: s0 must be > 0");
  SandwichReport r;
  r.sigma_min = *tr.lower;
  r.sigma_max = *tr.upper;
  r.bs_min = bs_value(f, s0, r.sigma_min, grid.T);
  r.bs_max = bs_value(f, s0, r.sigma_max, grid.T);
  r.intrinsic = f(s0);
  r.seed = mc.seed;
  r.z = mc.z;
  const auto wrapped = CoefficientFn::local_vol_wrap(local_sigma);
  const bool coarse = grid.n % 2 == 0;
  const GridSpec half = coarse ? GridSpec(grid.n / 2, grid.T) : grid;
  std::vector<double> fine(mc.n_paths), diff(mc.n_paths, 0.0);
  std::vector<std::uint8_t> nonpos(mc.n_paths, 0);
  detail::for_each_path(mc, [&](std::size_t j, RngStream& stream) {
    std::vector<double> dw(grid.n), x(grid.n + 1);
    brownian_increments(grid, stream, dw);
    euler_from_increments(wrapped, grid, s0, dw, x);
    fine[j] = f(x.back());
    nonpos[j] = *std::min_element(x.begin(), x.end()) <= 0.0;
    if (coarse) {
      std::vector<double> dw2(half.n), y(half.n + 1);
      for (int k = 0; k < half.n; ++k) dw2[k] = dw[2 * k] + dw[2 * k + 1];
      euler_from_increments(wrapped, half, s0, dw2, y);
      diff[j] = fine[j] - f(y.back());
    }
  });
  r.mc = estimate(fine);
  r.delta_n = std::abs(estimate(diff).mean);
  for (auto b : nonpos) r.nonpositive_paths += b;
  r.lower = r.bs_min - mc.z * r.mc.se - r.delta_n;
  r.upper = r.bs_max + mc.z * r.mc.se + r.delta_n;
  if (!std::isfinite(r.mc.mean)) r.verdict = Verdict::inconclusive;
  else r.verdict = r.mc.mean >= r.lower && r.mc.mean <= r.upper ? Verdict::dominance_confirmed : Verdict::violation_detected;
  return r;
}

// ---------------------------------------------------------------------------
// Peacock scan
// ---------------------------------------------------------------------------

struct PeacockReport {
  std::vector<double> sigmas;
  std::vector<Estimate> estimates;
  std::vector<ComparisonReport> steps;  // sigma_i vs sigma_{i+1}
  std::optional<ComparisonReport> span;  // first vs last
  bool monotone = true;
  bool strict_span = false;  // last - first > z se
};

/// E F(S^{sigma}) over ascending constant sigmas with common Brownian paths,
/// S the local-vol Euler scheme dS = sigma S dW.
inline PeacockReport peacock_scan(std::span<const double> sigma_values, const PayoffFunctional& payoff,
                                  const GridSpec& grid, double s0, const McOptions& mc) {
  require(!sigma_values.empty() && std::is_sorted(sigma_values.begin(), sigma_values.end()),
          ErrorCode::invalid_argument, "peacock_scan: sigma values must be non-empty and ascending");
  const std::size_t m = sigma_values.size();
  std::vector<CoefficientFn> coefs;
  for (double s : sigma_values) coefs.push_back(CoefficientFn::local_vol_wrap(CoefficientFn::constant(s)));
  std::vector<std::vector<double>> vals(m, std::vector<double>(mc.n_paths));
  detail::for_each_path(mc, [&](std::size_t j, RngStream& stream) {
    std::vector<double> dw(grid.n), x(grid.n + 1);
    brownian_increments(grid, stream, dw);
    for (std::size_t i = 0; i < m; ++i) {
      euler_from_increments(coefs[i], grid, s0, dw, x);
      vals[i][j] = payoff(x);
    }
  });
  PeacockReport r;
  r.sigmas.assign(sigma_values.begin(), sigma_values.end());
  for (const auto& v : vals) r.estimates.push_back(estimate(v));
  for (std::size_t i = 0; i + 1 < m; ++i) {
    std::ostringstream label;
    label << "sigma " << sigma_values[i] << " vs " << sigma_values[i + 1];
    r.steps.push_back(paired_report(label.str(), vals[i], vals[i + 1], mc.seed, mc.z));
    r.monotone = r.monotone && r.steps.back().confirmed();
  }
  if (m >= 2) {
    std::ostringstream label;
    label << "sigma " << sigma_values.front() << " vs " << sigma_values.back();
    r.span = paired_report(label.str(), vals.front(), vals.back(), mc.seed, mc.z);
    r.strict_span = -r.span->paired_diff_mean > mc.z * r.span->paired_diff_se;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Stochastic integrals with adapted integrands
// ---------------------------------------------------------------------------

enum class Direction { upper, lower };

inline std::string_view to_string(Direction d) { return d == Direction::upper ? "upper" : "lower"; }

/// Built-in adapted integrands H_k = rule(h_k, X_k).
enum class IntegrandRule { zero, constant, sin_damped, amplified, bounded_amplified };

inline std::string_view to_string(IntegrandRule r) {
  switch (r) {
    case IntegrandRule::zero: return "zero";
    case IntegrandRule::constant: return "constant";
    case IntegrandRule::sin_damped: return "sin_damped";
    case IntegrandRule::amplified: return "amplified";
    case IntegrandRule::bounded_amplified: return "bounded_amplified";
  }
  return "?";
}

/// zero: 0; constant: h_k; sin_damped: h_k |sin X_k|; amplified:
/// h_k (1 + |X_k|); bounded_amplified: h_k (1 + |sin X_k| / 2).
inline AdaptedRule make_integrand(IntegrandRule rule, std::vector<double> h) {
  return [rule, h = std::move(h)](const AdaptedHistory& past) -> double {
    const double hk = h[past.k];
    const double x = past.x[past.k];
    switch (rule) {
      case IntegrandRule::zero: return 0.0;
      case IntegrandRule::constant: return hk;
      case IntegrandRule::sin_damped: return hk * std::abs(std::sin(x));
      case IntegrandRule::amplified: return hk * (1.0 + std::abs(x));
      case IntegrandRule::bounded_amplified: return hk * (1.0 + 0.5 * std::abs(std::sin(x)));
    }
    return 0.0;
  };
}

struct IntegrandOptions {
  Direction direction = Direction::upper;
  std::optional<LevySpec> levy;  // Levy-Ito analogue when set
  double x0 = 0.0;               // added to the integral (Ito comparisons)
  double guard = std::numeric_limits<double>::infinity();  // sup |H| cap (Doleans lower direction)
};

namespace detail {

inline void check_domination(Direction dir, bool levy, double H, double h, std::size_t path, int k) {
  constexpr double tol = 1e-12;
  bool ok;
  if (dir == Direction::upper) ok = levy ? (H >= -tol && H <= h + tol) : std::abs(H) <= h + tol;
  else ok = H >= h - tol && h >= -tol;
  if (!ok) {
    std::ostringstream os;
    os << "declared " << to_string(dir) << " domination broken on path " << path << " at step " << k << ": H = " << H
       << ", h = " << h;
    fail(ErrorCode::domination_violated, os.str());
  }
}

/// Orients a pair so that the expected-smaller side is the lhs.
inline ComparisonReport oriented_report(std::string label, Direction dir, std::span<const double> with_H,
                                        std::span<const double> with_h, const McOptions& mc) {
  return dir == Direction::upper ? paired_report(std::move(label), with_H, with_h, mc.seed, mc.z)
                                 : paired_report(std::move(label), with_h, with_H, mc.seed, mc.z);
}

}  // namespace detail

/// E F(x0 + int H dZ) against E F(x0 + int h dZ), h deterministic, on common
/// noise; upper: |H| <= h (Levy: 0 <= H <= h); lower: H >= h >= 0.
inline ComparisonReport ito_integrand_compare(const AdaptedRule& H_rule, std::span<const double> h,
                                              const PayoffFunctional& payoff, const GridSpec& grid,
                                              const McOptions& mc, const IntegrandOptions& io = {}) {
  require(h.size() == static_cast<std::size_t>(grid.n), ErrorCode::grid_mismatch,
          "ito_integrand_compare: h must have one value per step");
  const std::vector<double> hv(h.begin(), h.end());
  const AdaptedRule h_rule = [&hv](const AdaptedHistory& p) { return hv[p.k]; };
  std::vector<double> lhs(mc.n_paths), rhs(mc.n_paths);
  detail::for_each_path(mc, [&](std::size_t j, RngStream& stream) {
    std::vector<double> dz(grid.n), used;
    if (io.levy) levy_increments(*io.levy, grid, stream, dz);
    else brownian_increments(grid, stream, dz);
    auto xH = discrete_stoch_integral_from(H_rule, dz, grid, &used);
    for (int k = 0; k < grid.n; ++k) detail::check_domination(io.direction, io.levy.has_value(), used[k], hv[k], j, k);
    auto xh = discrete_stoch_integral_from(h_rule, dz, grid);
    for (auto& v : xH.values) v += io.x0;
    for (auto& v : xh.values) v += io.x0;
    lhs[j] = payoff(xH);
    rhs[j] = payoff(xh);
  });
  return detail::oriented_report(std::string(io.levy ? "levy-ito " : "ito ") + std::string(to_string(io.direction)),
                                 io.direction, lhs, rhs, mc);
}

/// E F(Xi^H) against E F(Xi^h) for the discrete Doleans exponentials on
/// common Brownian increments.
inline ComparisonReport doleans_compare(const AdaptedRule& H_rule, std::span<const double> h,
                                        const PayoffFunctional& payoff, const GridSpec& grid, const McOptions& mc,
                                        const IntegrandOptions& io = {}) {
  require(h.size() == static_cast<std::size_t>(grid.n), ErrorCode::grid_mismatch,
          "doleans_compare: h must have one value per step");
  const std::vector<double> hv(h.begin(), h.end());
  const AdaptedRule h_rule = [&hv](const AdaptedHistory& p) { return hv[p.k]; };
  std::vector<double> lhs(mc.n_paths), rhs(mc.n_paths);
  detail::for_each_path(mc, [&](std::size_t j, RngStream& stream) {
    std::vector<double> dw(grid.n), used;
    brownian_increments(grid, stream, dw);
    const auto xiH = doleans_from(H_rule, dw, grid, &used);
    for (int k = 0; k < grid.n; ++k) {
      detail::check_domination(io.direction, false, used[k], hv[k], j, k);
      if (std::abs(used[k]) > io.guard) {
        std::ostringstream os;
        os << "exponential-moment guard: |H| = " << std::abs(used[k]) << " exceeds " << io.guard << " on path " << j;
        fail(ErrorCode::domination_violated, os.str());
      }
    }
    const auto xih = doleans_from(h_rule, dw, grid);
    lhs[j] = payoff(xiH);
    rhs[j] = payoff(xih);
  });
  return detail::oriented_report("doleans " + std::string(to_string(io.direction)), io.direction, lhs, rhs, mc);
}

// ---------------------------------------------------------------------------
// Completely monotone comparison
// ---------------------------------------------------------------------------

struct MixtureTerm {
  double weight = 1.0;
  double lambda = 0.0;
};

struct CmReport {
  std::vector<ComparisonReport> per_lambda;
  ComparisonReport mixed;
  std::vector<ComparisonReport> recursion;  // compare_laplace on the same chain (when requested)
};

/// Discrete Laplace chain of the integral sum_k f(t_{k-1}, W_{t_{k-1}}) dW_k:
/// f_k(s) = sqrt(dt) f(t_{k-1}, sqrt(dt) s) in units of standardized steps.
inline std::vector<Section> laplace_sections(const CoefficientFn& f, const GridSpec& grid) {
  std::vector<Section> out;
  const double sd = std::sqrt(grid.dt());
  for (int k = 0; k < grid.n; ++k) out.push_back(section(f, grid.t(k), sd, sd));
  return out;
}

/// E phi(int f dW) <= E phi(int g dW) for phi = sum_i w_i exp(lambda_i x),
/// per lambda and for the mixture, by paired MC on the discretized integrals.
inline CmReport completely_monotone_compare(const CoefficientFn& f, const CoefficientFn& g,
                                            std::span<const MixtureTerm> mixture, const GridSpec& grid,
                                            const McOptions& mc, bool cross_check = false) {
  require(!mixture.empty(), ErrorCode::invalid_argument, "cm_compare: empty mixture");
  for (const auto& t : mixture)
    require(t.weight >= 0.0 && t.lambda >= 0.0, ErrorCode::invalid_argument,
            "cm_compare: mixture weights and lambdas must be >= 0");
  const double reach = 8.0 * std::sqrt(grid.T) + 4.0;
  for (int k = 0; k <= grid.n; ++k)
    for (int i = 0; i <= 400; ++i) {
      const double t = grid.t(k), x = -reach + 2.0 * reach * i / 400.0;
      const double fv = f(t, x), gv = g(t, x);
      require(fv >= 0.0 && fv <= gv + detail::probe_tol(gv), ErrorCode::hypothesis_unverifiable,
              "cm_compare: 0 <= f <= g fails on the probe grid");
    }
  require(f.traits().nondecreasing || g.traits().nondecreasing, ErrorCode::hypothesis_unverifiable,
          "cm_compare: neither f nor g is certified nondecreasing in x");
  const std::size_t m = mixture.size();
  std::vector<std::vector<double>> lhs(m + 1, std::vector<double>(mc.n_paths)), rhs = lhs;
  detail::for_each_path(mc, [&](std::size_t j, RngStream& stream) {
    std::vector<double> dw(grid.n);
    brownian_increments(grid, stream, dw);
    double w = 0.0, x = 0.0, y = 0.0;
    for (int k = 0; k < grid.n; ++k) {
      const double t = grid.t(k);
      x += f(t, w) * dw[k];
      y += g(t, w) * dw[k];
      w += dw[k];
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      lhs[i][j] = mixture[i].weight * std::exp(mixture[i].lambda * x);
      rhs[i][j] = mixture[i].weight * std::exp(mixture[i].lambda * y);
      mx += lhs[i][j];
      my += rhs[i][j];
    }
    lhs[m][j] = mx;
    rhs[m][j] = my;
  });
  CmReport r;
  for (std::size_t i = 0; i < m; ++i) {
    std::ostringstream label;
    label << "cm lambda=" << mixture[i].lambda << " weight=" << mixture[i].weight;
    r.per_lambda.push_back(paired_report(label.str(), lhs[i], rhs[i], mc.seed, mc.z));
  }
  r.mixed = paired_report("cm mixture", lhs[m], rhs[m], mc.seed, mc.z);
  if (cross_check) {
    std::vector<double> lambdas;
    for (const auto& t : mixture) lambdas.push_back(t.lambda);
    r.recursion = compare_laplace(laplace_sections(f, grid), laplace_sections(g, grid), lambdas);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Counterexamples
// ---------------------------------------------------------------------------

struct TwoPeriodReport {
  double c = 0.0, x0 = 0.0;
  std::vector<double> sigmas, phi;  // the curve phi(x0, sigma)
  double decreasing_until = 0.0;    // last grid sigma of the initial strictly decreasing run
  double fd_second_derivative = 0.0;
  double analytic_second_derivative = 0.0;
  double fd_step = 0.0;
};

/// phi(x0, sigma) = e^{x0} E exp(sigma Z + v(x0 + sigma Z)), v(x) = c exp(-(x - x0)^2).
inline double two_period_phi(double c, double x0, double sigma, int quad_nodes = 64) {
  const auto& rule = gauss_hermite(quad_nodes);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double u = sigma * rule.nodes[i];
    s += rule.weights[i] * std::exp(u + c * std::exp(-u * u));
  }
  return std::exp(x0) * s;
}

inline TwoPeriodReport counterexample_two_period(double c, double x0, std::span<const double> sigma_grid,
                                                 int quad_nodes = 64, double fd_step = 1e-3) {
  require(c > 0.5, ErrorCode::param_out_of_range, "counterexample_two_period: c must exceed 1/2 so that v''(x0) < -1");
  TwoPeriodReport r;
  r.c = c;
  r.x0 = x0;
  r.fd_step = fd_step;
  r.sigmas.assign(sigma_grid.begin(), sigma_grid.end());
  for (double s : sigma_grid) r.phi.push_back(two_period_phi(c, x0, s, quad_nodes));
  for (std::size_t i = 1; i < r.phi.size() && r.phi[i] < r.phi[i - 1]; ++i) r.decreasing_until = r.sigmas[i];
  const double p0 = two_period_phi(c, x0, 0.0, quad_nodes);
  const double ph = two_period_phi(c, x0, fd_step, quad_nodes);
  const double pm = two_period_phi(c, x0, -fd_step, quad_nodes);
  r.fd_second_derivative = (ph - 2.0 * p0 + pm) / (fd_step * fd_step);
  r.analytic_second_derivative = std::exp(x0 + c) * (1.0 - 2.0 * c);
  return r;
}

struct IntegrandCounterexampleReport {
  double sigma = 0.0, sigma_tilde = 0.0;
  double sigma0 = std::numeric_limits<double>::infinity();  // scan result
  double phi_sigma = 0.0, phi_sigma_tilde = 0.0;            // quadrature
  double phi_prime0 = 0.0;                                  // E e^{v(Z)} Z
  Estimate mc_sigma, mc_sigma_tilde;
  ComparisonReport paired;  // lhs = sigma_tilde side (naively larger), rhs = sigma side
  bool reversal = false;    // phi(sigma) > phi(sigma_tilde) by quadrature
  bool mc_agrees = false;   // both MC values within z se of quadrature
  std::vector<double> scan_sigmas, scan_phi, scan_dphi;
};

/// E exp(sigma Z + v(Z)) and its sigma-derivative E Z exp(sigma Z + v(Z)).
inline std::pair<double, double> integrand_phi(const CoefficientFn& v, double sigma, int quad_nodes = 64) {
  const auto& rule = gauss_hermite(quad_nodes);
  double p = 0.0, d = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double z = rule.nodes[i];
    const double e = rule.weights[i] * std::exp(sigma * z + v(0.0, z));
    p += e;
    d += z * e;
  }
  return {p, d};
}

/// Integrand H = sigma on [0,1], sqrt(2 v(W_1)) on (1,2]: E exp(int H dW)
/// reduces to E exp(sigma Z + v(Z)), evaluated by quadrature and by a
/// two-block Monte Carlo.
inline IntegrandCounterexampleReport counterexample_integrand(const CoefficientFn& v, double sigma, double sigma_tilde,
                                                              const McOptions& mc, int quad_nodes = 64,
                                                              double scan_step = 0.05, double scan_max = 2.0) {
  const auto& tr = v.traits();
  require(tr.nonincreasing && tr.bounded() && *tr.lower >= 0.0, ErrorCode::hypothesis_unverifiable,
          "counterexample_integrand: v must be certified nonnegative, bounded and nonincreasing, got " + v.describe());
  require(0.0 < sigma && sigma < sigma_tilde, ErrorCode::param_out_of_range,
          "counterexample_integrand: need 0 < sigma < sigma_tilde");
  IntegrandCounterexampleReport r;
  r.sigma = sigma;
  r.sigma_tilde = sigma_tilde;
  const int steps = static_cast<int>(std::lround(scan_max / scan_step));
  for (int i = 0; i <= steps; ++i) {
    const double s = scan_step * i;
    const auto [p, d] = integrand_phi(v, s, quad_nodes);
    r.scan_sigmas.push_back(s);
    r.scan_phi.push_back(p);
    r.scan_dphi.push_back(d);
  }
  // sigma0: largest scan point before the first sign change of phi'.
  for (std::size_t i = 1; i < r.scan_dphi.size(); ++i)
    if (r.scan_dphi[0] < 0.0 && r.scan_dphi[i] >= 0.0) {
      r.sigma0 = r.scan_sigmas[i - 1];
      break;
    }
  const bool constant_v = *tr.lower == *tr.upper;
  if (!constant_v && std::isfinite(r.sigma0))
    require(sigma_tilde <= r.sigma0 + 1e-12, ErrorCode::param_out_of_range,
            "counterexample_integrand: sigma_tilde exceeds the scanned sigma0");
  r.phi_sigma = integrand_phi(v, sigma, quad_nodes).first;
  r.phi_sigma_tilde = integrand_phi(v, sigma_tilde, quad_nodes).first;
  r.phi_prime0 = integrand_phi(v, 0.0, quad_nodes).second;
  r.reversal = r.phi_sigma > r.phi_sigma_tilde;
  std::vector<double> a(mc.n_paths), b(mc.n_paths);
  detail::for_each_path(mc, [&](std::size_t j, RngStream& stream) {
    const double w1 = stream.normal();
    const double dw2 = stream.normal();
    const double second = std::sqrt(2.0 * v(0.0, w1)) * dw2;
    a[j] = std::exp(sigma * w1 + second);
    b[j] = std::exp(sigma_tilde * w1 + second);
  });
  r.mc_sigma = estimate(a);
  r.mc_sigma_tilde = estimate(b);
  r.paired = paired_report("integrand sigma_tilde vs sigma", b, a, mc.seed, mc.z);
  r.mc_agrees = std::abs(r.mc_sigma.mean - r.phi_sigma) <= mc.z * r.mc_sigma.se &&
                std::abs(r.mc_sigma_tilde.mean - r.phi_sigma_tilde) <= mc.z * r.mc_sigma_tilde.se;
  return r;
}

}  // namespace cvxorder
