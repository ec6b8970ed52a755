#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "cvxorder/coefficient.hpp"
#include "cvxorder/errors.hpp"
#include "cvxorder/noise.hpp"
#include "cvxorder/rng.hpp"

namespace cvxorder {

/// Uniform mesh t_k = k T / n of [0, T].
struct GridSpec {
  int n = 1;
  double T = 1.0;

  GridSpec() = default;
  GridSpec(int steps, double horizon) : n(steps), T(horizon) {
    require(n >= 1, ErrorCode::invalid_argument, "GridSpec: n must be >= 1");
    require(T > 0.0 && std::isfinite(T), ErrorCode::invalid_argument, "GridSpec: T must be > 0");
  }

  double t(int k) const { return T * k / n; }
  double dt() const { return T / n; }
  bool operator==(const GridSpec&) const = default;
};

/// Values of a process at the n + 1 grid points.
struct Path {
  GridSpec grid;
  std::vector<double> values;

  Path() = default;
  Path(GridSpec g, std::vector<double> v) : grid(g), values(std::move(v)) {
    require(values.size() == static_cast<std::size_t>(grid.n) + 1, ErrorCode::grid_mismatch,
            "Path: values must have n + 1 entries");
  }
  double terminal() const { return values.back(); }
  double sup_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
};

// ---------------------------------------------------------------------------
// Interpolators
// ---------------------------------------------------------------------------

/// Piecewise-affine interpolation of grid values at time t in [0, T].
inline double interpolate_in(const Path& path, double t) {
  const auto& g = path.grid;
  require(t >= 0.0 && t <= g.T, ErrorCode::out_of_range, "interpolate_in: t outside [0, T]");
  const double s = t * g.n / g.T;
  int k = static_cast<int>(std::floor(s));
  if (k >= g.n) return path.values[g.n];
  k = std::max(k, 0);
  const double tk = g.t(k), tk1 = g.t(k + 1);
  if (t == tk) return path.values[k];
  if (t == tk1) return path.values[k + 1];
  return (g.n / g.T) * ((tk1 - t) * path.values[k] + (t - tk) * path.values[k + 1]);
}

/// Stepwise-constant (cadlag) evaluation X_t = X_{floor(t)_n} used for
/// jump-driven schemes.
inline double evaluate_stepwise(const Path& path, double t) {
  const auto& g = path.grid;
  require(t >= 0.0 && t <= g.T, ErrorCode::out_of_range, "evaluate_stepwise: t outside [0, T]");
  int k = static_cast<int>(std::floor(t * g.n / g.T));
  k = std::clamp(k, 0, g.n);
  if (g.t(k) > t && k > 0) --k;
  return path.values[k];
}

// ---------------------------------------------------------------------------
// Schemes driven by precomputed increments. These are the CRN building
// blocks: one increment vector can feed several models.
// ---------------------------------------------------------------------------

/// X_{k+1} = X_k + sigma_k(X_k) dZ_{k+1}
inline void discrete_from_increments(std::span<const Section> sigmas, double x0, std::span<const double> dz,
                                     std::span<double> out) {
  out[0] = x0;
  for (std::size_t k = 0; k < dz.size(); ++k) out[k + 1] = out[k] + sigmas[k](out[k]) * dz[k];
}

/// Genuine Euler scheme X_{t_{k+1}} = X_{t_k} + c(t_k, X_{t_k}) dZ_{k+1}
/// on the grid.
inline void euler_from_increments(const CoefficientFn& c, const GridSpec& grid, double x0, std::span<const double> dz,
                                  std::span<double> out) {
  out[0] = x0;
  for (int k = 0; k < grid.n; ++k) out[k + 1] = out[k] + c(grid.t(k), out[k]) * dz[k];
}

inline void brownian_increments(const GridSpec& grid, RngStream& stream, std::span<double> dw) {
  const double sd = std::sqrt(grid.dt());
  for (int k = 0; k < grid.n; ++k) dw[k] = sd * stream.normal();
}

inline void levy_increments(const LevySpec& levy, const GridSpec& grid, RngStream& stream, std::span<double> dz) {
  for (int k = 0; k < grid.n; ++k) dz[k] = sample_levy_increment(levy, grid.dt(), stream);
}

// ---------------------------------------------------------------------------
// Simulators
// ---------------------------------------------------------------------------

/// The discrete recursion X_{k+1} = X_k + sigma_k(X_k) Z_{k+1} with
/// Z_{k+1} ~ specs[k]. Returned on a unit-step grid (T = n).
inline Path simulate_discrete(std::span<const Section> sigmas, std::span<const InnovationSpec> specs, double x0,
                              RngStream& stream) {
  require(sigmas.size() == specs.size() && !sigmas.empty(), ErrorCode::invalid_argument,
          "simulate_discrete: sigmas and specs must be non-empty and of equal length");
  const int n = static_cast<int>(sigmas.size());
  std::vector<double> dz(n);
  for (int k = 0; k < n; ++k) dz[k] = specs[k].sample(stream);
  Path p(GridSpec(n, n), std::vector<double>(n + 1));
  discrete_from_increments(sigmas, x0, dz, p.values);
  return p;
}

inline Path euler_brownian(const CoefficientFn& sigma, const GridSpec& grid, double x0, RngStream& stream) {
  std::vector<double> dw(grid.n);
  brownian_increments(grid, stream, dw);
  Path p(grid, std::vector<double>(grid.n + 1));
  euler_from_increments(sigma, grid, x0, dw, p.values);
  return p;
}

inline Path euler_levy(const CoefficientFn& kappa, const LevySpec& levy, const GridSpec& grid, double x0,
                       RngStream& stream) {
  std::vector<double> dz(grid.n);
  levy_increments(levy, grid, stream, dz);
  Path p(grid, std::vector<double>(grid.n + 1));
  euler_from_increments(kappa, grid, x0, dz, p.values);
  return p;
}

/// Euler path of dS = S sigma(t, S) dW, with the coefficient extended by
/// zero on S <= 0. `sigma` must be bounded.
inline Path simulate_local_vol(const CoefficientFn& sigma, const GridSpec& grid, double s0, RngStream& stream) {
  require(sigma.traits().bounded(), ErrorCode::bounds_uncertified,
          "simulate_local_vol: sigma must be bounded, got " + sigma.describe());
  require(s0 > 0.0, ErrorCode::invalid_argument, "simulate_local_vol: s0 must be > 0");
  return euler_brownian(CoefficientFn::local_vol_wrap(sigma), grid, s0, stream);
}

/// What an adapted integrand rule may look at before step k + 1: the past
/// draws Z_1..Z_k and the integral path X_0..X_k built from them.
struct AdaptedHistory {
  int k;
  double t;
  std::span<const double> z;  // size k
  std::span<const double> x;  // size k + 1
};

using AdaptedRule = std::function<double(const AdaptedHistory&)>;

/// Partial sums X_k = sum_{l <= k} H_{l-1} Z_l with Z_l ~ specs[l-1]. The
/// rule is called with the history up to step k before Z_{k+1} is drawn.
inline Path discrete_stoch_integral_from(const AdaptedRule& rule, std::span<const double> dz, const GridSpec& grid,
                                         std::vector<double>* integrand = nullptr) {
  const int n = static_cast<int>(dz.size());
  Path p(grid, std::vector<double>(n + 1, 0.0));
  if (integrand) integrand->assign(n, 0.0);
  for (int k = 0; k < n; ++k) {
    const double h = rule(AdaptedHistory{k, grid.t(k), dz.first(k), std::span<const double>(p.values).first(k + 1)});
    if (integrand) (*integrand)[k] = h;
    p.values[k + 1] = p.values[k] + h * dz[k];
  }
  return p;
}

inline Path discrete_stoch_integral(const AdaptedRule& rule, std::span<const InnovationSpec> specs, RngStream& stream) {
  const int n = static_cast<int>(specs.size());
  require(n >= 1, ErrorCode::invalid_argument, "discrete_stoch_integral: need at least one step");
  std::vector<double> dz(n);
  for (int k = 0; k < n; ++k) dz[k] = specs[k].sample(stream);
  return discrete_stoch_integral_from(rule, dz, GridSpec(n, n));
}

/// Xi_k = Xi_{k-1} exp(H_{k-1} dW_k - dt H_{k-1}^2 / 2), Xi_0 = 1. The rule
/// sees the Brownian increments so far and the Xi path so far.
inline Path doleans_from(const AdaptedRule& rule, std::span<const double> dw, const GridSpec& grid,
                         std::vector<double>* integrand = nullptr) {
  const int n = grid.n;
  Path p(grid, std::vector<double>(n + 1, 1.0));
  if (integrand) integrand->assign(n, 0.0);
  const double dt = grid.dt();
  for (int k = 0; k < n; ++k) {
    const double h = rule(AdaptedHistory{k, grid.t(k), dw.first(k), std::span<const double>(p.values).first(k + 1)});
    if (integrand) (*integrand)[k] = h;
    p.values[k + 1] = p.values[k] * std::exp(h * dw[k] - 0.5 * dt * h * h);
  }
  return p;
}

inline Path doleans_discrete(const AdaptedRule& rule, const GridSpec& grid, RngStream& stream) {
  std::vector<double> dw(grid.n);
  brownian_increments(grid, stream, dw);
  return doleans_from(rule, dw, grid);
}

// ---------------------------------------------------------------------------
// Path export
// ---------------------------------------------------------------------------

inline void write_path_csv(std::ostream& os, const Path& p) {
  os << "t,value\n";
  os.precision(17);
  for (int k = 0; k <= p.grid.n; ++k) os << p.grid.t(k) << ',' << p.values[k] << '\n';
}

inline constexpr char kPathBatchMagic[8] = {'C', 'V', 'X', 'P', 'A', 'T', 'H', '1'};

namespace detail {

inline void put_le64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline std::uint64_t get_le64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  require(static_cast<bool>(is), ErrorCode::invalid_argument, "path batch: truncated input");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

/// Binary batch: magic "CVXPATH1", u64 rows, u64 cols, then rows*cols
/// little-endian IEEE-754 doubles, row-major (one path per row).
inline void write_path_batch(std::ostream& os, const std::vector<Path>& paths) {
  os.write(kPathBatchMagic, 8);
  const std::uint64_t cols = paths.empty() ? 0 : paths.front().values.size();
  detail::put_le64(os, paths.size());
  detail::put_le64(os, cols);
  for (const auto& p : paths) {
    require(p.values.size() == cols, ErrorCode::grid_mismatch, "write_path_batch: ragged batch");
    for (double v : p.values) detail::put_le64(os, std::bit_cast<std::uint64_t>(v));
  }
}

inline std::vector<std::vector<double>> read_path_batch(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  require(static_cast<bool>(is) && std::memcmp(magic, kPathBatchMagic, 8) == 0, ErrorCode::invalid_argument,
          "path batch: bad magic");
  const auto rows = detail::get_le64(is);
  const auto cols = detail::get_le64(is);
  std::vector<std::vector<double>> out(rows, std::vector<double>(cols));
  for (auto& r : out)
    for (auto& v : r) v = std::bit_cast<double>(detail::get_le64(is));
  return out;
}

}  // namespace cvxorder
