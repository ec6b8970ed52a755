#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "cvxorder/errors.hpp"
#include "cvxorder/scalar_fn.hpp"

namespace cvxorder {

/// Piecewise-linear function on a strictly increasing grid, extended
/// linearly beyond the ends by the boundary chords. Linear interpolation and
/// chord extrapolation of convex node values give a convex function on all
/// of R.
class ValueFunction {
 public:
  ValueFunction() = default;
  ValueFunction(std::vector<double> grid, std::vector<double> values, double growth_exponent_r = 1.0)
      : grid_(std::move(grid)), values_(std::move(values)), growth_r_(growth_exponent_r) {
    require(grid_.size() >= 2 && grid_.size() == values_.size(), ErrorCode::invalid_argument,
            "ValueFunction: need >= 2 nodes and matching value count");
    for (std::size_t i = 1; i < grid_.size(); ++i)
      require(grid_[i] > grid_[i - 1], ErrorCode::invalid_argument, "ValueFunction: grid must be strictly increasing");
  }

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double growth_exponent_r() const { return growth_r_; }
  std::size_t size() const { return grid_.size(); }

  double operator()(double x) const { return detail::interp_linear(grid_, values_, x); }

  /// Node values lie on or below every neighbour chord, up to
  /// tol * max(1, max|value|).
  bool is_convex(double tol = 1e-12) const { return detail::node_values_convex(grid_, values_, tol); }

  /// Most negative normalized second difference (0 when convex).
  double convexity_defect() const {
    double scale = 1.0;
    for (double v : values_) scale = std::max(scale, std::abs(v));
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < grid_.size(); ++i) {
      const double h0 = grid_[i] - grid_[i - 1], h1 = grid_[i + 1] - grid_[i];
      const double chord = (values_[i - 1] * h1 + values_[i + 1] * h0) / (h0 + h1);
      worst = std::max(worst, (values_[i] - chord) / scale);
    }
    return worst;
  }

  void write_csv(std::ostream& os) const {
    os << "grid,value\n";
    os.precision(17);
    for (std::size_t i = 0; i < grid_.size(); ++i) os << grid_[i] << ',' << values_[i] << '\n';
  }

 private:
  std::vector<double> grid_;
  std::vector<double> values_;
  double growth_r_ = 1.0;
};

/// Bilinear function on a tensor grid (x, a), linearly extrapolated along
/// both axes. Values are stored row-major: values[i * a.size() + j].
class ValueSurface {
 public:
  ValueSurface() = default;
  ValueSurface(std::vector<double> xgrid, std::vector<double> agrid, std::vector<double> values)
      : x_(std::move(xgrid)), a_(std::move(agrid)), v_(std::move(values)) {
    require(x_.size() >= 2 && a_.size() >= 2 && v_.size() == x_.size() * a_.size(), ErrorCode::invalid_argument,
            "ValueSurface: inconsistent sizes");
  }

  const std::vector<double>& xgrid() const { return x_; }
  const std::vector<double>& agrid() const { return a_; }
  const std::vector<double>& values() const { return v_; }
  double at(std::size_t i, std::size_t j) const { return v_[i * a_.size() + j]; }

  double operator()(double x, double a) const {
    const auto [i, wx] = locate(x_, x);
    const auto [j, wa] = locate(a_, a);
    const std::size_t na = a_.size();
    const double v00 = v_[i * na + j], v01 = v_[i * na + j + 1];
    const double v10 = v_[(i + 1) * na + j], v11 = v_[(i + 1) * na + j + 1];
    return (1 - wx) * ((1 - wa) * v00 + wa * v01) + wx * ((1 - wa) * v10 + wa * v11);
  }

  /// Slice at fixed a-node j.
  ValueFunction slice_at_a(std::size_t j) const {
    std::vector<double> v(x_.size());
    for (std::size_t i = 0; i < x_.size(); ++i) v[i] = at(i, j);
    return ValueFunction(x_, std::move(v));
  }

 private:
  static std::pair<std::size_t, double> locate(const std::vector<double>& g, double x) {
    const std::size_t n = g.size();
    std::size_t i;
    if (x <= g[0]) i = 0;
    else if (x >= g[n - 1]) i = n - 2;
    else i = std::min<std::size_t>(std::upper_bound(g.begin(), g.end(), x) - g.begin() - 1, n - 2);
    return {i, (x - g[i]) / (g[i + 1] - g[i])};
  }

  std::vector<double> x_, a_, v_;
};

inline std::vector<double> uniform_grid(double lo, double hi, int nodes) {
  require(nodes >= 2 && hi > lo, ErrorCode::invalid_argument, "uniform_grid: need nodes >= 2 and hi > lo");
  std::vector<double> g(nodes);
  for (int i = 0; i < nodes; ++i) g[i] = lo + (hi - lo) * i / (nodes - 1);
  g.back() = hi;
  return g;
}

/// Grid on [lo, hi] concentrated around `center` by a sinh stretching:
/// x = center + alpha sinh(xi), xi uniform. `alpha` sets the width of the
/// fine region. `center` is always a node when it lies inside.
inline std::vector<double> sinh_grid(double center, double lo, double hi, int nodes, double alpha) {
  require(nodes >= 3 && hi > lo && alpha > 0.0, ErrorCode::invalid_argument, "sinh_grid: bad arguments");
  if (center <= lo || center >= hi) return uniform_grid(lo, hi, nodes);
  const double xi_lo = std::asinh((lo - center) / alpha);
  const double xi_hi = std::asinh((hi - center) / alpha);
  // Put xi = 0 on a node: split the nodes proportionally to each side.
  const int intervals = nodes - 1;
  int left = static_cast<int>(std::lround(intervals * (-xi_lo) / (xi_hi - xi_lo)));
  left = std::clamp(left, 1, intervals - 1);
  const int right = intervals - left;
  std::vector<double> g(nodes);
  for (int i = 0; i <= left; ++i) g[i] = center + alpha * std::sinh(xi_lo * (left - i) / left);
  for (int i = 1; i <= right; ++i) g[left + i] = center + alpha * std::sinh(xi_hi * i / right);
  g.front() = lo;
  g.back() = hi;
  g[left] = center;
  return g;
}

}  // namespace cvxorder
