#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "cvxorder/errors.hpp"

namespace cvxorder {

namespace fn {

struct Call {
  double strike;
};
struct Put {
  double strike;
};
/// |x|^p, p >= 1.
struct Power {
  double p;
};
struct Abs {};
/// scale * exp(lambda * x), scale >= 0.
struct ExpAffine {
  double lambda;
  double scale = 1.0;
};
struct Affine {
  double slope;
  double intercept;
};
/// Continuous piecewise-linear function: value `value_at_first` at
/// breakpoints[0], slopes[i] on the i-th of the breakpoints.size()+1 pieces.
struct PiecewiseLinear {
  std::vector<double> breakpoints;
  std::vector<double> slopes;
  double value_at_first = 0.0;
};
/// Sampled table, linear between samples and chord-extrapolated outside.
struct Table {
  std::vector<double> xs;
  std::vector<double> ys;
};

}  // namespace fn

namespace detail {

/// Linear interpolation on ascending xs with extrapolation by the end chords.
inline double interp_linear(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  const std::size_t n = xs.size();
  if (n == 1) return ys[0];
  std::size_t i;
  if (x <= xs[0]) {
    i = 0;
  } else if (x >= xs[n - 1]) {
    i = n - 2;
  } else {
    i = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) - 1;
    if (i > n - 2) i = n - 2;
  }
  const double h = xs[i + 1] - xs[i];
  const double w = (x - xs[i]) / h;
  return ys[i] + w * (ys[i + 1] - ys[i]);
}

inline bool node_values_convex(const std::vector<double>& xs, const std::vector<double>& ys, double tol) {
  double scale = 1.0;
  for (double y : ys) scale = std::max(scale, std::abs(y));
  for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
    const double h0 = xs[i] - xs[i - 1], h1 = xs[i + 1] - xs[i];
    // ys[i] must lie on or below the chord of its neighbours.
    const double chord = (ys[i - 1] * h1 + ys[i + 1] * h0) / (h0 + h1);
    if (ys[i] > chord + tol * scale) return false;
  }
  return true;
}

}  // namespace detail

/// Convex test function phi : R -> R (call, put, power, ...). Every kind is
/// convex by construction; tables are checked at construction.
class ScalarConvexFn {
 public:
  using Kind = std::variant<fn::Call, fn::Put, fn::Power, fn::Abs, fn::ExpAffine, fn::Affine, fn::PiecewiseLinear,
                            fn::Table>;

  ScalarConvexFn(Kind kind) : kind_(std::move(kind)) { validate(); }  // NOLINT: implicit by design of the kinds

  static ScalarConvexFn call(double strike) { return Kind{fn::Call{strike}}; }
  static ScalarConvexFn put(double strike) { return Kind{fn::Put{strike}}; }
  static ScalarConvexFn power(double p) { return Kind{fn::Power{p}}; }
  static ScalarConvexFn abs() { return Kind{fn::Abs{}}; }
  static ScalarConvexFn exp_affine(double lambda, double scale = 1.0) { return Kind{fn::ExpAffine{lambda, scale}}; }
  static ScalarConvexFn affine(double slope, double intercept) { return Kind{fn::Affine{slope, intercept}}; }
  static ScalarConvexFn identity() { return Kind{fn::Affine{1.0, 0.0}}; }
  static ScalarConvexFn piecewise_linear(std::vector<double> breakpoints, std::vector<double> slopes,
                                         double value_at_first = 0.0) {
    return Kind{fn::PiecewiseLinear{std::move(breakpoints), std::move(slopes), value_at_first}};
  }
  static ScalarConvexFn table(std::vector<double> xs, std::vector<double> ys) {
    return Kind{fn::Table{std::move(xs), std::move(ys)}};
  }

  const Kind& kind() const { return kind_; }

  double operator()(double x) const {
    return std::visit(
        [x](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, fn::Call>) return std::max(x - f.strike, 0.0);
          else if constexpr (std::is_same_v<T, fn::Put>) return std::max(f.strike - x, 0.0);
          else if constexpr (std::is_same_v<T, fn::Power>) return f.p == 2.0 ? x * x : std::pow(std::abs(x), f.p);
          else if constexpr (std::is_same_v<T, fn::Abs>) return std::abs(x);
          else if constexpr (std::is_same_v<T, fn::ExpAffine>) return f.scale * std::exp(f.lambda * x);
          else if constexpr (std::is_same_v<T, fn::Affine>) return f.slope * x + f.intercept;
          else if constexpr (std::is_same_v<T, fn::PiecewiseLinear>) {
            const auto& b = f.breakpoints;
            if (x <= b[0]) return f.value_at_first + f.slopes[0] * (x - b[0]);
            double v = f.value_at_first;
            for (std::size_t i = 0; i < b.size(); ++i) {
              const double right = i + 1 < b.size() ? b[i + 1] : std::numeric_limits<double>::infinity();
              if (x <= right) return v + f.slopes[i + 1] * (x - b[i]);
              v += f.slopes[i + 1] * (right - b[i]);
            }
            return v;
          } else {
            return detail::interp_linear(f.xs, f.ys, x);
          }
        },
        kind_);
  }

  /// Points where the function is not differentiable, ascending.
  std::vector<double> kinks() const {
    return std::visit(
        [](const auto& f) -> std::vector<double> {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, fn::Call> || std::is_same_v<T, fn::Put>) return {f.strike};
          else if constexpr (std::is_same_v<T, fn::Abs>) return {0.0};
          else if constexpr (std::is_same_v<T, fn::Power>) return std::fmod(f.p, 2.0) == 0.0 ? std::vector<double>{}
                                                                                                 : std::vector<double>{0.0};
          else if constexpr (std::is_same_v<T, fn::PiecewiseLinear>) return f.breakpoints;
          else if constexpr (std::is_same_v<T, fn::Table>) return f.xs;
          else return {};
        },
        kind_);
  }

  /// Polynomial growth order r in |phi(x)| <= C (1 + |x|^r); +inf for
  /// exponential growth.
  double growth_r() const {
    return std::visit(
        [](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, fn::Power>) return f.p;
          else if constexpr (std::is_same_v<T, fn::ExpAffine>) return f.lambda == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
          else return 1.0;
        },
        kind_);
  }

  /// C in |phi(x)| <= C (1 + |x|^r) for r = growth_r().
  double growth_constant() const {
    return std::visit(
        [](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, fn::Call> || std::is_same_v<T, fn::Put>) return 1.0 + std::abs(f.strike);
          else if constexpr (std::is_same_v<T, fn::Power> || std::is_same_v<T, fn::Abs>) return 1.0;
          else if constexpr (std::is_same_v<T, fn::ExpAffine>) return f.lambda == 0.0 ? f.scale : std::numeric_limits<double>::infinity();
          else if constexpr (std::is_same_v<T, fn::Affine>) return std::max(std::abs(f.slope), std::abs(f.intercept));
          else if constexpr (std::is_same_v<T, fn::PiecewiseLinear>) {
            double s = 0.0;
            for (double v : f.slopes) s = std::max(s, std::abs(v));
            return std::abs(f.value_at_first) + s * (1.0 + std::abs(f.breakpoints.front()));
          } else {
            const std::size_t n = f.xs.size();
            double s = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) s = std::max(s, std::abs((f.ys[i + 1] - f.ys[i]) / (f.xs[i + 1] - f.xs[i])));
            return std::abs(f.ys[0]) + s * (1.0 + std::abs(f.xs[0]));
          }
        },
        kind_);
  }

  bool nondecreasing() const {
    return std::visit(
        [](const auto& f) -> bool {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, fn::Call>) return true;
          else if constexpr (std::is_same_v<T, fn::ExpAffine>) return f.lambda >= 0.0;
          else if constexpr (std::is_same_v<T, fn::Affine>) return f.slope >= 0.0;
          else if constexpr (std::is_same_v<T, fn::PiecewiseLinear>) return f.slopes.front() >= 0.0;
          else if constexpr (std::is_same_v<T, fn::Table>) return f.ys[1] >= f.ys[0];
          else return false;
        },
        kind_);
  }

  std::string describe() const {
    std::ostringstream os;
    std::visit(
        [&](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, fn::Call>) os << "call(" << f.strike << ")";
          else if constexpr (std::is_same_v<T, fn::Put>) os << "put(" << f.strike << ")";
          else if constexpr (std::is_same_v<T, fn::Power>) os << "power(" << f.p << ")";
          else if constexpr (std::is_same_v<T, fn::Abs>) os << "abs";
          else if constexpr (std::is_same_v<T, fn::ExpAffine>) os << "exp_affine(" << f.lambda << "," << f.scale << ")";
          else if constexpr (std::is_same_v<T, fn::Affine>) os << "affine(" << f.slope << "," << f.intercept << ")";
          else if constexpr (std::is_same_v<T, fn::PiecewiseLinear>) os << "piecewise_linear[" << f.breakpoints.size() << "]";
          else os << "table[" << f.xs.size() << "]";
        },
        kind_);
    return os.str();
  }

 private:
  void validate() const {
    std::visit(
        [](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, fn::Power>) {
            require(f.p >= 1.0, ErrorCode::invalid_argument, "power: exponent must be >= 1 for convexity");
          } else if constexpr (std::is_same_v<T, fn::ExpAffine>) {
            require(f.scale >= 0.0, ErrorCode::invalid_argument, "exp_affine: scale must be >= 0");
          } else if constexpr (std::is_same_v<T, fn::PiecewiseLinear>) {
            require(!f.breakpoints.empty() && f.slopes.size() == f.breakpoints.size() + 1, ErrorCode::invalid_argument,
                    "piecewise_linear: need k >= 1 breakpoints and k+1 slopes");
            for (std::size_t i = 1; i < f.breakpoints.size(); ++i)
              require(f.breakpoints[i] > f.breakpoints[i - 1], ErrorCode::invalid_argument,
                      "piecewise_linear: breakpoints must be strictly increasing");
            for (std::size_t i = 1; i < f.slopes.size(); ++i)
              require(f.slopes[i] >= f.slopes[i - 1], ErrorCode::invalid_argument,
                      "piecewise_linear: slopes must be nondecreasing (convexity)");
          } else if constexpr (std::is_same_v<T, fn::Table>) {
            require(f.xs.size() >= 2 && f.xs.size() == f.ys.size(), ErrorCode::invalid_argument,
                    "table: need >= 2 samples");
            for (std::size_t i = 1; i < f.xs.size(); ++i)
              require(f.xs[i] > f.xs[i - 1], ErrorCode::invalid_argument, "table: xs must be strictly increasing");
            require(detail::node_values_convex(f.xs, f.ys, 1e-12), ErrorCode::invalid_argument,
                    "table: samples are not convex");
          }
        },
        kind_);
  }

  Kind kind_;
};

}  // namespace cvxorder
