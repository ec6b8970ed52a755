#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "cvxorder/errors.hpp"
#include "cvxorder/scalar_fn.hpp"

namespace cvxorder {

class CoefficientFn;

namespace coef {

struct Constant {
  double c;
};
/// Depends on t only: piecewise-linear in t through the table, flat outside.
struct TimeTable {
  std::vector<double> times;
  std::vector<double> values;
};
/// a + b x
struct Affine {
  double a;
  double b;
};
/// a + b |x|
struct AbsAffine {
  double a;
  double b;
};
/// c0 + c1 / (1 + ((x - center) / scale)^2)
struct BoundedRational {
  double c0;
  double c1;
  double center;
  double scale;
};
/// x * inner(t, x) for x > 0, 0 for x <= 0.
struct LocalVolWrap {
  std::shared_ptr<const CoefficientFn> inner;
};
/// min(max(inner(t, x), lo), hi)
struct Clipped {
  std::shared_ptr<const CoefficientFn> inner;
  double lo;
  double hi;
};
/// scale / (1 + exp(-slope (x - shift)))
struct Sigmoid {
  double scale;
  double slope;
  double shift = 0.0;
};
/// scale * clamp((x - lo) / (hi - lo), 0, 1)
struct Ramp {
  double scale;
  double lo;
  double hi;
};
/// Time-independent samples in x, linear between samples, chord-extrapolated.
struct SampleGrid {
  std::vector<double> xs;
  std::vector<double> values;
};

}  // namespace coef

/// Structural properties of a coefficient, derived from its descriptor.
struct CoefficientTraits {
  bool convex_in_x = false;
  bool nonneg = false;
  bool nondecreasing = false;
  bool nonincreasing = false;
  std::optional<double> lower;  // inf over (t, x), when known
  std::optional<double> upper;  // sup over (t, x), when known
  double growth_constant = std::numeric_limits<double>::infinity();  // |f| <= C (1 + |x|)
  bool bounded() const { return lower.has_value() && upper.has_value(); }
};

/// Diffusion coefficient sigma(t, x) (or any scalar field of (t, x) used
/// as an integrand). Immutable; cheap to copy.
class CoefficientFn {
 public:
  using Kind = std::variant<coef::Constant, coef::TimeTable, coef::Affine, coef::AbsAffine, coef::BoundedRational,
                            coef::LocalVolWrap, coef::Clipped, coef::Sigmoid, coef::Ramp, coef::SampleGrid>;

  CoefficientFn(Kind kind) : kind_(std::move(kind)) {  // NOLINT
    validate();
    traits_ = derive_traits();
  }

  static CoefficientFn constant(double c) { return Kind{coef::Constant{c}}; }
  static CoefficientFn time_table(std::vector<double> t, std::vector<double> v) {
    return Kind{coef::TimeTable{std::move(t), std::move(v)}};
  }
  static CoefficientFn affine(double a, double b) { return Kind{coef::Affine{a, b}}; }
  static CoefficientFn abs_affine(double a, double b) { return Kind{coef::AbsAffine{a, b}}; }
  static CoefficientFn bounded_rational(double c0, double c1, double center, double scale) {
    return Kind{coef::BoundedRational{c0, c1, center, scale}};
  }
  static CoefficientFn local_vol_wrap(const CoefficientFn& inner) {
    return Kind{coef::LocalVolWrap{std::make_shared<const CoefficientFn>(inner)}};
  }
  static CoefficientFn clipped(const CoefficientFn& inner, double lo, double hi) {
    return Kind{coef::Clipped{std::make_shared<const CoefficientFn>(inner), lo, hi}};
  }
  static CoefficientFn sigmoid(double scale, double slope, double shift = 0.0) {
    return Kind{coef::Sigmoid{scale, slope, shift}};
  }
  static CoefficientFn ramp(double scale, double lo, double hi) { return Kind{coef::Ramp{scale, lo, hi}}; }
  static CoefficientFn sample_grid(std::vector<double> xs, std::vector<double> v) {
    return Kind{coef::SampleGrid{std::move(xs), std::move(v)}};
  }

  const Kind& kind() const { return kind_; }
  const CoefficientTraits& traits() const { return traits_; }
  bool convex_in_x() const { return traits_.convex_in_x; }
  bool nonneg() const { return traits_.nonneg; }

  /// Self-certification of convexity for descriptors whose convexity cannot
  /// be derived structurally. Checked by midpoint probes; throws if refuted.
  CoefficientFn certified_convex(double x_lo, double x_hi, std::vector<double> t_samples = {0.0}) const {
    CoefficientFn copy = *this;
    for (double t : t_samples)
      require(probe_midpoint_convex(t, x_lo, x_hi, 4001), ErrorCode::invalid_argument,
              "certified_convex: midpoint convexity refuted for " + describe());
    copy.traits_.convex_in_x = true;
    return copy;
  }

  double operator()(double t, double x) const {
    return std::visit(
        [t, x](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, coef::Constant>) return f.c;
          else if constexpr (std::is_same_v<T, coef::TimeTable>) return detail::interp_flat(f.times, f.values, t);
          else if constexpr (std::is_same_v<T, coef::Affine>) return f.a + f.b * x;
          else if constexpr (std::is_same_v<T, coef::AbsAffine>) return f.a + f.b * std::abs(x);
          else if constexpr (std::is_same_v<T, coef::BoundedRational>) {
            const double y = (x - f.center) / f.scale;
            return f.c0 + f.c1 / (1.0 + y * y);
          } else if constexpr (std::is_same_v<T, coef::LocalVolWrap>) return x > 0.0 ? x * (*f.inner)(t, x) : 0.0;
          else if constexpr (std::is_same_v<T, coef::Clipped>) return std::clamp((*f.inner)(t, x), f.lo, f.hi);
          else if constexpr (std::is_same_v<T, coef::Sigmoid>) return f.scale / (1.0 + std::exp(-f.slope * (x - f.shift)));
          else if constexpr (std::is_same_v<T, coef::Ramp>) return f.scale * std::clamp((x - f.lo) / (f.hi - f.lo), 0.0, 1.0);
          else return detail::interp_linear(f.xs, f.values, x);
        },
        kind_);
  }

  bool probe_midpoint_convex(double t, double x_lo, double x_hi, int points) const {
    const double h = (x_hi - x_lo) / (points - 1);
    for (int i = 1; i + 1 < points; ++i) {
      const double x = x_lo + i * h;
      const double l = (*this)(t, x - h), m = (*this)(t, x), r = (*this)(t, x + h);
      if (m > 0.5 * (l + r) + 1e-12 * (1.0 + std::abs(m))) return false;
    }
    return true;
  }

  std::string describe() const {
    std::ostringstream os;
    std::visit(
        [&](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, coef::Constant>) os << "constant(" << f.c << ")";
          else if constexpr (std::is_same_v<T, coef::TimeTable>) os << "time_table[" << f.times.size() << "]";
          else if constexpr (std::is_same_v<T, coef::Affine>) os << "affine(" << f.a << "," << f.b << ")";
          else if constexpr (std::is_same_v<T, coef::AbsAffine>) os << "abs_affine(" << f.a << "," << f.b << ")";
          else if constexpr (std::is_same_v<T, coef::BoundedRational>)
            os << "bounded_rational(" << f.c0 << "," << f.c1 << "," << f.center << "," << f.scale << ")";
          else if constexpr (std::is_same_v<T, coef::LocalVolWrap>) os << "local_vol_wrap(" << f.inner->describe() << ")";
          else if constexpr (std::is_same_v<T, coef::Clipped>)
            os << "clipped(" << f.inner->describe() << "," << f.lo << "," << f.hi << ")";
          else if constexpr (std::is_same_v<T, coef::Sigmoid>) os << "sigmoid(" << f.scale << "," << f.slope << "," << f.shift << ")";
          else if constexpr (std::is_same_v<T, coef::Ramp>) os << "ramp(" << f.scale << "," << f.lo << "," << f.hi << ")";
          else os << "sample_grid[" << f.xs.size() << "]";
        },
        kind_);
    return os.str();
  }

 private:
  struct detail {
    static double interp_flat(const std::vector<double>& ts, const std::vector<double>& vs, double t) {
      if (t <= ts.front()) return vs.front();
      if (t >= ts.back()) return vs.back();
      return cvxorder::detail::interp_linear(ts, vs, t);
    }
    static double interp_linear(const std::vector<double>& xs, const std::vector<double>& vs, double x) {
      return cvxorder::detail::interp_linear(xs, vs, x);
    }
  };

  void validate() const {
    std::visit(
        [](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, coef::TimeTable> || std::is_same_v<T, coef::SampleGrid>) {
            const auto& xs = [&]() -> const std::vector<double>& {
              if constexpr (std::is_same_v<T, coef::TimeTable>) return f.times;
              else return f.xs;
            }();
            require(!xs.empty() && xs.size() == f.values.size(), ErrorCode::invalid_argument,
                    "coefficient table: sizes must match and be non-empty");
            for (std::size_t i = 1; i < xs.size(); ++i)
              require(xs[i] > xs[i - 1], ErrorCode::invalid_argument, "coefficient table: abscissae must increase");
            if constexpr (std::is_same_v<T, coef::SampleGrid>)
              require(xs.size() >= 2, ErrorCode::invalid_argument, "sample_grid: need >= 2 samples");
          } else if constexpr (std::is_same_v<T, coef::BoundedRational>) {
            require(f.scale > 0.0, ErrorCode::invalid_argument, "bounded_rational: scale must be > 0");
          } else if constexpr (std::is_same_v<T, coef::LocalVolWrap>) {
            require(f.inner != nullptr, ErrorCode::invalid_argument, "local_vol_wrap: missing inner");
          } else if constexpr (std::is_same_v<T, coef::Clipped>) {
            require(f.inner != nullptr && f.lo <= f.hi, ErrorCode::invalid_argument, "clipped: need inner and lo <= hi");
          } else if constexpr (std::is_same_v<T, coef::Ramp>) {
            require(f.hi > f.lo, ErrorCode::invalid_argument, "ramp: need hi > lo");
          }
        },
        kind_);
  }

  CoefficientTraits derive_traits() const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    CoefficientTraits tr;
    std::visit(
        [&](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, coef::Constant>) {
            tr = {true, f.c >= 0.0, true, true, f.c, f.c, std::abs(f.c)};
          } else if constexpr (std::is_same_v<T, coef::TimeTable>) {
            const auto [lo, hi] = std::minmax_element(f.values.begin(), f.values.end());
            tr = {true, *lo >= 0.0, true, true, *lo, *hi, std::max(std::abs(*lo), std::abs(*hi))};
          } else if constexpr (std::is_same_v<T, coef::Affine>) {
            tr.convex_in_x = true;
            tr.nonneg = f.b == 0.0 && f.a >= 0.0;
            tr.nondecreasing = f.b >= 0.0;
            tr.nonincreasing = f.b <= 0.0;
            if (f.b == 0.0) tr.lower = tr.upper = f.a;
            tr.growth_constant = std::max(std::abs(f.a), std::abs(f.b));
          } else if constexpr (std::is_same_v<T, coef::AbsAffine>) {
            tr.convex_in_x = f.b >= 0.0;
            tr.nonneg = f.a >= 0.0 && f.b >= 0.0;
            tr.nondecreasing = tr.nonincreasing = f.b == 0.0;
            if (f.b == 0.0) tr.lower = tr.upper = f.a;
            else if (f.b > 0.0) tr.lower = f.a;
            else tr.upper = f.a;
            tr.growth_constant = std::max(std::abs(f.a), std::abs(f.b));
          } else if constexpr (std::is_same_v<T, coef::BoundedRational>) {
            tr.convex_in_x = f.c1 == 0.0;
            tr.lower = f.c0 + std::min(0.0, f.c1);
            tr.upper = f.c0 + std::max(0.0, f.c1);
            tr.nonneg = *tr.lower >= 0.0;
            tr.nondecreasing = tr.nonincreasing = f.c1 == 0.0;
            tr.growth_constant = std::abs(f.c0) + std::abs(f.c1);
          } else if constexpr (std::is_same_v<T, coef::LocalVolWrap>) {
            const auto& in = f.inner->traits();
            // (x c(t))_+ is convex; so is x (a + b|x|) on x > 0 for a, b >= 0.
            const bool in_x_const = std::holds_alternative<coef::Constant>(f.inner->kind()) ||
                                    std::holds_alternative<coef::TimeTable>(f.inner->kind());
            const bool abs_aff = std::holds_alternative<coef::AbsAffine>(f.inner->kind());
            tr.convex_in_x = in.nonneg && (in_x_const || (abs_aff && in.convex_in_x));
            tr.nonneg = in.nonneg;
            tr.nondecreasing = in.nonneg && in_x_const;
            if (in.nonneg) tr.lower = 0.0;
            tr.growth_constant = in.bounded() ? std::max(std::abs(*in.lower), std::abs(*in.upper)) : inf;
          } else if constexpr (std::is_same_v<T, coef::Clipped>) {
            const auto& in = f.inner->traits();
            // max(convex, lo) stays convex when the upper clip is inactive.
            tr.convex_in_x = in.convex_in_x && std::isinf(f.hi) && f.hi > 0;
            tr.nonneg = f.lo >= 0.0 || in.nonneg;
            tr.nondecreasing = in.nondecreasing;
            tr.nonincreasing = in.nonincreasing;
            tr.lower = std::max(f.lo, in.lower.value_or(f.lo));
            tr.upper = std::min(f.hi, in.upper.value_or(f.hi));
            if (std::isinf(*tr.lower)) tr.lower.reset();
            if (std::isinf(*tr.upper)) tr.upper.reset();
            tr.growth_constant = tr.bounded() ? std::max(std::abs(*tr.lower), std::abs(*tr.upper)) : in.growth_constant;
          } else if constexpr (std::is_same_v<T, coef::Sigmoid>) {
            tr.convex_in_x = f.slope == 0.0 || f.scale == 0.0;
            tr.nonneg = f.scale >= 0.0;
            tr.nondecreasing = f.scale * f.slope >= 0.0;
            tr.nonincreasing = f.scale * f.slope <= 0.0;
            tr.lower = std::min(0.0, f.scale);
            tr.upper = std::max(0.0, f.scale);
            tr.growth_constant = std::abs(f.scale);
          } else if constexpr (std::is_same_v<T, coef::Ramp>) {
            tr.convex_in_x = f.scale == 0.0;
            tr.nonneg = f.scale >= 0.0;
            tr.nondecreasing = f.scale >= 0.0;
            tr.nonincreasing = f.scale <= 0.0;
            tr.lower = std::min(0.0, f.scale);
            tr.upper = std::max(0.0, f.scale);
            tr.growth_constant = std::abs(f.scale);
          } else {
            const auto& xs = f.xs;
            const auto& v = f.values;
            const std::size_t n = xs.size();
            const double left = (v[1] - v[0]) / (xs[1] - xs[0]);
            const double right = (v[n - 1] - v[n - 2]) / (xs[n - 1] - xs[n - 2]);
            tr.convex_in_x = cvxorder::detail::node_values_convex(xs, v, 1e-12);
            tr.nonneg = *std::min_element(v.begin(), v.end()) >= 0.0 && left <= 0.0 && right >= 0.0;
            tr.nondecreasing = std::is_sorted(v.begin(), v.end());
            tr.nonincreasing = std::is_sorted(v.rbegin(), v.rend());
            double c = std::max(std::abs(left), std::abs(right));
            for (std::size_t i = 0; i < n; ++i) c = std::max(c, std::abs(v[i]) / (1.0 + std::abs(xs[i])));
            tr.growth_constant = c + std::abs(v[0]) + std::abs(left * xs[0]);
          }
        },
        kind_);
    return tr;
  }

  Kind kind_;
  CoefficientTraits traits_;
};

/// sigma_k(x) = out_scale * f(t, in_scale * x): a time section of a
/// coefficient, rescaled for a discrete step (e.g. out_scale = sqrt(T/n)).
struct Section {
  CoefficientFn fn;
  double t = 0.0;
  double in_scale = 1.0;
  double out_scale = 1.0;

  double operator()(double x) const { return out_scale * fn(t, in_scale * x); }
  bool convex() const { return fn.convex_in_x(); }
  bool nonneg() const { return fn.nonneg(); }
  bool nondecreasing() const { return fn.traits().nondecreasing; }
};

inline Section section(const CoefficientFn& f, double t = 0.0, double out_scale = 1.0, double in_scale = 1.0) {
  require(out_scale >= 0.0 && in_scale > 0.0, ErrorCode::invalid_argument, "section: scales must be positive");
  return Section{f, t, in_scale, out_scale};
}

/// n copies of the same constant section.
inline std::vector<Section> constant_sections(double c, int n) {
  return std::vector<Section>(n, section(CoefficientFn::constant(c)));
}

}  // namespace cvxorder
