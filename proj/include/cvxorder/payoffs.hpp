#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cvxorder/dynamics.hpp"
#include "cvxorder/errors.hpp"
#include "cvxorder/rng.hpp"
#include "cvxorder/scalar_fn.hpp"

namespace cvxorder {

class PayoffFunctional;

namespace payoff {

/// f(x_n)
struct Terminal {
  ScalarConvexFn f;
};
/// f(sum_k mu_k x_k); empty weights mean uniform 1 / (n + 1).
struct Integral {
  ScalarConvexFn f;
  std::vector<double> weights;
};
/// f(max_k x_k - beta x_n); convex when f is convex nondecreasing and
/// beta in [0, 1].
struct RunningMax {
  ScalarConvexFn f;
  double beta = 0.0;
};
/// f(beta x_n - min_k x_k)
struct RunningMin {
  ScalarConvexFn f;
  double beta = 0.0;
};
/// max_j (<rows[j], x_{0:n}> + intercepts[j]): convex piecewise linear in
/// the whole path.
struct MaxAffine {
  std::vector<std::vector<double>> rows;
  std::vector<double> intercepts;
};
/// sum_i coeffs[i] * parts[i]
struct Composite {
  std::vector<PayoffFunctional> parts;
  std::vector<double> coeffs;
};
/// 1{x_n > strike}: not convex, shipped only as a negative control.
struct Digital {
  double strike;
};
/// -max_k |x_k|: concave, negative control.
struct NegSupNorm {};
/// User functional. Convexity (and Skorokhod continuity) is self-certified.
struct Custom {
  std::function<double(std::span<const double>)> fn;
  bool certified_convex = false;
  double growth_r = 1.0;
  double growth_constant = std::numeric_limits<double>::infinity();
  std::string name = "custom";
};

}  // namespace payoff

/// Path functional reduced to a running state (x_k, a_k) so backward
/// induction can run on a one- or two-dimensional grid.
class ReducedPayoff {
 public:
  enum class Kind { terminal, running_max, running_min, running_sum };

  Kind kind() const { return kind_; }
  int dimension() const { return kind_ == Kind::terminal ? 1 : 2; }

  double init(double x0) const {
    switch (kind_) {
      case Kind::running_sum: return weights_[0] * x0;
      case Kind::terminal: return 0.0;
      default: return x0;
    }
  }

  /// Aggregate after moving to x at step k (k >= 1).
  double update(int k, double a, double x) const {
    switch (kind_) {
      case Kind::running_max: return std::max(a, x);
      case Kind::running_min: return std::min(a, x);
      case Kind::running_sum: return a + weights_[k] * x;
      case Kind::terminal: return 0.0;
    }
    return 0.0;
  }

  /// Functional of the path frozen at step k, from its reduced state.
  double stopped_value(int k, double x, double a) const {
    switch (kind_) {
      case Kind::terminal: {
        double v = 0.0;
        for (std::size_t i = 0; i < fs_.size(); ++i) v += coeffs_[i] * fs_[i](x);
        return v;
      }
      case Kind::running_max: return fs_[0](std::max(a, x) - beta_ * x);
      case Kind::running_min: return fs_[0](beta_ * x - std::min(a, x));
      case Kind::running_sum: return fs_[0](a + x * tail_[k]);
    }
    return 0.0;
  }

  /// Kinks of the terminal function in the state variable (terminal kind only).
  std::vector<double> state_kinks() const {
    std::vector<double> out;
    if (kind_ != Kind::terminal) return out;
    for (const auto& f : fs_)
      for (double k : f.kinks()) out.push_back(k);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Range of the aggregate given bounds [lo, hi] on the state.
  std::pair<double, double> aggregate_range(double x0, double lo, double hi) const {
    switch (kind_) {
      case Kind::running_max: return {x0, std::max(hi, x0 + 1e-9)};
      case Kind::running_min: return {std::min(lo, x0 - 1e-9), x0};
      case Kind::running_sum: {
        double pos = 0.0, neg = 0.0;
        for (double w : weights_) (w > 0 ? pos : neg) += w;
        const double a_lo = std::min({0.0, pos * lo + neg * hi});
        const double a_hi = std::max({0.0, pos * hi + neg * lo});
        return {a_lo, a_hi > a_lo ? a_hi : a_lo + 1.0};
      }
      case Kind::terminal: return {0.0, 1.0};
    }
    return {0.0, 1.0};
  }

 private:
  friend class PayoffFunctional;
  Kind kind_ = Kind::terminal;
  std::vector<ScalarConvexFn> fs_;
  std::vector<double> coeffs_;
  double beta_ = 0.0;
  std::vector<double> weights_;  // running_sum: mu_0..mu_n
  std::vector<double> tail_;     // running_sum: sum_{l > k} mu_l
};

/// Convex path functional F with growth metadata.
class PayoffFunctional {
 public:
  using Kind = std::variant<payoff::Terminal, payoff::Integral, payoff::RunningMax, payoff::RunningMin,
                            payoff::MaxAffine, payoff::Composite, payoff::Digital, payoff::NegSupNorm, payoff::Custom>;

  PayoffFunctional(Kind kind) : kind_(std::move(kind)) { validate(); }  // NOLINT

  static PayoffFunctional terminal(ScalarConvexFn f) { return Kind{payoff::Terminal{std::move(f)}}; }
  static PayoffFunctional integral(ScalarConvexFn f, std::vector<double> weights = {}) {
    return Kind{payoff::Integral{std::move(f), std::move(weights)}};
  }
  static PayoffFunctional running_max(ScalarConvexFn f, double beta = 0.0) { return Kind{payoff::RunningMax{std::move(f), beta}}; }
  static PayoffFunctional running_min(ScalarConvexFn f, double beta = 0.0) { return Kind{payoff::RunningMin{std::move(f), beta}}; }
  static PayoffFunctional max_affine(std::vector<std::vector<double>> rows, std::vector<double> intercepts) {
    return Kind{payoff::MaxAffine{std::move(rows), std::move(intercepts)}};
  }
  static PayoffFunctional composite(std::vector<PayoffFunctional> parts, std::vector<double> coeffs) {
    return Kind{payoff::Composite{std::move(parts), std::move(coeffs)}};
  }
  static PayoffFunctional digital(double strike) { return Kind{payoff::Digital{strike}}; }
  static PayoffFunctional neg_sup_norm() { return Kind{payoff::NegSupNorm{}}; }

  const Kind& kind() const { return kind_; }

  double operator()(std::span<const double> x) const {
    require(!x.empty(), ErrorCode::grid_mismatch, "payoff: empty path");
    return std::visit(
        [&](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, payoff::Terminal>) {
            return p.f(x.back());
          } else if constexpr (std::is_same_v<T, payoff::Integral>) {
            double s = 0.0;
            if (p.weights.empty()) {
              for (double v : x) s += v;
              s /= static_cast<double>(x.size());
            } else {
              require(p.weights.size() == x.size(), ErrorCode::grid_mismatch,
                      "integral payoff: weights do not match the path grid");
              for (std::size_t k = 0; k < x.size(); ++k) s += p.weights[k] * x[k];
            }
            return p.f(s);
          } else if constexpr (std::is_same_v<T, payoff::RunningMax>) {
            return p.f(*std::max_element(x.begin(), x.end()) - p.beta * x.back());
          } else if constexpr (std::is_same_v<T, payoff::RunningMin>) {
            return p.f(p.beta * x.back() - *std::min_element(x.begin(), x.end()));
          } else if constexpr (std::is_same_v<T, payoff::MaxAffine>) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < p.rows.size(); ++j) {
              require(p.rows[j].size() == x.size(), ErrorCode::grid_mismatch, "max_affine payoff: row length mismatch");
              best = std::max(best, std::inner_product(x.begin(), x.end(), p.rows[j].begin(), p.intercepts[j]));
            }
            return best;
          } else if constexpr (std::is_same_v<T, payoff::Composite>) {
            double s = 0.0;
            for (std::size_t i = 0; i < p.parts.size(); ++i) s += p.coeffs[i] * p.parts[i](x);
            return s;
          } else if constexpr (std::is_same_v<T, payoff::Digital>) {
            return x.back() > p.strike ? 1.0 : 0.0;
          } else if constexpr (std::is_same_v<T, payoff::NegSupNorm>) {
            double m = 0.0;
            for (double v : x) m = std::max(m, std::abs(v));
            return -m;
          } else {
            return p.fn(x);
          }
        },
        kind_);
  }

  double operator()(const Path& path) const { return (*this)(std::span<const double>(path.values)); }

  /// Convexity declared by the descriptor.
  bool convex() const {
    return std::visit(
        [](const auto& p) -> bool {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, payoff::Terminal> || std::is_same_v<T, payoff::Integral>) return true;
          else if constexpr (std::is_same_v<T, payoff::RunningMax> || std::is_same_v<T, payoff::RunningMin>)
            return p.beta == 0.0 ? p.f.nondecreasing() || is_affine_identity(p.f)
                                 : p.f.nondecreasing() && p.beta >= 0.0 && p.beta <= 1.0;
          else if constexpr (std::is_same_v<T, payoff::MaxAffine>) return true;
          else if constexpr (std::is_same_v<T, payoff::Composite>) {
            for (std::size_t i = 0; i < p.parts.size(); ++i)
              if (!p.parts[i].convex() || p.coeffs[i] < 0.0) return false;
            return true;
          } else if constexpr (std::is_same_v<T, payoff::Custom>) return p.certified_convex;
          else return false;
        },
        kind_);
  }

  double growth_r() const {
    return std::visit(
        [](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (requires { p.f; }) return p.f.growth_r();
          else if constexpr (std::is_same_v<T, payoff::Composite>) {
            double r = 1.0;
            for (const auto& q : p.parts) r = std::max(r, q.growth_r());
            return r;
          } else if constexpr (std::is_same_v<T, payoff::Custom>) return p.growth_r;
          else return 1.0;
        },
        kind_);
  }

  /// C in |F(alpha)| <= C (1 + ||alpha||_sup^r), valid for paths of n + 1
  /// points (the uniform integral weights sum to one).
  double growth_constant() const {
    return std::visit(
        [](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, payoff::Terminal>) return p.f.growth_constant();
          else if constexpr (std::is_same_v<T, payoff::Integral>) {
            double m = 1.0;
            if (!p.weights.empty()) {
              m = 0.0;
              for (double w : p.weights) m += std::abs(w);
            }
            return p.f.growth_constant() * std::pow(std::max(1.0, m), p.f.growth_r());
          } else if constexpr (std::is_same_v<T, payoff::RunningMax> || std::is_same_v<T, payoff::RunningMin>)
            return p.f.growth_constant() * std::pow(1.0 + std::abs(p.beta), p.f.growth_r());
          else if constexpr (std::is_same_v<T, payoff::MaxAffine>) {
            double c = 0.0;
            for (std::size_t j = 0; j < p.rows.size(); ++j) {
              double l1 = 0.0;
              for (double r : p.rows[j]) l1 += std::abs(r);
              c = std::max({c, l1, std::abs(p.intercepts[j])});
            }
            return c;
          } else if constexpr (std::is_same_v<T, payoff::Composite>) {
            double c = 0.0;
            for (std::size_t i = 0; i < p.parts.size(); ++i) c += std::abs(p.coeffs[i]) * p.parts[i].growth_constant();
            return c;
          } else if constexpr (std::is_same_v<T, payoff::Custom>) return p.growth_constant;
          else return 1.0;
        },
        kind_);
  }

  /// Running-state representation for paths with n + 1 points, if any.
  std::optional<ReducedPayoff> reduce(int n) const {
    ReducedPayoff r;
    const bool ok = std::visit(
        [&](const auto& p) -> bool {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, payoff::Terminal>) {
            r.kind_ = ReducedPayoff::Kind::terminal;
            r.fs_ = {p.f};
            r.coeffs_ = {1.0};
            return true;
          } else if constexpr (std::is_same_v<T, payoff::Integral>) {
            r.kind_ = ReducedPayoff::Kind::running_sum;
            r.fs_ = {p.f};
            r.weights_ = p.weights.empty() ? std::vector<double>(n + 1, 1.0 / (n + 1)) : p.weights;
            if (r.weights_.size() != static_cast<std::size_t>(n) + 1) return false;
            r.tail_.assign(n + 1, 0.0);
            for (int k = n - 1; k >= 0; --k) r.tail_[k] = r.tail_[k + 1] + r.weights_[k + 1];
            return true;
          } else if constexpr (std::is_same_v<T, payoff::RunningMax>) {
            r.kind_ = ReducedPayoff::Kind::running_max;
            r.fs_ = {p.f};
            r.beta_ = p.beta;
            return true;
          } else if constexpr (std::is_same_v<T, payoff::RunningMin>) {
            r.kind_ = ReducedPayoff::Kind::running_min;
            r.fs_ = {p.f};
            r.beta_ = p.beta;
            return true;
          } else if constexpr (std::is_same_v<T, payoff::Composite>) {
            r.kind_ = ReducedPayoff::Kind::terminal;
            for (std::size_t i = 0; i < p.parts.size(); ++i) {
              const auto* t = std::get_if<payoff::Terminal>(&p.parts[i].kind());
              if (!t) return false;
              r.fs_.push_back(t->f);
              r.coeffs_.push_back(p.coeffs[i]);
            }
            return true;
          } else {
            return false;
          }
        },
        kind_);
    if (!ok) return std::nullopt;
    return r;
  }

  std::string describe() const {
    return std::visit(
        [](const auto& p) -> std::string {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, payoff::Terminal>) return "terminal(" + p.f.describe() + ")";
          else if constexpr (std::is_same_v<T, payoff::Integral>) return "integral(" + p.f.describe() + ")";
          else if constexpr (std::is_same_v<T, payoff::RunningMax>) return "running_max(" + p.f.describe() + ")";
          else if constexpr (std::is_same_v<T, payoff::RunningMin>) return "running_min(" + p.f.describe() + ")";
          else if constexpr (std::is_same_v<T, payoff::MaxAffine>) return "max_affine[" + std::to_string(p.rows.size()) + "]";
          else if constexpr (std::is_same_v<T, payoff::Composite>) return "composite[" + std::to_string(p.parts.size()) + "]";
          else if constexpr (std::is_same_v<T, payoff::Digital>) return "digital";
          else if constexpr (std::is_same_v<T, payoff::NegSupNorm>) return "neg_sup_norm";
          else return p.name;
        },
        kind_);
  }

 private:
  static bool is_affine_identity(const ScalarConvexFn& f) {
    const auto* a = std::get_if<fn::Affine>(&f.kind());
    return a && a->slope >= 0.0;
  }

  void validate() const {
    std::visit(
        [](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, payoff::MaxAffine>) {
            require(!p.rows.empty() && p.rows.size() == p.intercepts.size(), ErrorCode::invalid_argument,
                    "max_affine: need matching rows and intercepts");
          } else if constexpr (std::is_same_v<T, payoff::Composite>) {
            require(!p.parts.empty() && p.parts.size() == p.coeffs.size(), ErrorCode::invalid_argument,
                    "composite: need matching parts and coeffs");
          } else if constexpr (std::is_same_v<T, payoff::Custom>) {
            require(static_cast<bool>(p.fn), ErrorCode::invalid_argument, "custom payoff: missing function");
          }
        },
        kind_);
  }

  Kind kind_;
};

/// Exercise-date functionals F_k(x_{0:k}) = F(path frozen after k), for the
/// dates where exercise is allowed.
struct BermudanPayoff {
  enum class Exercise { all_dates, terminal_only, mask };

  PayoffFunctional F;
  Exercise exercise = Exercise::all_dates;
  std::vector<bool> mask;  // used when exercise == mask; size n + 1

  bool exercisable(int k, int n) const {
    switch (exercise) {
      case Exercise::all_dates: return true;
      case Exercise::terminal_only: return k == n;
      case Exercise::mask:
        require(mask.size() == static_cast<std::size_t>(n) + 1, ErrorCode::grid_mismatch,
                "BermudanPayoff: mask must have n + 1 entries");
        return mask[k] || k == n;
    }
    return true;
  }
};

/// F applied to the path frozen after index k.
inline double eval_stopped(const PayoffFunctional& F, std::span<const double> path, int k) {
  require(k >= 0 && static_cast<std::size_t>(k) < path.size(), ErrorCode::index_out_of_range,
          "eval_stopped: k outside [0, n]");
  std::vector<double> frozen(path.begin(), path.end());
  std::fill(frozen.begin() + k + 1, frozen.end(), frozen[k]);
  return F(frozen);
}

inline double eval_stopped(const BermudanPayoff& B, const Path& path, int k) {
  return eval_stopped(B.F, std::span<const double>(path.values), k);
}

inline double eval_payoff(const PayoffFunctional& F, const Path& path) { return F(path); }

struct ConvexityProbeReport {
  int trials = 0;
  double max_violation = 0.0;  // max of F(l a + (1-l) b) - (l F(a) + (1-l) F(b))
  bool convex(double tol = 1e-12) const { return max_violation <= tol; }
};

/// Random midpoint-convexity probe over path pairs of `path_len` points
/// drawn around `center` at a random log-uniform spread up to `scale`.
inline ConvexityProbeReport convexity_probe(const PayoffFunctional& F, int n_trials, RngStream& stream,
                                            int path_len = 9, double center = 0.0, double scale = 1.0) {
  ConvexityProbeReport rep;
  std::vector<double> a(path_len), b(path_len), m(path_len);
  for (int t = 0; t < n_trials; ++t) {
    const double spread_a = scale * std::exp(4.0 * stream.uniform() - 3.0);
    const double spread_b = scale * std::exp(4.0 * stream.uniform() - 3.0);
    for (int i = 0; i < path_len; ++i) {
      a[i] = center + spread_a * stream.normal();
      b[i] = center + spread_b * stream.normal();
    }
    const double l = stream.uniform();
    for (int i = 0; i < path_len; ++i) m[i] = l * a[i] + (1.0 - l) * b[i];
    const double gap = F(m) - (l * F(a) + (1.0 - l) * F(b));
    rep.max_violation = std::max(rep.max_violation, gap);
    ++rep.trials;
  }
  return rep;
}

}  // namespace cvxorder
