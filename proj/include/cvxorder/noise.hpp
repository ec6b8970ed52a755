#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cvxorder/errors.hpp"
#include "cvxorder/quadrature.hpp"
#include "cvxorder/rng.hpp"

namespace cvxorder {

/// One atom of a finite-support law.
struct Atom {
  double value;
  double prob;
};

// ---------------------------------------------------------------------------
// Jump laws of the compound-Poisson part
// ---------------------------------------------------------------------------

/// Jump equal to `low` with probability `p_low`, else `high`.
struct TwoPointJump {
  double low;
  double high;
  double p_low;
};

struct GaussianJump {
  double mean;
  double variance;
};

struct FiniteJump {
  std::vector<double> points;
  std::vector<double> probs;
};

using JumpLaw = std::variant<TwoPointJump, GaussianJump, FiniteJump>;

namespace detail {

inline double sum_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

inline void check_probabilities(const std::vector<double>& points, const std::vector<double>& probs,
                                const std::string& who) {
  require(!points.empty() && points.size() == probs.size(), ErrorCode::invalid_argument,
          who + ": points and probs must be non-empty and of equal length");
  for (double p : probs) require(p >= 0.0 && std::isfinite(p), ErrorCode::invalid_argument, who + ": negative prob");
  for (double x : points) require(std::isfinite(x), ErrorCode::invalid_argument, who + ": non-finite point");
  require(std::abs(sum_of(probs) - 1.0) <= 1e-14 * static_cast<double>(probs.size()), ErrorCode::invalid_argument,
          who + ": probs must sum to 1");
}

inline std::vector<Atom> jump_atoms(const JumpLaw& law, int gaussian_points) {
  return std::visit(
      [&](const auto& j) -> std::vector<Atom> {
        using T = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<T, TwoPointJump>) {
          return {{j.low, j.p_low}, {j.high, 1.0 - j.p_low}};
        } else if constexpr (std::is_same_v<T, GaussianJump>) {
          const auto& gh = gauss_hermite(gaussian_points);
          std::vector<Atom> out;
          for (std::size_t i = 0; i < gh.nodes.size(); ++i)
            out.push_back({j.mean + std::sqrt(j.variance) * gh.nodes[i], gh.weights[i]});
          return out;
        } else {
          std::vector<Atom> out;
          for (std::size_t i = 0; i < j.points.size(); ++i) out.push_back({j.points[i], j.probs[i]});
          return out;
        }
      },
      law);
}

}  // namespace detail

/// Brownian + compensated compound-Poisson martingale Levy process:
///   Z_t = a W_t + sum_{i <= N_t} J_i - intensity * t * E[J].
/// Only finite-moment jump laws are representable, so nu(|z|^p) < inf holds
/// for every p the user declares.
class LevySpec {
 public:
  LevySpec(double brownian_coeff_a, double cp_intensity, JumpLaw jump_law, double p_moment = 2.0)
      : a_(brownian_coeff_a), intensity_(cp_intensity), jump_(std::move(jump_law)), p_moment_(p_moment) {
    require(a_ >= 0.0 && std::isfinite(a_), ErrorCode::invalid_argument, "LevySpec: brownian_coeff_a must be >= 0");
    require(intensity_ >= 0.0 && std::isfinite(intensity_), ErrorCode::invalid_argument,
            "LevySpec: cp_intensity must be >= 0");
    require(p_moment_ > 1.0, ErrorCode::invalid_argument, "LevySpec: p_moment must be > 1");
    if (a_ > 0.0)
      require(p_moment_ >= 2.0, ErrorCode::invalid_argument,
              "LevySpec: a Brownian component requires nu(z^2) < inf (p_moment >= 2)");
    std::visit(
        [](const auto& j) {
          using T = std::decay_t<decltype(j)>;
          if constexpr (std::is_same_v<T, TwoPointJump>) {
            require(j.p_low >= 0.0 && j.p_low <= 1.0, ErrorCode::invalid_argument, "TwoPointJump: p outside [0,1]");
            require(std::isfinite(j.low) && std::isfinite(j.high), ErrorCode::invalid_argument,
                    "TwoPointJump: non-finite jump size");
          } else if constexpr (std::is_same_v<T, GaussianJump>) {
            require(j.variance >= 0.0, ErrorCode::invalid_argument, "GaussianJump: variance must be >= 0");
          } else {
            detail::check_probabilities(j.points, j.probs, "FiniteJump");
          }
        },
        jump_);
  }

  double brownian_coeff() const { return a_; }
  double intensity() const { return intensity_; }
  const JumpLaw& jump_law() const { return jump_; }
  double p_moment() const { return p_moment_; }
  bool compensated() const { return true; }

  double jump_mean() const {
    return std::visit(
        [](const auto& j) -> double {
          using T = std::decay_t<decltype(j)>;
          if constexpr (std::is_same_v<T, TwoPointJump>) return j.p_low * j.low + (1.0 - j.p_low) * j.high;
          else if constexpr (std::is_same_v<T, GaussianJump>) return j.mean;
          else return std::inner_product(j.points.begin(), j.points.end(), j.probs.begin(), 0.0);
        },
        jump_);
  }

  double jump_second_moment() const {
    return std::visit(
        [](const auto& j) -> double {
          using T = std::decay_t<decltype(j)>;
          if constexpr (std::is_same_v<T, TwoPointJump>)
            return j.p_low * j.low * j.low + (1.0 - j.p_low) * j.high * j.high;
          else if constexpr (std::is_same_v<T, GaussianJump>) return j.variance + j.mean * j.mean;
          else {
            double s = 0.0;
            for (std::size_t i = 0; i < j.points.size(); ++i) s += j.probs[i] * j.points[i] * j.points[i];
            return s;
          }
        },
        jump_);
  }

  /// Variance of the increment over a step of length dt.
  double increment_variance(double dt) const { return (a_ * a_ + intensity_ * jump_second_moment()) * dt; }

  bool jump_law_symmetric() const {
    auto atoms = detail::jump_atoms(jump_, 16);
    std::sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.value < r.value; });
    for (std::size_t i = 0, j = atoms.size() - 1; i < atoms.size(); ++i, --j) {
      if (std::abs(atoms[i].value + atoms[j].value) > 1e-14 * (1.0 + std::abs(atoms[i].value)) ||
          std::abs(atoms[i].prob - atoms[j].prob) > 1e-14)
        return false;
    }
    return true;
  }

 private:
  double a_;
  double intensity_;
  JumpLaw jump_;
  double p_moment_;
};

/// a * sqrt(dt) * N + sum of Poisson(intensity * dt) jumps - compensator.
inline double sample_levy_increment(const LevySpec& levy, double dt, RngStream& stream) {
  require(dt > 0.0, ErrorCode::invalid_argument, "sample_levy_increment: dt must be > 0");
  double inc = levy.brownian_coeff() * std::sqrt(dt) * stream.normal();
  if (levy.intensity() > 0.0) {
    const double mean_jumps = levy.intensity() * dt;
    const auto count = stream.poisson(mean_jumps);
    for (std::uint64_t i = 0; i < count; ++i) {
      inc += std::visit(
          [&](const auto& j) -> double {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, TwoPointJump>) {
              return stream.uniform() < j.p_low ? j.low : j.high;
            } else if constexpr (std::is_same_v<T, GaussianJump>) {
              return j.mean + std::sqrt(j.variance) * stream.normal();
            } else {
              const double u = stream.uniform();
              double acc = 0.0;
              for (std::size_t k = 0; k < j.points.size(); ++k) {
                acc += j.probs[k];
                if (u < acc) return j.points[k];
              }
              return j.points.back();
            }
          },
          levy.jump_law());
    }
    inc -= mean_jumps * levy.jump_mean();
  }
  return inc;
}

// ---------------------------------------------------------------------------
// InnovationSpec
// ---------------------------------------------------------------------------

struct GaussianInnovation {
  double variance;
};

struct FiniteSupportInnovation {
  std::vector<Atom> atoms;  // ascending values
};

struct LevyInnovation {
  LevySpec levy;
  double dt;
};

/// Law of one centered noise increment Z_k. Immutable after construction.
class InnovationSpec {
 public:
  using Kind = std::variant<GaussianInnovation, FiniteSupportInnovation, LevyInnovation>;

  static InnovationSpec gaussian(double variance) {
    require(variance > 0.0 && std::isfinite(variance), ErrorCode::invalid_argument,
            "gaussian innovation: variance must be > 0");
    return InnovationSpec(GaussianInnovation{variance}, true, std::numeric_limits<double>::infinity());
  }

  static InnovationSpec finite_support(const std::vector<double>& points, const std::vector<double>& probs) {
    detail::check_probabilities(points, probs, "finite_support innovation");
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < points.size(); ++i) atoms.push_back({points[i], probs[i]});
    std::sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.value < r.value; });
    double mean = 0.0, scale = 1.0;
    for (const auto& a : atoms) {
      mean += a.prob * a.value;
      scale = std::max(scale, std::abs(a.value));
    }
    require(std::abs(mean) <= 1e-14 * scale, ErrorCode::invalid_argument,
            "finite_support innovation: law must be centered");
    const bool sym = is_symmetric(atoms);
    return InnovationSpec(FiniteSupportInnovation{std::move(atoms)}, sym, std::numeric_limits<double>::infinity());
  }

  static InnovationSpec levy_increment(const LevySpec& levy, double dt) {
    require(dt > 0.0, ErrorCode::invalid_argument, "levy increment: dt must be > 0");
    const bool sym = levy.intensity() == 0.0 || levy.jump_law_symmetric();
    return InnovationSpec(LevyInnovation{levy, dt}, sym, levy.p_moment());
  }

  const Kind& kind() const { return kind_; }
  bool symmetric() const { return symmetric_; }
  double moment_order_p() const { return moment_order_p_; }

  bool is_finite_support() const { return std::holds_alternative<FiniteSupportInnovation>(kind_); }
  bool is_gaussian() const { return std::holds_alternative<GaussianInnovation>(kind_); }
  bool is_levy() const { return std::holds_alternative<LevyInnovation>(kind_); }

  double variance() const {
    return std::visit(
        [](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, GaussianInnovation>) return k.variance;
          else if constexpr (std::is_same_v<T, FiniteSupportInnovation>) {
            double v = 0.0;
            for (const auto& a : k.atoms) v += a.prob * a.value * a.value;
            return v;
          } else return k.levy.increment_variance(k.dt);
        },
        kind_);
  }

  double sample(RngStream& stream) const {
    return std::visit(
        [&](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, GaussianInnovation>) {
            return std::sqrt(k.variance) * stream.normal();
          } else if constexpr (std::is_same_v<T, FiniteSupportInnovation>) {
            const double u = stream.uniform();
            double acc = 0.0;
            for (const auto& a : k.atoms) {
              acc += a.prob;
              if (u < acc) return a.value;
            }
            return k.atoms.back().value;
          } else {
            return sample_levy_increment(k.levy, k.dt, stream);
          }
        },
        kind_);
  }

  const std::vector<Atom>& atoms() const {
    const auto* fs = std::get_if<FiniteSupportInnovation>(&kind_);
    if (!fs) fail(ErrorCode::not_finite_support, "enumerate_support requires a finite_support innovation");
    return fs->atoms;
  }

  static bool is_symmetric(const std::vector<Atom>& sorted) {
    const std::size_t n = sorted.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& lo = sorted[i];
      const auto& hi = sorted[n - 1 - i];
      if (std::abs(lo.value + hi.value) > 1e-14 * (1.0 + std::abs(lo.value)) || std::abs(lo.prob - hi.prob) > 1e-14)
        return false;
    }
    return true;
  }

 private:
  InnovationSpec(Kind kind, bool symmetric, double p) : kind_(std::move(kind)), symmetric_(symmetric), moment_order_p_(p) {}

  Kind kind_;
  bool symmetric_;
  double moment_order_p_;
};

inline double sample_innovation(const InnovationSpec& spec, RngStream& stream) { return spec.sample(stream); }

/// Atoms in ascending value order.
inline std::vector<Atom> enumerate_support(const InnovationSpec& spec) { return spec.atoms(); }

/// Symmetric unit-variance finite law on the Gauss-Hermite nodes.
inline InnovationSpec quantize_gaussian(int n_points) {
  require(n_points >= 2, ErrorCode::invalid_argument, "quantize_gaussian: n_points must be >= 2");
  const auto& rule = gauss_hermite(n_points);
  double var = 0.0;
  for (int i = 0; i < n_points; ++i) var += rule.weights[i] * rule.nodes[i] * rule.nodes[i];
  const double scale = 1.0 / std::sqrt(var);
  std::vector<double> pts(n_points);
  for (int i = 0; i < n_points; ++i) pts[i] = rule.nodes[i] * scale;
  return InnovationSpec::finite_support(pts, rule.weights);
}

/// Finite-support surrogate of a Levy increment over dt: the Brownian part
/// is quantized on `gaussian_points` Gauss-Hermite atoms, the jump count is
/// Poisson truncated at `max_jumps` (renormalized), and the result is
/// recentered so the law is exactly a martingale increment.
inline InnovationSpec quantize_levy(const LevySpec& levy, double dt, int gaussian_points = 16, int max_jumps = 6) {
  require(dt > 0.0, ErrorCode::invalid_argument, "quantize_levy: dt must be > 0");
  std::map<double, double> law;  // value -> prob
  law[0.0] = 1.0;
  auto convolve = [](const std::map<double, double>& lhs, const std::vector<Atom>& rhs) {
    std::map<double, double> out;
    for (const auto& [v, p] : lhs)
      for (const auto& a : rhs) out[v + a.value] += p * a.prob;
    return out;
  };
  if (levy.intensity() > 0.0) {
    const double mean = levy.intensity() * dt;
    const auto jumps = detail::jump_atoms(levy.jump_law(), gaussian_points);
    std::vector<double> pk(max_jumps + 1);
    double term = std::exp(-mean), total = 0.0;
    for (int k = 0; k <= max_jumps; ++k) {
      pk[k] = term;
      total += term;
      term *= mean / (k + 1);
    }
    std::map<double, double> mixture;
    std::map<double, double> partial{{0.0, 1.0}};
    for (int k = 0; k <= max_jumps; ++k) {
      if (k > 0) partial = convolve(partial, jumps);
      for (const auto& [v, p] : partial) mixture[v] += p * pk[k] / total;
    }
    law = std::move(mixture);
  }
  if (levy.brownian_coeff() > 0.0) {
    const auto& gh = gauss_hermite(gaussian_points);
    std::vector<Atom> g;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i)
      g.push_back({levy.brownian_coeff() * std::sqrt(dt) * gh.nodes[i], gh.weights[i]});
    law = convolve(law, g);
  }
  double mean = 0.0, total = 0.0;
  for (const auto& [v, p] : law) {
    mean += v * p;
    total += p;
  }
  mean /= total;
  std::vector<double> pts, probs;
  for (const auto& [v, p] : law) {
    pts.push_back(v - mean);
    probs.push_back(p / total);
  }
  // Exact centering after rounding.
  double residual = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) residual += pts[i] * probs[i];
  for (auto& x : pts) x -= residual;
  return InnovationSpec::finite_support(pts, probs);
}

}  // namespace cvxorder
