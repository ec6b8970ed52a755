#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "cvxorder/errors.hpp"

namespace cvxorder {

/// Nodes and weights of a quadrature rule. For Gauss-Hermite rules the
/// weights are probabilities: sum(w) == 1 and the rule integrates against
/// the standard normal density.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

struct QuadratureOptions {
  int hermite_nodes = 64;
  int legendre_nodes = 24;
  double truncation = 12.0;  // |z| cut-off for piecewise integration
  double max_panel = 1.0;
};

namespace detail {

inline QuadratureRule compute_gauss_hermite(int n) {
  // Newton iteration on orthonormal physicists' Hermite polynomials, then a
  // change of variable to the standard normal density.
  constexpr double kPiM4 = 0.7511255444649425;  // pi^(-1/4)
  std::vector<double> x(n), w(n);
  const int half = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[1];
    } else {
      z = 2.0 * z - x[i - 2];
    }
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = kPiM4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = w[n - 1 - i] = 2.0 / (pp * pp);
  }
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += w[i];
  // Ascending order, exactly mirrored.
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = -std::numbers::sqrt2 * x[i];
    rule.weights[i] = w[i] / total;
  }
  for (int i = 0; i < n / 2; ++i) {
    const double node = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
    const double weight = 0.5 * (rule.weights[i] + rule.weights[n - 1 - i]);
    rule.nodes[i] = -node;
    rule.nodes[n - 1 - i] = node;
    rule.weights[i] = rule.weights[n - 1 - i] = weight;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

inline QuadratureRule compute_gauss_legendre(int n) {
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-16) break;
    }
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
  return rule;
}

template <class Compute>
const QuadratureRule& cached_rule(std::map<int, QuadratureRule>& cache, std::mutex& mutex, int n,
                                  Compute compute) {
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute(n)).first;
  return it->second;
}

}  // namespace detail

/// Gauss-Hermite rule for E g(Z), Z ~ N(0,1); nodes ascending and exactly
/// symmetric, weights sum to one. Exact for polynomials of degree <= 2n-1.
inline const QuadratureRule& gauss_hermite(int n) {
  require(n >= 1, ErrorCode::invalid_argument, "gauss_hermite: n must be >= 1");
  static std::map<int, QuadratureRule> cache;
  static std::mutex mutex;
  return detail::cached_rule(cache, mutex, n, detail::compute_gauss_hermite);
}

/// Gauss-Legendre rule on [-1, 1].
inline const QuadratureRule& gauss_legendre(int n) {
  require(n >= 1, ErrorCode::invalid_argument, "gauss_legendre: n must be >= 1");
  static std::map<int, QuadratureRule> cache;
  static std::mutex mutex;
  return detail::cached_rule(cache, mutex, n, detail::compute_gauss_legendre);
}

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// E g(Z) for Z ~ N(0,1).
///
/// Without kinks this is plain Gauss-Hermite. When g has known kinks (points
/// where it is not smooth, expressed in z-coordinates) Gauss-Hermite converges
/// only algebraically, so the line is cut at the kinks and each smooth panel
/// of [-L, L] is integrated with Gauss-Legendre against the density.
template <class G>
double gaussian_expectation(G&& g, std::span<const double> kinks, const QuadratureOptions& opts = {}) {
  if (kinks.empty()) {
    const auto& rule = gauss_hermite(opts.hermite_nodes);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * g(rule.nodes[i]);
    return sum;
  }
  const double L = opts.truncation;
  std::vector<double> cuts;
  const int panels = static_cast<int>(std::ceil(2.0 * L / opts.max_panel));
  cuts.reserve(panels + 1 + kinks.size());
  for (int j = 0; j <= panels; ++j) cuts.push_back(-L + 2.0 * L * j / panels);
  for (double k : kinks)
    if (k > -L && k < L) cuts.push_back(k);
  std::sort(cuts.begin(), cuts.end());
  const auto& gl = gauss_legendre(opts.legendre_nodes);
  double sum = 0.0;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double a = cuts[p], b = cuts[p + 1];
    if (b - a <= 0.0) continue;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double panel = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double z = mid + half * gl.nodes[i];
      panel += gl.weights[i] * g(z) * normal_pdf(z);
    }
    sum += half * panel;
  }
  return sum;
}

}  // namespace cvxorder
