#pragma once

#include <cmath>

#include "cvxorder/errors.hpp"
#include "cvxorder/quadrature.hpp"

namespace cvxorder {

/// Black-Scholes call price with zero rate: E (S_T - K)_+ for
/// S_T = s exp(sigma W_T - sigma^2 T / 2).
inline double bs_call(double s, double k, double sigma, double T) {
  require(s > 0.0 && k > 0.0 && sigma >= 0.0 && T >= 0.0, ErrorCode::invalid_argument, "bs_call: bad arguments");
  const double v = sigma * std::sqrt(T);
  if (v == 0.0) return std::max(s - k, 0.0);
  const double d1 = (std::log(s / k) + 0.5 * v * v) / v;
  return s * normal_cdf(d1) - k * normal_cdf(d1 - v);
}

/// Zero-rate put by put-call parity.
inline double bs_put(double s, double k, double sigma, double T) { return bs_call(s, k, sigma, T) - s + k; }

}  // namespace cvxorder
