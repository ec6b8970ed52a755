#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvxorder/coefficient.hpp"
#include "cvxorder/dynamics.hpp"
#include "cvxorder/errors.hpp"
#include "cvxorder/experiments.hpp"
#include "cvxorder/noise.hpp"
#include "cvxorder/payoffs.hpp"
#include "cvxorder/scalar_fn.hpp"

namespace cvxorder::config {

using nlohmann::json;

/// Field access with ConfigError diagnostics carrying the JSON path.
class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const json& raw() const { return *j_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::config_error, "at " + (path_.empty() ? std::string("/") : path_) + ": " + what);
  }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  Node operator[](const std::string& key) const {
    if (!j_->is_object()) error("expected an object");
    auto it = j_->find(key);
    if (it == j_->end()) error("missing field '" + key + "'");
    return Node(*it, path_ + "/" + key);
  }
  Node at(std::size_t i) const {
    if (!j_->is_array() || i >= j_->size()) error("expected an array with index " + std::to_string(i));
    return Node((*j_)[i], path_ + "/" + std::to_string(i));
  }
  std::size_t size() const {
    if (!j_->is_array()) error("expected an array");
    return j_->size();
  }

  double number() const {
    if (!j_->is_number()) error("expected a number");
    return j_->get<double>();
  }
  std::int64_t integer() const {
    if (!j_->is_number_integer()) error("expected an integer");
    return j_->get<std::int64_t>();
  }
  std::uint64_t unsigned_integer() const {
    if (!j_->is_number_unsigned() && !(j_->is_number_integer() && j_->get<std::int64_t>() >= 0))
      error("expected a nonnegative integer");
    return j_->get<std::uint64_t>();
  }
  bool boolean() const {
    if (!j_->is_boolean()) error("expected a boolean");
    return j_->get<bool>();
  }
  std::string string() const {
    if (!j_->is_string()) error("expected a string");
    return j_->get<std::string>();
  }
  std::vector<double> numbers() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).number());
    return out;
  }

  double number_or(const std::string& key, double dflt) const { return has(key) ? (*this)[key].number() : dflt; }
  std::int64_t integer_or(const std::string& key, std::int64_t dflt) const {
    return has(key) ? (*this)[key].integer() : dflt;
  }
  bool boolean_or(const std::string& key, bool dflt) const { return has(key) ? (*this)[key].boolean() : dflt; }
  std::string string_or(const std::string& key, const std::string& dflt) const {
    return has(key) ? (*this)[key].string() : dflt;
  }

 private:
  const json* j_;
  std::string path_;
};

/// Wraps construction errors of a sub-object into ConfigError at its path.
template <class F>
auto guarded(const Node& n, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config_error) throw;
    n.error(e.what());
  }
}

/// Parses JSON text; syntax errors report line and column.
inline json parse_text(const std::string& text, const std::string& source = "config") {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(ErrorCode::config_error, source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

inline json load_file(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::config_error, "cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_text(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Descriptors
// ---------------------------------------------------------------------------

inline JumpLaw parse_jump(const Node& n) {
  if (n.has("two_point")) {
    const auto v = n["two_point"];
    if (v.size() != 3) v.error("two_point takes [low, high, p_low]");
    return TwoPointJump{v.at(0).number(), v.at(1).number(), v.at(2).number()};
  }
  if (n.has("gaussian")) {
    const auto v = n["gaussian"];
    if (v.size() != 2) v.error("gaussian takes [mean, variance]");
    return GaussianJump{v.at(0).number(), v.at(1).number()};
  }
  if (n.has("finite")) {
    const auto f = n["finite"];
    return FiniteJump{f["points"].numbers(), f["probs"].numbers()};
  }
  n.error("jump law must be one of two_point, gaussian, finite");
}

inline LevySpec parse_levy(const Node& n) {
  return guarded(n, [&] {
    const double a = n.number_or("a", 0.0);
    const double intensity = n.number_or("intensity", 0.0);
    const JumpLaw jump = n.has("jump") ? parse_jump(n["jump"]) : JumpLaw{TwoPointJump{-1.0, 1.0, 0.5}};
    return LevySpec(a, intensity, jump, n.number_or("p_moment", 2.0));
  });
}

inline InnovationSpec parse_innovation(const Node& n) {
  const auto kind = n["kind"].string();
  return guarded(n, [&]() -> InnovationSpec {
    if (kind == "gaussian") return InnovationSpec::gaussian(n.number_or("variance", 1.0));
    if (kind == "finite_support") return InnovationSpec::finite_support(n["points"].numbers(), n["probs"].numbers());
    if (kind == "quantized_gaussian") return quantize_gaussian(static_cast<int>(n["points"].integer()));
    if (kind == "rademacher") return InnovationSpec::finite_support({-1.0, 1.0}, {0.5, 0.5});
    if (kind == "levy") return InnovationSpec::levy_increment(parse_levy(n), n["dt"].number());
    n["kind"].error("unknown innovation kind '" + kind + "'");
  });
}

inline ScalarConvexFn parse_scalar_fn(const Node& n) {
  const auto& j = n.raw();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "abs") return ScalarConvexFn::abs();
    if (s == "identity") return ScalarConvexFn::identity();
    n.error("unknown scalar function '" + s + "'");
  }
  if (!j.is_object() || j.size() != 1) n.error("scalar function must be a one-key object such as {\"call\": 100}");
  const auto key = j.begin().key();
  const Node v = n[key];
  return guarded(n, [&]() -> ScalarConvexFn {
    if (key == "call") return ScalarConvexFn::call(v.number());
    if (key == "put") return ScalarConvexFn::put(v.number());
    if (key == "power") return ScalarConvexFn::power(v.number());
    if (key == "abs") return ScalarConvexFn::abs();
    if (key == "exp_affine") return ScalarConvexFn::exp_affine(v.number());
    if (key == "affine") return ScalarConvexFn::affine(v.at(0).number(), v.at(1).number());
    if (key == "piecewise_linear")
      return ScalarConvexFn::piecewise_linear(v["breakpoints"].numbers(), v["slopes"].numbers(),
                                              v.number_or("value_at_first", 0.0));
    if (key == "table") return ScalarConvexFn::table(v["xs"].numbers(), v["ys"].numbers());
    n.error("unknown scalar function '" + key + "'");
  });
}

inline CoefficientFn parse_coefficient(const Node& n) {
  if (n.raw().is_number()) return CoefficientFn::constant(n.number());
  const auto kind = n["kind"].string();
  return guarded(n, [&]() -> CoefficientFn {
    if (kind == "constant") return CoefficientFn::constant(n["c"].number());
    if (kind == "time_table") return CoefficientFn::time_table(n["times"].numbers(), n["values"].numbers());
    if (kind == "affine") return CoefficientFn::affine(n["a"].number(), n["b"].number());
    if (kind == "abs_affine") return CoefficientFn::abs_affine(n["a"].number(), n["b"].number());
    if (kind == "bounded_rational")
      return CoefficientFn::bounded_rational(n["c0"].number(), n["c1"].number(), n["center"].number(),
                                             n["scale"].number());
    if (kind == "local_vol_wrap") return CoefficientFn::local_vol_wrap(parse_coefficient(n["inner"]));
    if (kind == "clipped")
      return CoefficientFn::clipped(parse_coefficient(n["inner"]), n.number_or("lo", -HUGE_VAL),
                                    n.number_or("hi", HUGE_VAL));
    if (kind == "sigmoid")
      return CoefficientFn::sigmoid(n["scale"].number(), n["slope"].number(), n.number_or("shift", 0.0));
    if (kind == "ramp") return CoefficientFn::ramp(n["scale"].number(), n["lo"].number(), n["hi"].number());
    if (kind == "sample_grid") return CoefficientFn::sample_grid(n["xs"].numbers(), n["values"].numbers());
    n["kind"].error("unknown coefficient kind '" + kind + "'");
  });
}

inline PayoffFunctional parse_payoff(const Node& n) {
  const auto kind = n["kind"].string();
  return guarded(n, [&]() -> PayoffFunctional {
    if (kind == "terminal") return PayoffFunctional::terminal(parse_scalar_fn(n["f"]));
    if (kind == "integral") {
      std::vector<double> w;
      if (n.has("weights") && !n["weights"].raw().is_string()) w = n["weights"].numbers();
      else if (n.has("weights") && n["weights"].string() != "uniform") n["weights"].error("expected \"uniform\" or a list");
      return PayoffFunctional::integral(parse_scalar_fn(n["f"]), std::move(w));
    }
    if (kind == "running_max") return PayoffFunctional::running_max(parse_scalar_fn(n["f"]), n.number_or("beta", 0.0));
    if (kind == "running_min") return PayoffFunctional::running_min(parse_scalar_fn(n["f"]), n.number_or("beta", 0.0));
    if (kind == "max_affine") {
      std::vector<std::vector<double>> rows;
      const auto r = n["rows"];
      for (std::size_t i = 0; i < r.size(); ++i) rows.push_back(r.at(i).numbers());
      return PayoffFunctional::max_affine(std::move(rows), n["intercepts"].numbers());
    }
    if (kind == "composite") {
      std::vector<PayoffFunctional> parts;
      const auto p = n["parts"];
      for (std::size_t i = 0; i < p.size(); ++i) parts.push_back(parse_payoff(p.at(i)));
      return PayoffFunctional::composite(std::move(parts), n["coeffs"].numbers());
    }
    if (kind == "digital") return PayoffFunctional::digital(n["strike"].number());
    if (kind == "neg_sup_norm") return PayoffFunctional::neg_sup_norm();
    n["kind"].error("unknown payoff kind '" + kind + "'");
  });
}

/// {"kind":"brownian","sigma":...} | {"kind":"local_vol","sigma":...}
/// (wrapped x sigma(t, x)) | {"kind":"levy","kappa":...,"levy":{...}}
inline SdeModel parse_model(const Node& n) {
  const auto kind = n["kind"].string();
  if (kind == "brownian") return BrownianEuler{parse_coefficient(n["sigma"])};
  if (kind == "local_vol") return BrownianEuler{CoefficientFn::local_vol_wrap(parse_coefficient(n["sigma"]))};
  if (kind == "levy") return LevyEuler{parse_coefficient(n["kappa"]), parse_levy(n["levy"])};
  n["kind"].error("unknown model kind '" + kind + "'");
}

inline GridSpec parse_grid(const Node& n) {
  return guarded(n, [&] { return GridSpec(static_cast<int>(n["n"].integer()), n.number_or("T", 1.0)); });
}

inline IntegrandRule parse_rule(const Node& n) {
  const auto s = n.string();
  if (s == "zero") return IntegrandRule::zero;
  if (s == "constant") return IntegrandRule::constant;
  if (s == "sin_damped") return IntegrandRule::sin_damped;
  if (s == "amplified") return IntegrandRule::amplified;
  if (s == "bounded_amplified") return IntegrandRule::bounded_amplified;
  n.error("unknown integrand rule '" + s + "'");
}

inline Direction parse_direction(const Node& n) {
  const auto s = n.string();
  if (s == "upper") return Direction::upper;
  if (s == "lower") return Direction::lower;
  n.error("direction must be \"upper\" or \"lower\"");
}

/// A number (repeated n times) or a list of n numbers.
inline std::vector<double> parse_profile(const Node& n, int steps) {
  if (n.raw().is_number()) return std::vector<double>(steps, n.number());
  auto v = n.numbers();
  if (static_cast<int>(v.size()) != steps) n.error("expected " + std::to_string(steps) + " values");
  return v;
}

/// A list of numbers or {"start", "stop", "step"}.
inline std::vector<double> parse_range(const Node& n) {
  if (n.raw().is_array()) return n.numbers();
  const double a = n["start"].number(), b = n["stop"].number(), h = n["step"].number();
  if (!(h > 0.0) || b < a) n.error("need step > 0 and stop >= start");
  std::vector<double> out;
  const auto count = static_cast<long>(std::floor((b - a) / h + 1e-9));
  for (long i = 0; i <= count; ++i) out.push_back(a + h * i);
  return out;
}

}  // namespace cvxorder::config
