#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cvxorder/errors.hpp"

namespace cvxorder {

enum class Verdict { dominance_confirmed, violation_detected, inconclusive };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::dominance_confirmed: return "dominance_confirmed";
    case Verdict::violation_detected: return "violation_detected";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

/// Sample mean and standard error of the mean.
struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  std::uint64_t count = 0;
};

/// Two-pass mean / standard error over a sample held in memory (per-path
/// slots filled in parallel, reduced sequentially).
inline Estimate estimate(std::span<const double> xs) {
  Estimate e;
  e.count = xs.size();
  if (xs.empty()) return e;
  double s = 0.0;
  for (double x : xs) s += x;
  e.mean = s / static_cast<double>(xs.size());
  if (xs.size() < 2) return e;
  double ss = 0.0;
  for (double x : xs) ss += (x - e.mean) * (x - e.mean);
  e.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  return e;
}

/// Components of the tolerance behind a verdict.
struct ErrorBudget {
  double mc = 0.0;              // z * paired standard error
  double quadrature = 0.0;
  double grid = 0.0;
  double discretization = 0.0;
  double total() const { return mc + quadrature + grid + discretization; }
};

/// Paired comparison of E lhs <= E rhs (lhs is the side expected smaller).
struct ComparisonReport {
  std::string label;
  double estimate_lhs = 0.0, estimate_rhs = 0.0;
  double se_lhs = 0.0, se_rhs = 0.0;
  double paired_diff_mean = 0.0, paired_diff_se = 0.0;  // lhs - rhs
  std::uint64_t n_paths = 0;
  std::uint64_t seed = 0;
  double z = 3.0;
  Verdict verdict = Verdict::inconclusive;
  ErrorBudget budget;
  std::string backend = "monte-carlo";

  bool confirmed() const { return verdict == Verdict::dominance_confirmed; }
};

/// dominance_confirmed iff diff <= z * se + deterministic budget,
/// violation_detected iff it exceeds it, inconclusive when undefined.
inline Verdict decide(double diff_mean, double diff_se, double z, double deterministic_budget = 0.0) {
  if (!std::isfinite(diff_mean) || !std::isfinite(diff_se) || !std::isfinite(deterministic_budget))
    return Verdict::inconclusive;
  return diff_mean <= z * diff_se + deterministic_budget ? Verdict::dominance_confirmed : Verdict::violation_detected;
}

/// Fills a report from per-path samples of both sides (CRN pairs).
inline ComparisonReport paired_report(std::string label, std::span<const double> lhs, std::span<const double> rhs,
                                      std::uint64_t seed, double z = 3.0, double extra_budget = 0.0) {
  require(lhs.size() == rhs.size(), ErrorCode::invalid_argument, "paired_report: sample sizes differ");
  std::vector<double> d(lhs.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = lhs[i] - rhs[i];
  const auto el = estimate(lhs), er = estimate(rhs), ed = estimate(d);
  ComparisonReport r;
  r.label = std::move(label);
  r.estimate_lhs = el.mean;
  r.estimate_rhs = er.mean;
  r.se_lhs = el.se;
  r.se_rhs = er.se;
  r.paired_diff_mean = ed.mean;
  r.paired_diff_se = ed.se;
  r.n_paths = lhs.size();
  r.seed = seed;
  r.z = z;
  r.budget.mc = z * ed.se;
  r.budget.discretization = extra_budget;
  r.verdict = decide(ed.mean, ed.se, z, extra_budget);
  return r;
}

/// Report for two deterministic values with an explicit tolerance.
inline ComparisonReport exact_report(std::string label, double lhs, double rhs, double tolerance, std::string backend,
                                     double grid_budget = 0.0) {
  ComparisonReport r;
  r.label = std::move(label);
  r.estimate_lhs = lhs;
  r.estimate_rhs = rhs;
  r.paired_diff_mean = lhs - rhs;
  r.backend = std::move(backend);
  r.budget.quadrature = tolerance;
  r.budget.grid = grid_budget;
  r.verdict = decide(lhs - rhs, 0.0, r.z, tolerance + grid_budget);
  return r;
}

inline nlohmann::json to_json(const ErrorBudget& b) {
  return {{"mc", b.mc}, {"quadrature", b.quadrature}, {"grid", b.grid}, {"discretization", b.discretization}};
}

inline nlohmann::json to_json(const ComparisonReport& r) {
  auto num = [](double v) -> nlohmann::json { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"label", r.label},
          {"estimate_lhs", num(r.estimate_lhs)},
          {"estimate_rhs", num(r.estimate_rhs)},
          {"se_lhs", num(r.se_lhs)},
          {"se_rhs", num(r.se_rhs)},
          {"paired_diff_mean", num(r.paired_diff_mean)},
          {"paired_diff_se", num(r.paired_diff_se)},
          {"n_paths", r.n_paths},
          {"seed", r.seed},
          {"z", r.z},
          {"verdict", std::string(to_string(r.verdict))},
          {"budget", to_json(r.budget)},
          {"backend", r.backend}};
}

/// Writes `content` to `path` through a temporary file and a rename.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), ErrorCode::invalid_argument, "cannot write " + tmp.string());
    os << content;
    require(static_cast<bool>(os), ErrorCode::invalid_argument, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cvxorder
