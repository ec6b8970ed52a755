#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvxorder/config.hpp"
#include "cvxorder/experiments.hpp"
#include "cvxorder/lattice.hpp"
#include "cvxorder/operators.hpp"
#include "cvxorder/report.hpp"
#include "cvxorder/snell.hpp"

namespace cvxorder {

struct RunOptions {
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> paths;
  std::optional<unsigned> threads;
  bool trace = false;
};

struct RunOutcome {
  int exit_code = 0;
  nlohmann::json report;
  std::vector<std::filesystem::path> files;
};

namespace detail {

using nlohmann::json;

/// Default configuration of every experiment id. A user config replaces
/// defaults key by key at the top level.
inline const std::map<std::string, json>& experiment_defaults() {
  static const std::map<std::string, json> d = [] {
    std::map<std::string, json> m;
    m["compare-european"] = {
        {"grid", {{"n", 64}, {"T", 1.0}}},
        {"x0", 100.0},
        {"model_lo", {{"kind", "local_vol"}, {"sigma", 0.1}}},
        {"model_hi", {{"kind", "local_vol"}, {"sigma", 0.3}}},
        {"payoff", {{"kind", "terminal"}, {"f", {{"call", 100.0}}}}}};
    m["compare-bermudan"] = {
        {"T", 1.0},
        {"n", 12},
        {"x0", 100.0},
        {"sigma", {{"kind", "local_vol_wrap"}, {"inner", 0.2}}},
        {"theta", {{"kind", "local_vol_wrap"}, {"inner", 0.3}}},
        {"quant_points", 32},
        {"payoff", {{"kind", "terminal"}, {"f", {{"put", 100.0}}}}},
        {"exercise", "all_dates"},
        {"grid_nodes", 513}};
    m["sandwich"] = {
        {"grid", {{"n", 128}, {"T", 1.0}}},
        {"s0", 100.0},
        {"sigma", {{"kind", "bounded_rational"}, {"c0", 0.1}, {"c1", 0.2}, {"center", 100.0}, {"scale", 100.0}}},
        {"payoff", {{"call", 100.0}}}};
    m["peacock"] = {{"grid", {{"n", 64}, {"T", 1.0}}},
                    {"s0", 100.0},
                    {"sigmas", {0.1, 0.2, 0.3}},
                    {"payoff", {{"kind", "integral"}, {"f", {{"call", 100.0}}}, {"weights", "uniform"}}}};
    m["ito-compare"] = {{"grid", {{"n", 64}, {"T", 1.0}}},
                        {"x0", 0.0},
                        {"rule", "sin_damped"},
                        {"h", 1.0},
                        {"direction", "upper"},
                        {"payoff", {{"kind", "terminal"}, {"f", {{"call", 0.0}}}}}};
    m["doleans-compare"] = {{"grid", {{"n", 64}, {"T", 1.0}}},
                            {"rule", "sin_damped"},
                            {"h", 0.3},
                            {"direction", "upper"},
                            {"payoff", {{"kind", "terminal"}, {"f", {{"call", 1.0}}}}}};
    m["laplace"] = {{"n", 5},
                    {"lambdas", {0.5, 1.0, 2.0}},
                    {"f", {{"kind", "sigmoid"}, {"scale", 0.4}, {"slope", 1.0}}},
                    {"g", {{"kind", "sigmoid"}, {"scale", 0.8}, {"slope", 1.0}}},
                    {"quad_nodes", 64},
                    {"grid_nodes", 2049}};
    m["cm-compare"] = {{"grid", {{"n", 32}, {"T", 1.0}}},
                       {"f", {{"kind", "sigmoid"}, {"scale", 0.4}, {"slope", 1.0}}},
                       {"g", {{"kind", "sigmoid"}, {"scale", 0.8}, {"slope", 1.0}}},
                       {"mixture", json::array({{{"weight", 1.0}, {"lambda", 0.5}}, {{"weight", 1.0}, {"lambda", 1.0}}})},
                       {"cross_check", false}};
    m["counterexample-2period"] = {{"c", 1.0},
                                   {"x0", 0.0},
                                   {"sigma_grid", {{"start", 0.0}, {"stop", 1.0}, {"step", 0.05}}},
                                   {"quad_nodes", 64},
                                   {"fd_step", 1e-3}};
    m["counterexample-integrand"] = {{"v", {{"kind", "sigmoid"}, {"scale", 1.0}, {"slope", -2.0}}},
                                     {"sigma", 0.05},
                                     {"sigma_tilde", 0.15},
                                     {"quad_nodes", 64},
                                     {"scan_step", 0.05},
                                     {"scan_max", 2.0}};
    m["refine-study"] = {{"model", {{"coefficient", {{"kind", "local_vol_wrap"}, {"inner", 0.2}}}, {"T", 1.0},
                                    {"quant_points", 32}}},
                         {"x0", 100.0},
                         {"payoff", {{"kind", "terminal"}, {"f", {{"put", 100.0}}}}},
                         {"n_list", {4, 8, 16, 32}},
                         {"exercise", "all_dates"},
                         {"grid_nodes", 513}};
    for (auto& [id, cfg] : m) {
      cfg["n_paths"] = 100000;
      cfg["seed"] = 1;
      cfg["z"] = 3.0;
    }
    return m;
  }();
  return d;
}

inline int exit_code_of(Verdict v) {
  switch (v) {
    case Verdict::dominance_confirmed: return 0;
    case Verdict::violation_detected: return 2;
    case Verdict::inconclusive: return 3;
  }
  return 3;
}

/// Worst verdict: any violation, else any inconclusive, else confirmed.
inline Verdict combine(std::initializer_list<Verdict> vs) {
  Verdict out = Verdict::dominance_confirmed;
  for (auto v : vs) {
    if (v == Verdict::violation_detected) return v;
    if (v == Verdict::inconclusive) out = v;
  }
  return out;
}
inline Verdict combine(const std::vector<ComparisonReport>& rs) {
  Verdict out = Verdict::dominance_confirmed;
  for (const auto& r : rs) out = combine({out, r.verdict});
  return out;
}

inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::string csv_num(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// Builds CSV text row by row.
class Csv {
 public:
  explicit Csv(std::string header) { os_ << header << '\n'; }
  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((os_ << (first ? "" : ",") << cell(cells), first = false), ...);
    os_ << '\n';
  }
  std::string str() const { return os_.str(); }

 private:
  template <class T>
  static std::string cell(const T& v) {
    if constexpr (std::is_floating_point_v<T>) return csv_num(v);
    else if constexpr (std::is_integral_v<T>) return std::to_string(v);
    else return std::string(v);
  }
  std::ostringstream os_;
};

inline std::string comparisons_csv(const std::vector<ComparisonReport>& rs) {
  Csv c("label,estimate_lhs,estimate_rhs,se_lhs,se_rhs,paired_diff_mean,paired_diff_se,budget_total,verdict");
  for (const auto& r : rs)
    c.row(r.label, r.estimate_lhs, r.estimate_rhs, r.se_lhs, r.se_rhs, r.paired_diff_mean, r.paired_diff_se,
          r.budget.total(), to_string(r.verdict));
  return c.str();
}

inline std::string value_functions_csv(const std::vector<ValueFunction>& vs) {
  Csv c("k,grid,value");
  for (std::size_t k = 0; k < vs.size(); ++k)
    for (std::size_t i = 0; i < vs[k].size(); ++i) c.row(k, vs[k].grid()[i], vs[k].values()[i]);
  return c.str();
}

struct Context {
  const config::Node& cfg;
  const RunOptions& opts;
  McOptions mc;
  EngineOptions engine;
  json results = json::object();
  std::vector<std::pair<std::string, std::string>> csv;  // file name, content
  Verdict verdict = Verdict::dominance_confirmed;
};

inline BermudanPayoff::Exercise parse_exercise(const config::Node& n) {
  const auto s = n.string();
  if (s == "all_dates") return BermudanPayoff::Exercise::all_dates;
  if (s == "terminal_only") return BermudanPayoff::Exercise::terminal_only;
  n.error("exercise must be \"all_dates\" or \"terminal_only\"");
}

inline void run_compare_european(Context& c) {
  const auto& n = c.cfg;
  const auto lo = config::parse_model(n["model_lo"]);
  const auto hi = config::parse_model(n["model_hi"]);
  const auto payoff = config::parse_payoff(n["payoff"]);
  const auto grid = config::parse_grid(n["grid"]);
  const auto r = mc_compare_european(lo, hi, payoff, grid, n["x0"].number(), c.mc, n.string_or("label", "european"));
  c.results["comparison"] = to_json(r);
  c.csv.emplace_back("comparison.csv", comparisons_csv({r}));
  c.verdict = r.verdict;
}

inline void run_compare_bermudan(Context& c) {
  const auto& n = c.cfg;
  const int steps = static_cast<int>(n["n"].integer());
  if (steps < 1) n["n"].error("need n >= 1");
  LatticeModel lo{config::parse_coefficient(n["sigma"]), n.number_or("T", 1.0),
                  static_cast<int>(n.integer_or("quant_points", 32)), std::nullopt};
  if (n.has("levy")) lo.levy = config::parse_levy(n["levy"]);
  LatticeModel hi = lo;
  hi.coefficient = config::parse_coefficient(n["theta"]);
  const BermudanPayoff b{config::parse_payoff(n["payoff"]), parse_exercise(n["exercise"]), {}};
  const double x0 = n["x0"].number();
  const auto cmp = config::guarded(n, [&] {
    return compare_bermudan(lo.sections(steps), hi.sections(steps), lo.specs(steps), b, x0, c.engine);
  });
  c.results["u0"] = num(cmp.u0);
  c.results["v0"] = num(cmp.v0);
  c.results["tolerance"] = num(cmp.tolerance);
  c.results["dominance"] = cmp.dominance;
  c.results["hypothesis"] = std::string(to_string(cmp.hypothesis.kind));
  c.results["backend"] = cmp.lhs.envelope.backend_label;
  c.results["budget"] = {{"lhs", num(cmp.lhs.budget())}, {"rhs", num(cmp.rhs.budget())}};
  Csv summary("side,reduite,budget");
  summary.row("sigma", cmp.u0, cmp.lhs.budget());
  summary.row("theta", cmp.v0, cmp.rhs.budget());
  c.csv.emplace_back("bermudan.csv", summary.str());
  if (!cmp.lhs.values().empty()) {
    std::ostringstream a, bb;
    write_exercise_boundary_csv(a, cmp.lhs, x0);
    write_exercise_boundary_csv(bb, cmp.rhs, x0);
    c.csv.emplace_back("boundary_sigma.csv", a.str());
    c.csv.emplace_back("boundary_theta.csv", bb.str());
    if (c.opts.trace) {
      c.csv.emplace_back("trace_sigma.csv", value_functions_csv(cmp.lhs.values()));
      c.csv.emplace_back("trace_theta.csv", value_functions_csv(cmp.rhs.values()));
    }
  }
  if (!std::isfinite(cmp.u0) || !std::isfinite(cmp.v0)) c.verdict = Verdict::inconclusive;
  else c.verdict = cmp.dominance ? Verdict::dominance_confirmed : Verdict::violation_detected;
}

inline void run_sandwich(Context& c) {
  const auto& n = c.cfg;
  const auto sigma = config::parse_coefficient(n["sigma"]);
  const auto f = config::parse_scalar_fn(n["payoff"]);
  const auto r = bs_sandwich(sigma, f, config::parse_grid(n["grid"]), n["s0"].number(), c.mc);
  c.results = {{"sigma_min", r.sigma_min},
               {"sigma_max", r.sigma_max},
               {"bs_sigma_min", num(r.bs_min)},
               {"bs_sigma_max", num(r.bs_max)},
               {"mc_local_vol", num(r.mc.mean)},
               {"mc_se", num(r.mc.se)},
               {"delta_n", num(r.delta_n)},
               {"lower", num(r.lower)},
               {"upper", num(r.upper)},
               {"intrinsic", num(r.intrinsic)},
               {"nonpositive_paths", r.nonpositive_paths},
               {"verdict", std::string(to_string(r.verdict))}};
  Csv csv("bs_sigma_min,mc_local_vol,bs_sigma_max,mc_se,delta_n,lower,upper,verdict");
  csv.row(r.bs_min, r.mc.mean, r.bs_max, r.mc.se, r.delta_n, r.lower, r.upper, to_string(r.verdict));
  c.csv.emplace_back("sandwich.csv", csv.str());
  c.verdict = r.verdict;
}

inline void run_peacock(Context& c) {
  const auto& n = c.cfg;
  const auto sigmas = n["sigmas"].numbers();
  const auto r = config::guarded(n, [&] {
    return peacock_scan(sigmas, config::parse_payoff(n["payoff"]), config::parse_grid(n["grid"]), n["s0"].number(),
                        c.mc);
  });
  json est = json::array();
  Csv csv("sigma,estimate,se");
  for (std::size_t i = 0; i < r.sigmas.size(); ++i) {
    est.push_back({{"sigma", r.sigmas[i]}, {"estimate", num(r.estimates[i].mean)}, {"se", num(r.estimates[i].se)}});
    csv.row(r.sigmas[i], r.estimates[i].mean, r.estimates[i].se);
  }
  c.results["estimates"] = est;
  c.results["steps"] = json::array();
  for (const auto& s : r.steps) c.results["steps"].push_back(to_json(s));
  if (r.span) c.results["span"] = to_json(*r.span);
  c.results["monotone"] = r.monotone;
  c.results["strict_span"] = r.strict_span;
  c.csv.emplace_back("peacock.csv", csv.str());
  auto all = r.steps;
  if (r.span) all.push_back(*r.span);
  c.csv.emplace_back("comparisons.csv", comparisons_csv(all));
  c.verdict = combine(r.steps);
}

inline void run_integrand(Context& c, bool doleans) {
  const auto& n = c.cfg;
  const auto grid = config::parse_grid(n["grid"]);
  const auto h = config::parse_profile(n["h"], grid.n);
  const auto rule = make_integrand(config::parse_rule(n["rule"]), h);
  const auto payoff = config::parse_payoff(n["payoff"]);
  IntegrandOptions io;
  io.direction = config::parse_direction(n["direction"]);
  if (n.has("levy")) {
    if (doleans) n["levy"].error("Doleans comparisons are Brownian only");
    io.levy = config::parse_levy(n["levy"]);
  }
  io.x0 = n.number_or("x0", 0.0);
  if (n.has("guard")) io.guard = n["guard"].number();
  const auto r = doleans ? doleans_compare(rule, h, payoff, grid, c.mc, io)
                         : ito_integrand_compare(rule, h, payoff, grid, c.mc, io);
  c.results["comparison"] = to_json(r);
  c.csv.emplace_back("comparison.csv", comparisons_csv({r}));
  c.verdict = r.verdict;
}

inline std::vector<Section> unit_sections(const CoefficientFn& f, int n) {
  std::vector<Section> out;
  for (int k = 0; k < n; ++k) out.push_back(section(f, static_cast<double>(k)));
  return out;
}

inline void run_laplace(Context& c) {
  const auto& n = c.cfg;
  std::vector<Section> fs, gs;
  const auto f = config::parse_coefficient(n["f"]);
  const auto g = config::parse_coefficient(n["g"]);
  if (n.has("grid")) {
    const auto grid = config::parse_grid(n["grid"]);
    fs = laplace_sections(f, grid);
    gs = laplace_sections(g, grid);
  } else {
    const int steps = static_cast<int>(n["n"].integer());
    if (steps < 1) n["n"].error("need n >= 1");
    fs = unit_sections(f, steps);
    gs = unit_sections(g, steps);
  }
  LaplaceOptions lo{static_cast<int>(n.integer_or("quad_nodes", 64)), static_cast<int>(n.integer_or("grid_nodes", 2049))};
  const auto lambdas = n["lambdas"].numbers();
  const auto rs = compare_laplace(fs, gs, lambdas, lo);
  c.results["comparisons"] = json::array();
  Csv csv("lambda,value_f,value_g,verdict");
  for (std::size_t i = 0; i < rs.size(); ++i) {
    c.results["comparisons"].push_back(to_json(rs[i]));
    csv.row(lambdas[i], rs[i].estimate_lhs, rs[i].estimate_rhs, to_string(rs[i].verdict));
  }
  c.csv.emplace_back("laplace.csv", csv.str());
  if (c.opts.trace)
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      c.csv.emplace_back("trace_f_" + std::to_string(i) + ".csv",
                         value_functions_csv(laplace_recursion(fs, lambdas[i], lo).trace));
      c.csv.emplace_back("trace_g_" + std::to_string(i) + ".csv",
                         value_functions_csv(laplace_recursion(gs, lambdas[i], lo).trace));
    }
  c.verdict = combine(rs);
}

inline void run_cm(Context& c) {
  const auto& n = c.cfg;
  std::vector<MixtureTerm> mix;
  const auto m = n["mixture"];
  for (std::size_t i = 0; i < m.size(); ++i) mix.push_back({m.at(i)["weight"].number(), m.at(i)["lambda"].number()});
  const auto r = completely_monotone_compare(config::parse_coefficient(n["f"]), config::parse_coefficient(n["g"]), mix,
                                             config::parse_grid(n["grid"]), c.mc, n.boolean_or("cross_check", false));
  c.results["per_lambda"] = json::array();
  for (const auto& x : r.per_lambda) c.results["per_lambda"].push_back(to_json(x));
  c.results["mixed"] = to_json(r.mixed);
  c.results["recursion"] = json::array();
  for (const auto& x : r.recursion) c.results["recursion"].push_back(to_json(x));
  auto all = r.per_lambda;
  all.push_back(r.mixed);
  c.csv.emplace_back("comparisons.csv", comparisons_csv(all));
  if (!r.recursion.empty()) c.csv.emplace_back("recursion.csv", comparisons_csv(r.recursion));
  c.verdict = combine({combine(all), combine(r.recursion)});
}

inline void run_two_period(Context& c) {
  const auto& n = c.cfg;
  const auto sig = config::parse_range(n["sigma_grid"]);
  const auto r = counterexample_two_period(n["c"].number(), n["x0"].number(), sig,
                                           static_cast<int>(n.integer_or("quad_nodes", 64)), n.number_or("fd_step", 1e-3));
  const double rel = std::abs(r.fd_second_derivative - r.analytic_second_derivative) /
                     std::abs(r.analytic_second_derivative);
  c.results = {{"c", r.c},
               {"x0", r.x0},
               {"fd_second_derivative", num(r.fd_second_derivative)},
               {"analytic_second_derivative", num(r.analytic_second_derivative)},
               {"relative_error", num(rel)},
               {"decreasing_until", num(r.decreasing_until)},
               {"fd_step", r.fd_step}};
  Csv csv("sigma,phi");
  for (std::size_t i = 0; i < r.sigmas.size(); ++i) csv.row(r.sigmas[i], r.phi[i]);
  c.csv.emplace_back("curve.csv", csv.str());
  const bool expected = rel <= 1e-3 && r.decreasing_until > 0.0;
  c.results["expected_outcome"] = expected;
  c.verdict = std::isfinite(rel) ? (expected ? Verdict::dominance_confirmed : Verdict::violation_detected)
                                 : Verdict::inconclusive;
}

inline void run_integrand_counterexample(Context& c) {
  const auto& n = c.cfg;
  const auto v = config::parse_coefficient(n["v"]);
  const auto r = counterexample_integrand(v, n["sigma"].number(), n["sigma_tilde"].number(), c.mc,
                                          static_cast<int>(n.integer_or("quad_nodes", 64)),
                                          n.number_or("scan_step", 0.05), n.number_or("scan_max", 2.0));
  const bool constant_v = *v.traits().lower == *v.traits().upper;
  const bool expected = (constant_v ? !r.reversal : r.reversal) && r.mc_agrees;
  c.results = {{"sigma", r.sigma},
               {"sigma_tilde", r.sigma_tilde},
               {"sigma0", num(r.sigma0)},
               {"phi_sigma", num(r.phi_sigma)},
               {"phi_sigma_tilde", num(r.phi_sigma_tilde)},
               {"phi_prime0", num(r.phi_prime0)},
               {"mc_sigma", {{"mean", num(r.mc_sigma.mean)}, {"se", num(r.mc_sigma.se)}}},
               {"mc_sigma_tilde", {{"mean", num(r.mc_sigma_tilde.mean)}, {"se", num(r.mc_sigma_tilde.se)}}},
               {"paired", to_json(r.paired)},
               {"reversal", r.reversal},
               {"mc_agrees", r.mc_agrees},
               {"expected_outcome", expected}};
  Csv csv("sigma,phi,dphi");
  for (std::size_t i = 0; i < r.scan_sigmas.size(); ++i) csv.row(r.scan_sigmas[i], r.scan_phi[i], r.scan_dphi[i]);
  c.csv.emplace_back("scan.csv", csv.str());
  Csv vals("sigma,quadrature,mc_mean,mc_se");
  vals.row(r.sigma, r.phi_sigma, r.mc_sigma.mean, r.mc_sigma.se);
  vals.row(r.sigma_tilde, r.phi_sigma_tilde, r.mc_sigma_tilde.mean, r.mc_sigma_tilde.se);
  c.csv.emplace_back("values.csv", vals.str());
  if (!std::isfinite(r.phi_sigma) || !std::isfinite(r.mc_sigma.mean)) c.verdict = Verdict::inconclusive;
  else c.verdict = expected ? Verdict::dominance_confirmed : Verdict::violation_detected;
}

inline void run_refine(Context& c) {
  const auto& n = c.cfg;
  const auto mn = n["model"];
  LatticeModel model{config::parse_coefficient(mn["coefficient"]), mn.number_or("T", 1.0),
                     static_cast<int>(mn.integer_or("quant_points", 32)), std::nullopt};
  if (mn.has("levy")) model.levy = config::parse_levy(mn["levy"]);
  std::vector<int> ns;
  const auto nl = n["n_list"];
  for (std::size_t i = 0; i < nl.size(); ++i) ns.push_back(static_cast<int>(nl.at(i).integer()));
  const auto rows = refine_study(model, config::parse_payoff(n["payoff"]), n["x0"].number(), ns, c.engine,
                                 parse_exercise(n["exercise"]));
  c.results["rows"] = json::array();
  Csv csv("n,reduite,diff,budget");
  bool finite = true;
  for (const auto& r : rows) {
    c.results["rows"].push_back({{"n", r.n}, {"reduite", num(r.reduite)}, {"diff", num(r.diff)}, {"budget", num(r.budget)}});
    csv.row(r.n, r.reduite, r.diff, r.budget);
    finite = finite && std::isfinite(r.reduite);
  }
  c.csv.emplace_back("refine.csv", csv.str());
  c.verdict = finite ? Verdict::dominance_confirmed : Verdict::inconclusive;
}

inline const std::map<std::string, std::function<void(Context&)>>& dispatch_table() {
  static const std::map<std::string, std::function<void(Context&)>> t = {
      {"compare-european", run_compare_european},
      {"compare-bermudan", run_compare_bermudan},
      {"sandwich", run_sandwich},
      {"peacock", run_peacock},
      {"ito-compare", [](Context& c) { run_integrand(c, false); }},
      {"doleans-compare", [](Context& c) { run_integrand(c, true); }},
      {"laplace", run_laplace},
      {"cm-compare", run_cm},
      {"counterexample-2period", run_two_period},
      {"counterexample-integrand", run_integrand_counterexample},
      {"refine-study", run_refine},
  };
  return t;
}

}  // namespace detail

inline std::vector<std::string> experiment_ids() {
  std::vector<std::string> ids;
  for (const auto& [id, f] : detail::dispatch_table()) ids.push_back(id);
  return ids;
}

/// Default config of the experiment with the user's top-level keys
/// replacing the defaults, and the run options applied on top.
inline nlohmann::json resolve_config(const nlohmann::json& user, const RunOptions& opts = {}) {
  const config::Node root(user, "");
  if (!user.is_object()) root.error("config must be a JSON object");
  const auto id = root["experiment"].string();
  const auto& defaults = detail::experiment_defaults();
  auto it = defaults.find(id);
  if (it == defaults.end()) root["experiment"].error("unknown experiment id '" + id + "'");
  nlohmann::json cfg = it->second;
  for (const auto& [key, value] : user.items()) {
    if (value.is_null()) cfg.erase(key);
    else cfg[key] = value;
  }
  if (opts.seed) cfg["seed"] = *opts.seed;
  if (opts.paths) cfg["n_paths"] = *opts.paths;
  cfg.erase("threads");
  return cfg;
}

/// Runs the experiment named by config["experiment"], writes report.json and
/// the CSV tables into opts.out_dir, and returns the exit code
/// (0 confirmed / expected, 2 violation, 3 inconclusive).
inline RunOutcome run_experiment(const nlohmann::json& user_config, const RunOptions& opts = {}) {
  const auto cfg = resolve_config(user_config, opts);
  const config::Node root(cfg, "");
  const auto id = root["experiment"].string();
  detail::Context c{root, opts, {}, {}};
  c.mc.n_paths = root["n_paths"].unsigned_integer();
  if (c.mc.n_paths < 2) root["n_paths"].error("need at least 2 paths");
  c.mc.seed = root["seed"].unsigned_integer();
  c.mc.z = root["z"].number();
  if (opts.threads) c.mc.threads = *opts.threads;
  c.engine.threads = c.mc.threads;
  if (root.has("grid_nodes")) c.engine.grid.nodes = static_cast<int>(root["grid_nodes"].integer());
  if (root.has("hermite_nodes")) c.engine.hermite_nodes = static_cast<int>(root["hermite_nodes"].integer());
  detail::dispatch_table().at(id)(c);

  RunOutcome out;
  out.report = {{"report_version", 1},
                {"experiment", id},
                {"config", cfg},
                {"results", c.results},
                {"verdict", std::string(to_string(c.verdict))}};
  out.exit_code = detail::exit_code_of(c.verdict);
  const auto report_path = opts.out_dir / "report.json";
  write_atomic(report_path, out.report.dump(2) + "\n");
  out.files.push_back(report_path);
  for (const auto& [name, content] : c.csv) {
    write_atomic(opts.out_dir / name, content);
    out.files.push_back(opts.out_dir / name);
  }
  return out;
}

}  // namespace cvxorder
