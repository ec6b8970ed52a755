#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cvxorder/coefficient.hpp"
#include "cvxorder/errors.hpp"
#include "cvxorder/noise.hpp"
#include "cvxorder/parallel.hpp"
#include "cvxorder/payoffs.hpp"
#include "cvxorder/quadrature.hpp"
#include "cvxorder/value_function.hpp"

namespace cvxorder {

/// Backward-induction backends.
///  tree:    full path enumeration (any payoff, small n)
///  lattice: exact reachable-state lattice (terminal payoffs, finite support)
///  grid:    interpolated value functions on a state grid (reducible payoffs)
enum class Backend { automatic, tree, lattice, grid };

inline std::string_view to_string(Backend b) {
  switch (b) {
    case Backend::automatic: return "auto";
    case Backend::tree: return "tree";
    case Backend::lattice: return "lattice";
    case Backend::grid: return "grid";
  }
  return "?";
}

struct GridOptions {
  int nodes = 513;
  int aggregate_nodes = 129;
  double std_multiple = 8.0;
  double alpha_fraction = 0.25;  // width of the refined zone, in state standard deviations
  std::optional<double> lo, hi;
  std::optional<double> center;
  std::size_t reachable_cap = 4096;  // per-step node cap of the exact lattice
  std::size_t tree_cap = 2'000'000;  // leaf cap of full enumeration
};

struct EngineOptions {
  Backend backend = Backend::automatic;
  GridOptions grid;
  int hermite_nodes = 64;
  int levy_gaussian_points = 16;
  int levy_max_jumps = 6;
  unsigned threads = 1;
};

/// One-step law as weighted atoms. `exact` is false when the atoms are a
/// quadrature or quantization of a continuous law.
struct StepLaw {
  std::vector<Atom> atoms;
  bool exact = true;
  double variance() const {
    double v = 0.0;
    for (const auto& a : atoms) v += a.prob * a.value * a.value;
    return v;
  }
};

inline StepLaw step_law(const InnovationSpec& spec, const EngineOptions& opts = {}) {
  return std::visit(
      [&](const auto& k) -> StepLaw {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, FiniteSupportInnovation>) {
          return {k.atoms, true};
        } else if constexpr (std::is_same_v<T, GaussianInnovation>) {
          const auto& rule = gauss_hermite(opts.hermite_nodes);
          const double sd = std::sqrt(k.variance);
          StepLaw law{{}, false};
          for (std::size_t i = 0; i < rule.nodes.size(); ++i) law.atoms.push_back({sd * rule.nodes[i], rule.weights[i]});
          return law;
        } else {
          return {quantize_levy(k.levy, k.dt, opts.levy_gaussian_points, opts.levy_max_jumps).atoms(), false};
        }
      },
      spec.kind());
}

inline std::vector<StepLaw> step_laws(std::span<const InnovationSpec> specs, const EngineOptions& opts = {}) {
  std::vector<StepLaw> out;
  out.reserve(specs.size());
  for (const auto& s : specs) out.push_back(step_law(s, opts));
  return out;
}

/// Result of one backward induction.
struct BackwardResult {
  double value = 0.0;
  Backend backend = Backend::tree;
  std::string backend_label;
  bool exact = false;
  double budget = 0.0;                     // interpolation error estimate (grid backend)
  std::vector<ValueFunction> values;       // 1-d state: V_0..V_n
  std::vector<ValueSurface> surfaces;      // 2-d state: V_0..V_n
  std::vector<ValueFunction> obstacles;    // 1-d Snell runs: F_k on the grid
  std::vector<std::vector<std::uint8_t>> exercise;  // Snell runs: per step, per node
};

/// Exercise tie-break: stop when the obstacle is at least the continuation.
inline constexpr double kExerciseTieTol = 1e-12;

namespace detail {

inline bool all_exact(std::span<const StepLaw> laws) {
  return std::all_of(laws.begin(), laws.end(), [](const StepLaw& l) { return l.exact; });
}

/// Sorted, merged (relative 1e-12) copy of xs.
inline std::vector<double> unique_nodes(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs)
    if (out.empty() || x - out.back() > 1e-12 * std::max(1.0, std::abs(x))) out.push_back(x);
  return out;
}

/// Per-interval bound h^2/8 * max|V''| for piecewise-linear interpolation of
/// the node values, with V'' estimated by second differences.
inline std::vector<double> interpolation_bounds(const std::vector<double>& g, std::span<const double> v,
                                                std::size_t stride = 1) {
  const std::size_t n = g.size();
  std::vector<double> d2(n, 0.0), out(n - 1, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = g[i] - g[i - 1], h1 = g[i + 1] - g[i];
    const double s0 = (v[i * stride] - v[(i - 1) * stride]) / h0;
    const double s1 = (v[(i + 1) * stride] - v[i * stride]) / h1;
    d2[i] = std::abs(2.0 * (s1 - s0) / (h0 + h1));
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = g[i + 1] - g[i];
    out[i] = h * h / 8.0 * std::max(d2[i], d2[i + 1]);
  }
  return out;
}

inline std::size_t interval_of(const std::vector<double>& g, double x) {
  const std::size_t n = g.size();
  if (x <= g[0]) return 0;
  if (x >= g[n - 1]) return n - 2;
  return std::min<std::size_t>(std::upper_bound(g.begin(), g.end(), x) - g.begin() - 1, n - 2);
}

}  // namespace detail

/// State interval [lo, hi] for grid backends: std_multiple standard
/// deviations of the dynamics around x0, or a log-scale interval when every
/// section is a positive local-vol wrap and x0 > 0.
inline std::pair<double, double> state_range(std::span<const Section> sigmas, std::span<const StepLaw> laws, double x0,
                                             const GridOptions& opts = {}) {
  if (opts.lo && opts.hi) {
    require(*opts.hi > *opts.lo, ErrorCode::invalid_argument, "grid: need hi > lo");
    return {*opts.lo, *opts.hi};
  }
  const double m = opts.std_multiple;
  const std::size_t n = sigmas.size();
  bool log_scale = x0 > 0.0;
  double rel2 = 0.0;
  for (std::size_t k = 0; k < n && log_scale; ++k) {
    const auto* wrap = std::get_if<coef::LocalVolWrap>(&sigmas[k].fn.kind());
    if (!wrap || !wrap->inner->traits().upper || !wrap->inner->nonneg()) {
      log_scale = false;
      break;
    }
    const double q = sigmas[k].out_scale * sigmas[k].in_scale * *wrap->inner->traits().upper;
    rel2 += laws[k].variance() * q * q;
  }
  double lo, hi;
  if (log_scale) {
    const double rv = std::sqrt(rel2);
    const double w = std::max(m * rv, 1e-3);
    lo = x0 * std::exp(-w);
    hi = x0 * std::exp(w);
  } else {
    double w = 0.0;
    for (int it = 0; it < 8; ++it) {
      double s2 = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        double peak = 0.0;
        for (int j = 0; j <= 32; ++j) {
          const double x = x0 - w + 2.0 * w * j / 32.0;
          peak = std::max(peak, std::abs(sigmas[k](x)));
        }
        s2 += laws[k].variance() * peak * peak;
      }
      const double next = m * std::sqrt(s2);
      if (next <= w * (1.0 + 1e-6)) break;
      w = next;
    }
    if (w <= 0.0) w = 1.0;
    lo = x0 - w;
    hi = x0 + w;
  }
  if (opts.lo) lo = *opts.lo;
  if (opts.hi) hi = *opts.hi;
  require(hi > lo, ErrorCode::invalid_argument, "grid: empty state range");
  return {lo, hi};
}

/// Hull of every state reachable from x0 when all laws have finite support
/// and no level exceeds `cap` distinct states; nullopt otherwise.
inline std::optional<std::pair<double, double>> reachable_hull(std::span<const Section> sigmas,
                                                               std::span<const StepLaw> laws, double x0,
                                                               std::size_t cap = 200000) {
  if (!detail::all_exact(laws)) return std::nullopt;
  std::vector<double> level{x0};
  double lo = x0, hi = x0;
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    std::vector<double> next;
    next.reserve(level.size() * laws[k].atoms.size());
    for (double x : level) {
      const double s = sigmas[k](x);
      for (const auto& a : laws[k].atoms) next.push_back(x + s * a.value);
    }
    level = detail::unique_nodes(std::move(next));
    if (level.size() > cap) return std::nullopt;
    lo = std::min(lo, level.front());
    hi = std::max(hi, level.back());
  }
  return std::pair{lo, hi};
}

/// Backward induction of V_k(x) = E V_{k+1}(x + sigma_k(x) Z_{k+1}), V_n = F,
/// or of the Snell recursion u_k = max(F_k, E u_{k+1}(...)) when `bermudan`
/// is given (F is then bermudan->F).
class BackwardEngine {
 public:
  BackwardEngine(std::span<const Section> sigmas, std::vector<StepLaw> laws, const PayoffFunctional& F,
                 const BermudanPayoff* bermudan, double x0, EngineOptions opts)
      : sigmas_(sigmas.begin(), sigmas.end()),
        laws_(std::move(laws)),
        F_(F),
        bermudan_(bermudan),
        x0_(x0),
        opts_(std::move(opts)),
        n_(static_cast<int>(sigmas.size())) {
    require(n_ >= 1 && laws_.size() == sigmas_.size(), ErrorCode::invalid_argument,
            "backward induction: sigmas and specs must be non-empty and of equal length");
  }

  Backend choose() const {
    const auto reduced = F_.reduce(n_);
    if (opts_.backend != Backend::automatic) {
      if (opts_.backend == Backend::tree)
        require(tree_size() <= opts_.grid.tree_cap, ErrorCode::backend_unavailable, "tree backend: too many paths");
      if (opts_.backend == Backend::lattice)
        require(reduced && reduced->dimension() == 1 && detail::all_exact(laws_), ErrorCode::backend_unavailable,
                "lattice backend: needs a terminal payoff and finite-support specs");
      if (opts_.backend == Backend::grid)
        require(reduced.has_value(), ErrorCode::backend_unavailable, "grid backend: payoff is not state-reducible");
      return opts_.backend;
    }
    if (reduced && reduced->dimension() == 1 && detail::all_exact(laws_) && lattice_fits()) return Backend::lattice;
    if (n_ <= 4 && tree_size() <= opts_.grid.tree_cap && (!reduced || detail::all_exact(laws_))) return Backend::tree;
    if (reduced) return Backend::grid;
    if (n_ <= 4 && tree_size() <= opts_.grid.tree_cap) return Backend::tree;
    fail(ErrorCode::backend_unavailable, "payoff " + F_.describe() + " is not state-reducible and n = " +
                                             std::to_string(n_) + " exceeds the enumeration limit of 4");
  }

  BackwardResult run() const {
    const Backend b = choose();
    BackwardResult r;
    switch (b) {
      case Backend::tree: r = run_tree(); break;
      case Backend::lattice: r = run_lattice(); break;
      default: r = run_grid(); break;
    }
    r.backend = b;
    if (b == Backend::tree) r.backend_label = detail::all_exact(laws_) ? "enumeration" : "quadrature-tree";
    else if (b == Backend::lattice) r.backend_label = "lattice";
    else r.backend_label = detail::all_exact(laws_) ? "grid" : "grid-quadrature";
    r.exact = b != Backend::grid && detail::all_exact(laws_);
    return r;
  }

 private:
  double tree_size() const {
    double s = 1.0;
    for (const auto& l : laws_) s *= static_cast<double>(l.atoms.size());
    return s;
  }

  bool exercisable(int k) const { return bermudan_ && bermudan_->exercisable(k, n_); }

  bool lattice_fits() const {
    std::vector<double> level{x0_};
    for (int k = 0; k < n_; ++k) {
      if (level.size() * laws_[k].atoms.size() > 8 * opts_.grid.reachable_cap) return false;
      level = next_level(k, level);
      if (level.size() > opts_.grid.reachable_cap) return false;
    }
    return true;
  }

  std::vector<double> next_level(int k, const std::vector<double>& level) const {
    std::vector<double> next;
    next.reserve(level.size() * laws_[k].atoms.size());
    for (double x : level) {
      const double s = sigmas_[k](x);
      for (const auto& a : laws_[k].atoms) next.push_back(x + s * a.value);
    }
    return detail::unique_nodes(std::move(next));
  }

  // -- tree ------------------------------------------------------------------

  double tree_rec(int k, std::vector<double>& path) const {
    if (k == n_) return F_(path);
    const double x = path[k];
    const double s = sigmas_[k](x);
    double cont = 0.0;
    for (const auto& a : laws_[k].atoms) {
      path[k + 1] = x + s * a.value;
      cont += a.prob * tree_rec(k + 1, path);
    }
    if (exercisable(k)) {
      const double obstacle = eval_stopped(F_, path, k);
      return std::max(obstacle, cont);
    }
    return cont;
  }

  BackwardResult run_tree() const {
    std::vector<double> path(n_ + 1, x0_);
    BackwardResult r;
    r.value = tree_rec(0, path);
    return r;
  }

  // -- exact lattice ---------------------------------------------------------

  BackwardResult run_lattice() const {
    const auto red = *F_.reduce(n_);
    std::vector<std::vector<double>> levels{{x0_}};
    for (int k = 0; k < n_; ++k) levels.push_back(next_level(k, levels.back()));
    for (auto& l : levels)
      if (l.size() < 2) l.push_back(l.back() + 1.0);

    BackwardResult r;
    r.values.resize(n_ + 1);
    if (bermudan_) {
      r.obstacles.resize(n_ + 1);
      r.exercise.resize(n_ + 1);
    }
    std::vector<double> v(levels[n_].size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = red.stopped_value(n_, levels[n_][i], 0.0);
    r.values[n_] = ValueFunction(levels[n_], v);
    if (bermudan_) {
      r.obstacles[n_] = r.values[n_];
      r.exercise[n_].assign(v.size(), 1);
    }
    for (int k = n_ - 1; k >= 0; --k) {
      const auto& g = levels[k];
      const auto& next = r.values[k + 1];
      std::vector<double> vk(g.size()), ob;
      std::vector<std::uint8_t> ex;
      if (bermudan_) {
        ob.resize(g.size());
        ex.assign(g.size(), 0);
      }
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = sigmas_[k](g[i]);
        double cont = 0.0;
        for (const auto& a : laws_[k].atoms) cont += a.prob * next(g[i] + s * a.value);
        vk[i] = cont;
        if (bermudan_) {
          ob[i] = red.stopped_value(k, g[i], 0.0);
          if (exercisable(k) && ob[i] >= cont - kExerciseTieTol) {
            ex[i] = 1;
            vk[i] = std::max(ob[i], cont);
          }
        }
      }
      r.values[k] = ValueFunction(g, std::move(vk));
      if (bermudan_) {
        r.obstacles[k] = ValueFunction(g, std::move(ob));
        r.exercise[k] = std::move(ex);
      }
    }
    r.value = r.values[0](x0_);
    return r;
  }

  // -- interpolated grid -----------------------------------------------------

  std::vector<double> state_grid(const ReducedPayoff& red) const {
    const auto [lo, hi] = state_range(sigmas_, laws_, x0_, opts_.grid);
    double center = x0_;
    if (opts_.grid.center) {
      center = *opts_.grid.center;
    } else {
      double best = std::numeric_limits<double>::infinity();
      for (double k : red.state_kinks())
        if (k > lo && k < hi && std::abs(k - x0_) < best) {
          best = std::abs(k - x0_);
          center = k;
        }
    }
    const double sd = (hi - lo) / (2.0 * opts_.grid.std_multiple);
    return sinh_grid(center, lo, hi, opts_.grid.nodes, opts_.grid.alpha_fraction * sd);
  }

  BackwardResult run_grid() const {
    const auto red = *F_.reduce(n_);
    const auto xs = state_grid(red);
    return red.dimension() == 1 ? run_grid_1d(red, xs) : run_grid_2d(red, xs);
  }

  BackwardResult run_grid_1d(const ReducedPayoff& red, const std::vector<double>& xs) const {
    const std::size_t nx = xs.size();
    BackwardResult r;
    r.values.resize(n_ + 1);
    if (bermudan_) {
      r.obstacles.resize(n_ + 1);
      r.exercise.resize(n_ + 1);
    }
    std::vector<double> v(nx);
    for (std::size_t i = 0; i < nx; ++i) v[i] = red.stopped_value(n_, xs[i], 0.0);
    r.values[n_] = ValueFunction(xs, v);
    if (bermudan_) {
      r.obstacles[n_] = r.values[n_];
      r.exercise[n_].assign(nx, 1);
    }
    for (int k = n_ - 1; k >= 0; --k) {
      const auto& next = r.values[k + 1];
      const auto bounds = detail::interpolation_bounds(xs, next.values());
      std::vector<double> vk(nx), ob(bermudan_ ? nx : 0), err(nx, 0.0);
      std::vector<std::uint8_t> ex(bermudan_ ? nx : 0, 0);
      const bool can_stop = exercisable(k);
      parallel_for(nx, opts_.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          const double s = sigmas_[k](xs[i]);
          double cont = 0.0, ei = 0.0;
          for (const auto& a : laws_[k].atoms) {
            const double y = xs[i] + s * a.value;
            cont += a.prob * next(y);
            ei += a.prob * bounds[detail::interval_of(xs, y)];
          }
          vk[i] = cont;
          err[i] = ei;
          if (bermudan_) {
            ob[i] = red.stopped_value(k, xs[i], 0.0);
            if (can_stop && ob[i] >= cont - kExerciseTieTol) {
              ex[i] = 1;
              vk[i] = std::max(ob[i], cont);
            }
          }
        }
      });
      r.budget += *std::max_element(err.begin(), err.end());
      r.values[k] = ValueFunction(xs, std::move(vk));
      if (bermudan_) {
        r.obstacles[k] = ValueFunction(xs, std::move(ob));
        r.exercise[k] = std::move(ex);
      }
    }
    r.value = r.values[0](x0_);
    return r;
  }

  BackwardResult run_grid_2d(const ReducedPayoff& red, const std::vector<double>& xs) const {
    const auto [a_lo, a_hi] = red.aggregate_range(x0_, xs.front(), xs.back());
    const auto as = uniform_grid(a_lo, a_hi, opts_.grid.aggregate_nodes);
    const std::size_t nx = xs.size(), na = as.size();
    BackwardResult r;
    r.surfaces.resize(n_ + 1);
    if (bermudan_) r.exercise.resize(n_ + 1);
    std::vector<double> v(nx * na);
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < na; ++j) v[i * na + j] = red.stopped_value(n_, xs[i], as[j]);
    r.surfaces[n_] = ValueSurface(xs, as, v);
    if (bermudan_) r.exercise[n_].assign(nx * na, 1);
    for (int k = n_ - 1; k >= 0; --k) {
      const auto& next = r.surfaces[k + 1];
      // Interpolation bounds along each axis, maximized over the other axis.
      std::vector<double> bx(nx - 1, 0.0), ba(na - 1, 0.0);
      for (std::size_t j = 0; j < na; ++j) {
        const auto b = detail::interpolation_bounds(xs, std::span<const double>(next.values()).subspan(j), na);
        for (std::size_t i = 0; i + 1 < nx; ++i) bx[i] = std::max(bx[i], b[i]);
      }
      for (std::size_t i = 0; i < nx; ++i) {
        const auto b = detail::interpolation_bounds(as, std::span<const double>(next.values()).subspan(i * na, na));
        for (std::size_t j = 0; j + 1 < na; ++j) ba[j] = std::max(ba[j], b[j]);
      }
      std::vector<double> vk(nx * na), err(nx * na, 0.0);
      std::vector<std::uint8_t> ex(bermudan_ ? nx * na : 0, 0);
      const bool can_stop = exercisable(k);
      parallel_for(nx, opts_.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          const double s = sigmas_[k](xs[i]);
          for (std::size_t j = 0; j < na; ++j) {
            double cont = 0.0, ei = 0.0;
            for (const auto& at : laws_[k].atoms) {
              const double y = xs[i] + s * at.value;
              const double a = red.update(k + 1, as[j], y);
              cont += at.prob * next(y, a);
              ei += at.prob * (bx[detail::interval_of(xs, y)] + ba[detail::interval_of(as, a)]);
            }
            double val = cont;
            if (bermudan_ && can_stop) {
              const double ob = red.stopped_value(k, xs[i], as[j]);
              if (ob >= cont - kExerciseTieTol) {
                ex[i * na + j] = 1;
                val = std::max(ob, cont);
              }
            }
            vk[i * na + j] = val;
            err[i * na + j] = ei;
          }
        }
      });
      r.budget += *std::max_element(err.begin(), err.end());
      r.surfaces[k] = ValueSurface(xs, as, std::move(vk));
      if (bermudan_) r.exercise[k] = std::move(ex);
    }
    r.value = r.surfaces[0](x0_, red.init(x0_));
    return r;
  }

  std::vector<Section> sigmas_;
  std::vector<StepLaw> laws_;
  PayoffFunctional F_;
  const BermudanPayoff* bermudan_;
  double x0_;
  EngineOptions opts_;
  int n_;
};

}  // namespace cvxorder
