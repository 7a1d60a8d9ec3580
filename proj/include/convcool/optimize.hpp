#pragma once

// Open-loop optimal control by fixed-point iteration on the optimality system
//   T = forward(v),  q = adjoint(v, T),  v_i = Stokes(face_force(q^i, T^i), gamma)
// accelerated with type-II Anderson mixing and run under mesh continuation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "convcool/error.hpp"
#include "convcool/grid.hpp"
#include "convcool/linsolve.hpp"
#include "convcool/log.hpp"
#include "convcool/objective.hpp"
#include "convcool/pde.hpp"
#include "convcool/stokes.hpp"

namespace convcool {

struct OptimizeConfig {
  CostWeights weights;
  double kappa = 0.05;
  GridSpec grid = GridSpec::square(160);
  TimeGrid timegrid{1.0, 160};
  double tol = 1e-5;
  int memory = 5;
  double max_condition = 1e12;  // Anderson least-squares conditioning limit
  double damping = 0.5;  // weight of the map image in each mixed step
  int max_iterations = 200;  // per level
  bool continuation = true;
  int coarse_cells = 10;  // coarsest level is (coarse, coarse, coarse)
  double stokes_tol = kDefaultStokesTol;
  double linear_tol = kDefaultLinearTol;

  void validate() const {
    if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
    if (!(weights.gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (weights.alpha < 0.0 || weights.beta < 0.0) {
      throw ConfigError("alpha and beta must be nonnegative");
    }
    if (!(tol > 0.0)) throw ConfigError("fixed-point tolerance must be positive");
    if (memory < 0) throw ConfigError("Anderson memory must be nonnegative");
    if (!(max_condition >= 1.0)) throw ConfigError("max_condition must be at least 1");
    if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");
    if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  }
};

// One application of the fixed-point map, with the state and adjoint it used.
struct PicardEvaluation {
  ControlTrajectory image;
  Trajectory state;
  Trajectory adjoint;
  std::vector<CellField> pressures;
  int stokes_iterations = 0;
};

// `pressure_guess` (one per time entry, may be empty) warm-starts the Stokes
// solves; it changes only the iteration count, not the result beyond the
// solver tolerance.
inline PicardEvaluation picard_evaluate(const ControlTrajectory& v, const ScalarField& T0,
                                        const OptimizeConfig& cfg,
                                        const std::vector<CellField>& pressure_guess = {}) {
  const CostWeights& w = cfg.weights;
  PicardEvaluation out;
  out.state = forward_solve(v, T0, cfg.kappa, cfg.linear_tol);
  out.adjoint = adjoint_solve(v, out.state, w.alpha, w.beta, cfg.kappa, cfg.linear_tol);
  const int n = v.steps();
  const GridSpec& g = T0.grid();
  auto& stokes = detail::cached_solver<StokesSolver>(g);
  out.image.timegrid = v.timegrid;
  out.image.velocities.reserve(static_cast<std::size_t>(n));
  out.pressures.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::optional<CellField> guess;
    if (pressure_guess.size() == static_cast<std::size_t>(n)) {
      guess = pressure_guess[static_cast<std::size_t>(i)];
    }
    try {
      StokesSolution s = stokes.solve(face_force(out.adjoint[i], out.state[i]), w.gamma,
                                      cfg.stokes_tol, guess);
      out.stokes_iterations += s.report.iterations;
      out.image.velocities.push_back(std::move(s.velocity));
      out.pressures.push_back(std::move(s.pressure));
    } catch (const SolverError& e) {
      throw SolverError("picard_map: time index " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

inline ControlTrajectory picard_map(const ControlTrajectory& v, const ScalarField& T0,
                                    const OptimizeConfig& cfg) {
  return picard_evaluate(v, T0, cfg).image;
}

// Type-II Anderson mixing over the last m residual differences. The least
// squares problem is solved by modified Gram-Schmidt QR; the oldest columns
// are dropped until the triangular factor has condition <= max_condition.
// With damping b < 1 the step is (1 - b) x_mix + b g_mix, where x_mix and
// g_mix are the same combination of stored iterates and images.
class AndersonMemory {
 public:
  explicit AndersonMemory(int m, double max_condition = 1e12, double damping = 1.0)
      : m_(m), max_condition_(max_condition), damping_(damping) {}

  int depth() const { return static_cast<int>(df_.size()); }
  int fallbacks() const { return fallbacks_; }
  void clear() {
    df_.clear();
    dg_.clear();
    last_f_.reset();
    last_g_.reset();
  }

  // Records the pair (x, g(x)) and returns the next iterate.
  ControlTrajectory step(const ControlTrajectory& x, const ControlTrajectory& gx) {
    ControlTrajectory f = gx - x;
    if (last_f_) {
      df_.push_back(f - *last_f_);
      dg_.push_back(gx - *last_g_);
      if (static_cast<int>(df_.size()) > m_) {
        df_.pop_front();
        dg_.pop_front();
      }
    }
    last_f_ = f;
    last_g_ = gx;
    if (m_ == 0 || df_.empty()) return damped(x, gx);

    std::optional<std::vector<double>> coeffs;
    while (!df_.empty()) {
      coeffs = least_squares(f);
      if (coeffs) break;
      df_.pop_front();
      dg_.pop_front();
    }
    if (!coeffs) {
      ++fallbacks_;
      log(LogLevel::kInfo, "Anderson: least squares singular, plain Picard step");
      return damped(x, gx);
    }
    ControlTrajectory next = gx;
    for (std::size_t k = 0; k < dg_.size(); ++k) next.axpy(-(*coeffs)[k], dg_[k]);
    if (damping_ != 1.0) {
      ControlTrajectory xbar = x;
      for (std::size_t k = 0; k < df_.size(); ++k) {
        xbar.axpy(-(*coeffs)[k], dg_[k] - df_[k]);
      }
      return damped(xbar, next);
    }
    return next;
  }

 private:
  // argmin |f - DF c| over the stored columns, or nullopt when ill-conditioned.
  std::optional<std::vector<double>> least_squares(const ControlTrajectory& f) const {
    const std::size_t k = df_.size();
    std::vector<ControlTrajectory> q;
    q.reserve(k);
    std::vector<std::vector<double>> r(k, std::vector<double>(k, 0.0));
    for (std::size_t j = 0; j < k; ++j) {
      ControlTrajectory col = df_[j];
      for (std::size_t i = 0; i < j; ++i) {
        r[i][j] = inner(q[i], col);
        col.axpy(-r[i][j], q[i]);
      }
      r[j][j] = norm_l2(col);
      if (!(r[j][j] > 0.0)) return std::nullopt;
      col *= 1.0 / r[j][j];
      q.push_back(std::move(col));
    }
    double dmax = 0.0, dmin = INFINITY;
    for (std::size_t j = 0; j < k; ++j) {
      dmax = std::max(dmax, std::abs(r[j][j]));
      dmin = std::min(dmin, std::abs(r[j][j]));
    }
    if (dmax / dmin > max_condition_) return std::nullopt;
    std::vector<double> c(k);
    for (std::size_t i = 0; i < k; ++i) c[i] = inner(q[i], f);
    for (std::size_t ii = k; ii-- > 0;) {
      for (std::size_t j = ii + 1; j < k; ++j) c[ii] -= r[ii][j] * c[j];
      c[ii] /= r[ii][ii];
    }
    return c;
  }

  ControlTrajectory damped(const ControlTrajectory& x, const ControlTrajectory& gx) const {
    if (damping_ == 1.0) return gx;
    ControlTrajectory out = (1.0 - damping_) * x;
    out.axpy(damping_, gx);
    return out;
  }

  int m_;
  double max_condition_;
  double damping_;
  int fallbacks_ = 0;
  std::deque<ControlTrajectory> df_;
  std::deque<ControlTrajectory> dg_;
  std::optional<ControlTrajectory> last_f_;
  std::optional<ControlTrajectory> last_g_;
};

inline ControlTrajectory anderson_step(AndersonMemory& mem, const ControlTrajectory& v,
                                       const ControlTrajectory& gv) {
  return mem.step(v, gv);
}

struct IterationRecord {
  int level = 0;
  int iteration = 0;        // 1-based within the level
  double residual = 0.0;    // |g(v) - v| / (1 + |v|)
  double objective = 0.0;   // J(v)
  bool safeguard = false;   // this step replaced an AA iterate by plain Picard
};

struct LevelReport {
  GridSpec grid;
  TimeGrid timegrid;
  int iterations = 0;
  double residual = 0.0;
  int safeguard_steps = 0;
  int anderson_fallbacks = 0;
  std::vector<double> residual_history;
  double max_cfl = 0.0;  // over all iterates of the level
};

struct OptimalControlResult {
  ControlTrajectory v;
  Trajectory T;
  Trajectory q;
  ObjectiveBreakdown objective;
  ObjectiveBreakdown no_control;
  std::vector<LevelReport> levels;
  int iterations = 0;        // finest level
  int total_iterations = 0;  // summed over levels
  double wall_time = 0.0;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

namespace detail {

inline double relative_residual(const ControlTrajectory& v, const ControlTrajectory& gv) {
  return norm_l2(gv - v) / (1.0 + norm_l2(v));
}

// Levels from the coarsest mesh up to the target, doubling space and time.
inline std::vector<std::pair<GridSpec, TimeGrid>> continuation_levels(const OptimizeConfig& cfg) {
  std::vector<std::pair<GridSpec, TimeGrid>> levels;
  if (!cfg.continuation) {
    levels.emplace_back(cfg.grid, cfg.timegrid);
    return levels;
  }
  const int c = cfg.coarse_cells;
  int k = 1;
  while (c * k < cfg.grid.nx) k *= 2;
  if (c * k != cfg.grid.nx || c * k != cfg.grid.ny || c * k != cfg.timegrid.steps) {
    throw ConfigError("continuation needs nx = ny = steps = " + std::to_string(c) +
                      " * 2^k; disable continuation for other meshes");
  }
  for (int s = 1; s <= k; s *= 2) {
    levels.emplace_back(GridSpec::square(c * s), TimeGrid(cfg.timegrid.t_final, c * s));
  }
  return levels;
}

}  // namespace detail

// AA-Picard on a single mesh from the initial guess v0. The returned level
// holds the last iterate, whose residual met the tolerance.
inline std::pair<PicardEvaluation, ControlTrajectory> solve_level(
    ControlTrajectory v, const ScalarField& T0, const OptimizeConfig& cfg, int level,
    LevelReport& report, const IterationCallback& on_iteration) {
  // Iterates share one CFL warning per level instead of one per march.
  const MuteCflWarnings mute;
  struct CflReport {
    LevelReport& report;
    int level;
    ~CflReport() {
      if (report.max_cfl <= 1.0) return;
      std::ostringstream os;
      os << "level " << level << ": explicit advection CFL number up to " << report.max_cfl
         << " > 1";
      log(LogLevel::kWarning, os.str());
    }
  } cfl_report{report, level};
  AndersonMemory mem(cfg.memory, cfg.max_condition, cfg.damping);
  PicardEvaluation ev = picard_evaluate(v, T0, cfg);
  double res = detail::relative_residual(v, ev.image);
  std::optional<std::pair<ControlTrajectory, PicardEvaluation>> previous;
  double previous_res = 0.0;
  for (int it = 1;; ++it) {
    bool safeguard = false;
    if (previous && res > 10.0 * previous_res) {
      // Reject the mixed iterate: take the plain Picard image of the
      // previous one and restart the memory.
      safeguard = true;
      ++report.safeguard_steps;
      v = previous->second.image;
      mem.clear();
      ev = picard_evaluate(v, T0, cfg, previous->second.pressures);
      res = detail::relative_residual(v, ev.image);
    }
    report.iterations = it;
    report.residual = res;
    report.max_cfl = std::max(report.max_cfl, max_cfl_number(v));
    report.residual_history.push_back(res);
    if (on_iteration) {
      const ObjectiveBreakdown ob = evaluate(ev.state, v, cfg.weights);
      on_iteration({level, it, res, ob.j_total, safeguard});
    }
    if (res <= cfg.tol) break;
    if (it >= cfg.max_iterations) {
      report.anderson_fallbacks = mem.fallbacks();
      std::ostringstream os;
      os << "AA-Picard did not converge on level " << level << " (" << T0.grid().nx << "x"
         << T0.grid().ny << "x" << v.steps() << ") in " << it << " iterations, residual "
         << res;
      throw SolverError(os.str());
    }
    ControlTrajectory next = mem.step(v, ev.image);
    previous_res = res;
    std::vector<CellField> guess = ev.pressures;
    previous.emplace(std::move(v), std::move(ev));
    v = std::move(next);
    ev = picard_evaluate(v, T0, cfg, guess);
    res = detail::relative_residual(v, ev.image);
  }
  report.anderson_fallbacks = mem.fallbacks();
  return {std::move(ev), std::move(v)};
}

// `initial` builds the initial temperature on a given mesh.
inline OptimalControlResult solve_optimal(
    const OptimizeConfig& cfg, const std::function<ScalarField(const GridSpec&)>& initial,
    const IterationCallback& on_iteration = {}) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto levels = detail::continuation_levels(cfg);
  OptimalControlResult out;
  std::optional<ControlTrajectory> guess;
  PicardEvaluation last;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto& [grid, tg] = levels[l];
    OptimizeConfig level_cfg = cfg;
    level_cfg.grid = grid;
    level_cfg.timegrid = tg;
    const ScalarField T0 = initial(grid);
    require_same_grid(grid, T0.grid(), "solve_optimal");
    // Prolongation is not discretely divergence-free and damped mixing keeps a
    // share of the first iterate, so each finer level starts from the map
    // image of the prolonged control.
    ControlTrajectory v0 = guess ? picard_map(prolong(*guess, grid), T0, level_cfg)
                                 : ControlTrajectory::zeros(grid, tg);
    LevelReport report{grid, tg, 0, 0.0, 0, 0, {}};
    auto [ev, v] = solve_level(std::move(v0), T0, level_cfg, static_cast<int>(l), report,
                               on_iteration);
    out.total_iterations += report.iterations;
    out.levels.push_back(std::move(report));
    last = std::move(ev);
    guess = std::move(v);
  }
  out.v = std::move(*guess);
  out.T = std::move(last.state);
  out.q = std::move(last.adjoint);
  out.iterations = out.levels.back().iterations;
  out.objective = evaluate(out.T, out.v, cfg.weights);
  out.no_control = evaluate(ControlTrajectory::zeros(cfg.grid, cfg.timegrid), initial(cfg.grid),
                            cfg.kappa, cfg.weights);
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace convcool
