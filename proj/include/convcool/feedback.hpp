#pragma once

// Closed-loop nonlinear feedback
//   v = (tau/gamma) A^{-1} P( (E_tau^{-1} D T) grad T ),  E_tau = I - kappa tau Lap
// simulated with explicit control and semi-implicit diffusion.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "convcool/error.hpp"
#include "convcool/grid.hpp"
#include "convcool/linsolve.hpp"
#include "convcool/objective.hpp"
#include "convcool/pde.hpp"
#include "convcool/stokes.hpp"

namespace convcool {

struct FeedbackConfig {
  double tau = 0.75;
  double gamma = 0.025;
  double kappa = 0.05;
  TimeGrid timegrid{1.0, 160};
  GridSpec grid = GridSpec::square(160);
  double stokes_tol = kDefaultStokesTol;
  double linear_tol = kDefaultLinearTol;

  void validate() const {
    if (!(tau >= 0.0)) throw ConfigError("tau must be nonnegative");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  }
};

// Returns the Stokes solution whose velocity is the feedback control for the
// snapshot T. tau = 0 yields the zero field without any solve.
inline StokesSolution feedback_velocity(const ScalarField& T, const FeedbackConfig& cfg) {
  cfg.validate();
  const GridSpec& g = T.grid();
  if (cfg.tau == 0.0) return {StaggeredVelocity(g), CellField(g), {0, 0.0, "none"}};
  const ScalarField dev = deviation(T);
  const ScalarField eta =
      helmholtz_solve(HelmholtzOperator(g, cfg.kappa * cfg.tau), dev, cfg.linear_tol).first;
  StaggeredVelocity force = face_force(eta, T);
  force *= cfg.tau;
  return detail::cached_solver<StokesSolver>(g).solve(force, cfg.gamma, cfg.stokes_tol);
}

struct ClosedLoopStep {
  ScalarField next;
  StaggeredVelocity velocity;
  double control_power = 0.0;  // <force, v> >= 0
};

inline ClosedLoopStep closed_loop_step(const ScalarField& T, const FeedbackConfig& cfg) {
  const double dt = cfg.timegrid.dt();
  StokesSolution s = feedback_velocity(T, cfg);
  ScalarField rhs = T;
  double power = 0.0;
  if (cfg.tau != 0.0) {
    rhs.axpy(-dt, advect(s.velocity, T));
    power = cfg.gamma * h1_seminorm_sq(s.velocity);
  }
  ScalarField next =
      helmholtz_solve(HelmholtzOperator(T.grid(), cfg.kappa * dt), rhs, cfg.linear_tol).first;
  return {std::move(next), std::move(s.velocity), power};
}

// (I - c Lap_N) eta = D T, returns (|eta|^2 + |grad eta|^2)^{1/2}. The default
// c = 1 is the unit comparison operator; pass kappa*tau for the E_tau variant.
inline double mix_norm(const ScalarField& T, double c = 1.0) {
  const GridSpec& g = T.grid();
  const ScalarField eta = helmholtz_solve(HelmholtzOperator(g, c), deviation(T)).first;
  const double l2 = inner(eta, eta);
  const double h1 = -inner(laplacian_neumann(eta), eta);
  return std::sqrt(l2 + std::max(h1, 0.0));
}

struct ClosedLoopRun {
  Trajectory T;
  ControlTrajectory v;
  ObjectiveBreakdown objective;
  std::vector<double> dev_norm;      // nodal |D T^i|, i = 0..n
  std::vector<double> vel_norm;      // |v_i|_2 at node i (0 at the last node)
  std::vector<double> mix;           // mix_norm(T^i)
  std::vector<double> control_power;
  double wall_time = 0.0;
};

inline ClosedLoopRun simulate_closed_loop(const FeedbackConfig& cfg, const ScalarField& T0,
                                          const CostWeights& weights) {
  cfg.validate();
  require_same_grid(cfg.grid, T0.grid(), "simulate_closed_loop");
  const int n = cfg.timegrid.steps;
  ClosedLoopRun run;
  run.T.timegrid = cfg.timegrid;
  run.v.timegrid = cfg.timegrid;
  run.T.fields.reserve(static_cast<std::size_t>(n) + 1);
  run.T.fields.push_back(T0);
  for (int i = 0; i < n; ++i) {
    ClosedLoopStep step = closed_loop_step(run.T.fields.back(), cfg);
    run.control_power.push_back(step.control_power);
    run.v.velocities.push_back(std::move(step.velocity));
    run.T.fields.push_back(std::move(step.next));
  }
  for (int i = 0; i <= n; ++i) {
    run.dev_norm.push_back(nodal_norm(deviation(run.T[i])));
    run.vel_norm.push_back(i < n ? norm_l2(run.v[i]) : 0.0);
    run.mix.push_back(mix_norm(run.T[i]));
  }
  run.objective = evaluate(run.T, run.v, CostWeights{weights.alpha, weights.beta, cfg.gamma});
  return run;
}

struct TauSweepRow {
  double tau = 0.0;
  std::optional<ObjectiveBreakdown> objective;  // empty when the run failed
  std::string error;
};

inline std::vector<TauSweepRow> tau_sweep(const FeedbackConfig& base, const ScalarField& T0,
                                          const CostWeights& weights,
                                          const std::vector<double>& taus) {
  if (taus.empty()) throw ConfigError("tau sweep needs at least one tau");
  std::vector<TauSweepRow> rows;
  for (double tau : taus) {
    if (!(tau >= 0.0)) throw ConfigError("tau values must be nonnegative");
    FeedbackConfig cfg = base;
    cfg.tau = tau;
    TauSweepRow row{tau, std::nullopt, {}};
    try {
      row.objective = simulate_closed_loop(cfg, T0, weights).objective;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace convcool
