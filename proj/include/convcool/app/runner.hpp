#pragma once

// One experiment per call: solve, export CSVs and snapshots into a fresh run
// directory, then write manifest.json listing every artifact.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "convcool/app/config.hpp"
#include "convcool/app/field_io.hpp"
#include "convcool/app/initial_condition.hpp"
#include "convcool/app/manifest.hpp"
#include "convcool/app/metrics.hpp"
#include "convcool/error.hpp"
#include "convcool/feedback.hpp"
#include "convcool/objective.hpp"
#include "convcool/optimize.hpp"
#include "convcool/pde.hpp"
#include "convcool/verify.hpp"

namespace convcool {

inline constexpr double kGradientCheckTol = 1e-3;
inline constexpr double kHessianCheckTol = 1e-2;

struct RunResult {
  RunManifest manifest;
  std::vector<std::string> failed_checks;  // verify and convergence modes
};

inline std::vector<double> default_sweep_taus() {
  std::vector<double> taus;
  for (int k = 0; k <= 20; ++k) taus.push_back(0.1 * k);
  return taus;
}

// "<mode>-ex<example>-<local time>", e.g. "feedback-ex1-20260101-120000".
inline std::string default_run_name(const RunConfig& cfg) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  return to_string(cfg.mode) + "-ex" + example_name(cfg.initial.selector) + "-" + stamp;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

inline CostWeights weights_of(const RunConfig& c) { return {c.alpha, c.beta, c.gamma}; }

inline FeedbackConfig feedback_config(const RunConfig& c, double tau) {
  FeedbackConfig f;
  f.tau = tau;
  f.gamma = c.gamma;
  f.kappa = c.kappa;
  f.grid = GridSpec::square(c.mesh);
  f.timegrid = TimeGrid(c.t_final, c.steps);
  f.stokes_tol = c.stokes_tol;
  f.linear_tol = c.linear_tol;
  return f;
}

inline OptimizeConfig optimize_config(const RunConfig& c) {
  OptimizeConfig o;
  o.weights = weights_of(c);
  o.kappa = c.kappa;
  o.grid = GridSpec::square(c.mesh);
  o.timegrid = TimeGrid(c.t_final, c.steps);
  o.tol = c.picard_tol;
  o.memory = c.memory;
  o.damping = c.damping;
  o.max_iterations = c.max_iterations;
  o.continuation = c.continuation;
  o.stokes_tol = c.stokes_tol;
  o.linear_tol = c.linear_tol;
  return o;
}

inline nlohmann::json to_json(const ObjectiveBreakdown& o) {
  return {{"J", o.j_total},          {"J_alpha", o.j_alpha}, {"J_beta", o.j_beta},
          {"J_gamma", o.j_gamma},    {"max_div", o.max_div}, {"max_vel", o.max_vel},
          {"max_vel_l2", o.max_vel_l2}};
}

// Writes metrics, summary and snapshots shared by the trajectory-producing modes.
inline void export_trajectory(const std::filesystem::path& dir, const RunConfig& cfg,
                              const Trajectory& T, const ControlTrajectory& v,
                              const ObjectiveBreakdown& objective, int iterations, double cpu,
                              RunManifest& m) {
  m.add_csv("metrics.csv", write_metrics_csv(dir / "metrics.csv", compute_metrics(T, v, weights_of(cfg))));
  m.add_csv("summary.csv", write_summary_csv(dir / "summary.csv", objective, iterations, cpu));
  std::vector<double> times = cfg.snapshot_times;
  if (times.empty()) times = {0.0, cfg.t_final};
  const double dt = T.timegrid.dt();
  std::vector<int> written;
  for (double t : times) {
    const int i = std::clamp(static_cast<int>(std::lround(t / dt)), 0, T.steps());
    if (std::find(written.begin(), written.end(), i) != written.end()) continue;
    written.push_back(i);
    char name[32];
    std::snprintf(name, sizeof name, "T_%05d.bin", i);
    write_field(dir / name, T[i], T.timegrid.time(i));
    m.add_file(dir, name, "field");
    m.add_file(dir, sidecar_path(name).string(), "header");
  }
}

inline double max_mean_drift(const Trajectory& T) {
  const double m0 = mean(T[0]);
  double drift = 0.0;
  for (int i = 0; i <= T.steps(); ++i) drift = std::max(drift, std::abs(mean(T[i]) - m0));
  return drift;
}

inline void run_uncontrolled(const RunConfig& cfg, const std::filesystem::path& dir,
                             std::ostream& out, RunResult& r) {
  const GridSpec g = GridSpec::square(cfg.mesh);
  const TimeGrid tg(cfg.t_final, cfg.steps);
  const ScalarField T0 = build_initial_condition(cfg.initial, g);
  const auto start = Clock::now();
  const ControlTrajectory v = ControlTrajectory::zeros(g, tg);
  const Trajectory T = forward_solve(v, T0, cfg.kappa, cfg.linear_tol);
  const ObjectiveBreakdown o = evaluate(T, v, weights_of(cfg));
  const double cpu = seconds_since(start);
  r.manifest.wall_time = cpu;
  r.manifest.reports["objective"] = to_json(o);
  r.manifest.reports["mean_drift"] = max_mean_drift(T);
  export_trajectory(dir, cfg, T, v, o, 0, cpu, r.manifest);
  out << "J = " << csv_number(o.j_total) << "  J_beta = " << csv_number(o.j_beta)
      << "  cpu = " << csv_number(cpu) << " s\n";
}

inline void run_feedback(const RunConfig& cfg, const std::filesystem::path& dir,
                         std::ostream& out, RunResult& r) {
  const FeedbackConfig fc = feedback_config(cfg, cfg.tau);
  const ScalarField T0 = build_initial_condition(cfg.initial, fc.grid);
  const auto start = Clock::now();
  const ClosedLoopRun run = simulate_closed_loop(fc, T0, weights_of(cfg));
  const double cpu = seconds_since(start);
  r.manifest.wall_time = cpu;
  r.manifest.reports["tau"] = cfg.tau;
  r.manifest.reports["objective"] = to_json(run.objective);
  r.manifest.reports["mean_drift"] = max_mean_drift(run.T);
  export_trajectory(dir, cfg, run.T, run.v, run.objective, 0, cpu, r.manifest);
  out << "tau = " << csv_number(cfg.tau) << "  J = " << csv_number(run.objective.j_total)
      << "  J_beta = " << csv_number(run.objective.j_beta)
      << "  J_gamma = " << csv_number(run.objective.j_gamma)
      << "  max_vel = " << csv_number(run.objective.max_vel) << "  cpu = " << csv_number(cpu)
      << " s\n";
}

inline void run_optimal(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& out,
                        RunResult& r) {
  const OptimizeConfig oc = optimize_config(cfg);
  const auto residuals_path = dir / "residuals.csv";
  auto res = open_for_write(residuals_path);
  res << "level,nx,iteration,residual,J,safeguard\n";
  std::size_t rows = 0;
  std::vector<int> level_cells;
  for (const auto& [grid, tg] : continuation_levels(oc)) level_cells.push_back(grid.nx);
  const auto initial = [&](const GridSpec& g) { return build_initial_condition(cfg.initial, g); };
  const OptimalControlResult sol = solve_optimal(oc, initial, [&](const IterationRecord& it) {
    const int nx = level_cells[static_cast<std::size_t>(it.level)];
    res << it.level << ',' << nx << ',' << it.iteration << ',' << csv_number(it.residual) << ','
        << csv_number(it.objective) << ',' << (it.safeguard ? 1 : 0) << "\n";
    ++rows;
    out << "level " << it.level << " (" << nx << ") iter " << it.iteration << "  residual "
        << csv_number(it.residual) << "  J " << csv_number(it.objective)
        << (it.safeguard ? "  [safeguard]" : "") << "\n";
  });
  finish(res, residuals_path);
  r.manifest.add_csv("residuals.csv", rows);
  r.manifest.wall_time = sol.wall_time;
  r.manifest.reports["objective"] = to_json(sol.objective);
  r.manifest.reports["no_control"] = to_json(sol.no_control);
  r.manifest.reports["iterations"] = sol.iterations;
  r.manifest.reports["total_iterations"] = sol.total_iterations;
  r.manifest.reports["mean_drift"] = max_mean_drift(sol.T);
  nlohmann::json levels = nlohmann::json::array();
  for (const LevelReport& l : sol.levels) {
    levels.push_back({{"nx", l.grid.nx}, {"ny", l.grid.ny}, {"steps", l.timegrid.steps},
                      {"iterations", l.iterations}, {"residual", l.residual},
                      {"safeguard_steps", l.safeguard_steps},
                      {"anderson_fallbacks", l.anderson_fallbacks}});
  }
  r.manifest.reports["levels"] = levels;
  export_trajectory(dir, cfg, sol.T, sol.v, sol.objective, sol.iterations, sol.wall_time,
                    r.manifest);
  out << "J = " << csv_number(sol.objective.j_total) << "  (no control "
      << csv_number(sol.no_control.j_total) << ")  iterations = " << sol.iterations
      << "  cpu = " << csv_number(sol.wall_time) << " s\n";
}

inline void run_sweep(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& out,
                      RunResult& r) {
  const std::vector<double> taus = cfg.taus.empty() ? default_sweep_taus() : cfg.taus;
  const FeedbackConfig base = feedback_config(cfg, 0.0);
  const ScalarField T0 = build_initial_condition(cfg.initial, base.grid);
  const auto start = Clock::now();
  const std::vector<TauSweepRow> rows = tau_sweep(base, T0, weights_of(cfg), taus);
  r.manifest.wall_time = seconds_since(start);
  const auto path = dir / "sweep.csv";
  auto csv = open_for_write(path);
  csv << "tau,J,J_alpha,J_beta,J_gamma,max_div,max_vel,error\n";
  double best_j = std::numeric_limits<double>::infinity();
  double best_tau = std::numeric_limits<double>::quiet_NaN();
  for (const TauSweepRow& row : rows) {
    csv << csv_number(row.tau);
    if (row.objective) {
      const ObjectiveBreakdown& o = *row.objective;
      csv << ',' << csv_number(o.j_total) << ',' << csv_number(o.j_alpha) << ','
          << csv_number(o.j_beta) << ',' << csv_number(o.j_gamma) << ',' << csv_number(o.max_div)
          << ',' << csv_number(o.max_vel) << ",\n";
      if (o.j_total < best_j) {
        best_j = o.j_total;
        best_tau = row.tau;
      }
      out << "tau = " << csv_number(row.tau) << "  J = " << csv_number(o.j_total) << "\n";
    } else {
      std::string msg = row.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      csv << ",,,,,,," << msg << "\n";
      out << "tau = " << csv_number(row.tau) << "  failed: " << row.error << "\n";
    }
  }
  finish(csv, path);
  r.manifest.add_csv("sweep.csv", rows.size());
  r.manifest.reports["best_tau"] = best_tau;
  r.manifest.reports["best_J"] = best_j;
  out << "best tau = " << csv_number(best_tau) << "  J = " << csv_number(best_j) << "\n";
}

inline void run_verify(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& out,
                       RunResult& r) {
  const GridSpec g = GridSpec::square(cfg.mesh);
  const TimeGrid tg(cfg.t_final, cfg.steps);
  DerivativeCheckProblem p = make_check_problem(build_initial_condition(cfg.initial, g), tg, cfg.seed);
  p.kappa = cfg.kappa;
  p.weights = weights_of(cfg);
  const auto path = dir / "verify.csv";
  auto csv = open_for_write(path);
  csv << "check,direction,analytic,finite_difference,relative_error\n";
  std::size_t rows = 0;
  const auto start = Clock::now();
  auto report = [&](const std::string& name, const DerivativeCheck& c, double tol) {
    for (std::size_t k = 0; k < c.analytic.size(); ++k, ++rows) {
      csv << name << ',' << k << ',' << csv_number(c.analytic[k]) << ','
          << csv_number(c.finite_difference[k]) << ',' << csv_number(c.relative_error[k]) << "\n";
    }
    const bool ok = c.max_relative_error <= tol;
    r.manifest.reports[name] = {{"max_relative_error", c.max_relative_error}, {"tolerance", tol},
                                {"passed", ok}};
    out << name << " check: max relative error " << csv_number(c.max_relative_error)
        << " (tolerance " << csv_number(tol) << ") " << (ok ? "PASS" : "FAIL") << "\n";
    if (!ok) r.failed_checks.push_back(name);
  };
  if (cfg.check_gradient) {
    report("gradient", gradient_check(p, cfg.directions, cfg.seed + 1), kGradientCheckTol);
  }
  if (cfg.check_hessian) {
    report("hessian", hessian_check(p, cfg.directions, cfg.seed + 2), kHessianCheckTol);
  }
  r.manifest.wall_time = seconds_since(start);
  finish(csv, path);
  r.manifest.add_csv("verify.csv", rows);
}

inline void run_convergence(const std::filesystem::path& dir, std::ostream& out, RunResult& r) {
  struct Study {
    std::string name;
    ConvergenceStudy result;
    double lo, hi;
  };
  const auto start = Clock::now();
  const std::vector<int> ns{16, 32, 64, 128};
  const std::vector<int> steps{10, 20, 40, 80};
  std::vector<Study> studies;
  studies.push_back({"helmholtz_spectral", helmholtz_convergence(ns, 1.0, HelmholtzMethod::kSpectral), 3.0, 5.0});
  studies.push_back({"helmholtz_cg", helmholtz_convergence(ns, 1.0, HelmholtzMethod::kConjugateGradient), 3.0, 5.0});
  studies.push_back({"stokes", stokes_convergence(ns), 3.0, 5.0});
  studies.push_back({"time_heat", temporal_convergence(steps), 1.7, 2.3});
  studies.push_back({"time_advected", advected_temporal_convergence(steps), 1.7, 2.3});
  r.manifest.wall_time = seconds_since(start);
  const auto path = dir / "convergence.csv";
  auto csv = open_for_write(path);
  csv << "study,resolution,error,ratio\n";
  std::size_t rows = 0;
  for (const Study& s : studies) {
    bool ok = true;
    out << s.name << ":";
    for (std::size_t k = 0; k < s.result.errors.size(); ++k, ++rows) {
      csv << s.name << ',' << s.result.resolutions[k] << ',' << csv_number(s.result.errors[k]) << ',';
      if (k > 0) {
        const double ratio = s.result.ratios[k - 1];
        csv << csv_number(ratio);
        out << ' ' << csv_number(ratio);
        ok = ok && ratio >= s.lo && ratio <= s.hi;
      }
      csv << "\n";
    }
    out << "  [" << csv_number(s.lo) << ", " << csv_number(s.hi) << "] " << (ok ? "PASS" : "FAIL") << "\n";
    r.manifest.reports[s.name] = {{"ratios", s.result.ratios}, {"passed", ok}};
    if (!ok) r.failed_checks.push_back(s.name);
  }
  finish(csv, path);
  r.manifest.add_csv("convergence.csv", rows);
}

}  // namespace detail

// `dir` must not exist or be empty. Solver errors propagate; partial outputs
// are left in place without a manifest.
inline RunResult run_experiment(const RunConfig& cfg, const std::filesystem::path& dir,
                                std::ostream& out) {
  cfg.validate();
  std::error_code ec;
  if (std::filesystem::exists(dir) && !std::filesystem::is_empty(dir)) {
    throw IoError("run directory " + dir.string() + " is not empty");
  }
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  RunResult r;
  r.manifest.mode = to_string(cfg.mode);
  r.manifest.config = to_text(cfg);
  switch (cfg.mode) {
    case RunMode::kNone: detail::run_uncontrolled(cfg, dir, out, r); break;
    case RunMode::kFeedback: detail::run_feedback(cfg, dir, out, r); break;
    case RunMode::kOptimal: detail::run_optimal(cfg, dir, out, r); break;
    case RunMode::kSweep: detail::run_sweep(cfg, dir, out, r); break;
    case RunMode::kVerify: detail::run_verify(cfg, dir, out, r); break;
    case RunMode::kConvergence: detail::run_convergence(dir, out, r); break;
  }
  r.manifest.reports["failed_checks"] = r.failed_checks;
  write_manifest(dir, r.manifest);
  return r;
}

}  // namespace convcool
