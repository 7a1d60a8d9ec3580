// Acceptance run: one PASS/FAIL line per criterion, preceded by indented
// detail lines. Exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "convcool/app/initial_condition.hpp"
#include "convcool/feedback.hpp"
#include "convcool/log.hpp"
#include "convcool/objective.hpp"
#include "convcool/optimize.hpp"
#include "convcool/verify.hpp"
#include "dense_oracle.hpp"

using namespace convcool;

namespace {

constexpr int kMesh = 160;
constexpr double kKappa = 0.05;
constexpr double kGamma = 0.025;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

void detail(const char* fmt, auto... args) {
  std::printf("  ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

bool within(double value, double target, double rel) {
  return std::abs(value - target) <= rel * std::abs(target);
}

// Prints "  name: value (target t +- p%) ok|off" and returns the check.
bool check_rel(const char* name, double value, double target, double rel) {
  const bool ok = within(value, target, rel);
  detail("%s = %.4f (target %.3f +- %.0f%%) %s", name, value, target, 100 * rel, ok ? "ok" : "off");
  return ok;
}

int failures = 0;

void verdict(int n, bool ok, const std::string& what) {
  std::printf("criterion %d %s: %s\n", n, ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

ScalarField initial(int example, const GridSpec& g) {
  switch (example) {
    case 1: return ScalarField::sample(g, example1);
    case 2: return ScalarField::sample(g, example2);
    default: return ScalarField::sample(g, example3);
  }
}

double mean_drift(const Trajectory& T) {
  double d = 0.0;
  for (const ScalarField& f : T.fields) d = std::max(d, std::abs(mean(f) - mean(T[0])));
  return d / norm_inf(T[0]);
}

bool monotone(const std::vector<double>& xs) {
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] < xs[i - 1])) return false;
  }
  return true;
}

struct FeedbackOutcome {
  ObjectiveBreakdown objective;
  double drift = 0.0;
  bool monotone = false;
  double seconds = 0.0;
};

// Closed-loop runs at 160x160 nodes and 160 steps, cached by (example, tau in 1/100).
FeedbackOutcome feedback(int example, double tau) {
  static std::map<std::pair<int, long>, FeedbackOutcome> cache;
  const auto key = std::make_pair(example, std::lround(tau * 100));
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  FeedbackConfig c;
  c.tau = tau;
  c.gamma = kGamma;
  c.kappa = kKappa;
  c.grid = GridSpec::square(kMesh);
  c.timegrid = TimeGrid(1.0, kMesh);
  const auto start = Clock::now();
  const ClosedLoopRun run = simulate_closed_loop(c, initial(example, c.grid), CostWeights{});
  FeedbackOutcome out{run.objective, mean_drift(run.T), monotone(run.dev_norm), since(start)};
  cache.emplace(key, out);
  return out;
}

std::vector<double> max_drifts;  // every full run feeds criterion 7

void criterion1() {
  const GridSpec g = GridSpec::square(kMesh);
  const TimeGrid tg(1.0, kMesh);
  const auto start = Clock::now();
  const ControlTrajectory v = ControlTrajectory::zeros(g, tg);
  const Trajectory T = forward_solve(v, initial(1, g), kKappa);
  const ObjectiveBreakdown o = evaluate(T, v, CostWeights{});
  const double secs = since(start);
  max_drifts.push_back(mean_drift(T));
  bool ok = check_rel("J (no control, example 1)", o.j_total, 1.559, 0.01);
  detail("runtime %.1f s (budget 120 s)", secs);
  ok = ok && secs <= 120.0;
  verdict(1, ok, "no-control objective, example 1");
}

void criterion2() {
  const FeedbackOutcome f = feedback(1, 0.75);
  max_drifts.push_back(f.drift);
  bool ok = check_rel("J", f.objective.j_total, 1.150, 0.05);
  ok = check_rel("J_beta", f.objective.j_beta, 0.838, 0.05) && ok;
  ok = check_rel("J_gamma", f.objective.j_gamma, 0.312, 0.05) && ok;
  ok = check_rel("max_vel", f.objective.max_vel, 1.96, 0.10) && ok;
  detail("runtime %.1f s (budget 900 s)", f.seconds);
  ok = ok && f.seconds <= 900.0;
  verdict(2, ok, "feedback tau = 0.75, example 1");
}

void criterion3() {
  bool ok = true;
  const double targets[] = {1.114, 1.622, 3.049};
  for (int ex = 1; ex <= 3; ++ex) {
    OptimizeConfig cfg;
    cfg.grid = GridSpec::square(kMesh);
    cfg.timegrid = TimeGrid(1.0, kMesh);
    try {
      const OptimalControlResult r =
          solve_optimal(cfg, [ex](const GridSpec& g) { return initial(ex, g); });
      max_drifts.push_back(mean_drift(r.T));
      char name[64];
      std::snprintf(name, sizeof name, "J optimal, example %d", ex);
      ok = check_rel(name, r.objective.j_total, targets[ex - 1], 0.05) && ok;
      detail("J_beta %.4f, J_gamma %.4f, max_vel %.3f, J(0) %.4f", r.objective.j_beta,
             r.objective.j_gamma, r.objective.max_vel, r.no_control.j_total);
      detail("iterations %d on the finest level (%d total), %.1f s (budget 2700 s)",
             r.iterations, r.total_iterations, r.wall_time);
      ok = ok && r.objective.j_total < r.no_control.j_total && r.iterations <= 40 &&
           r.wall_time <= 2700.0;
    } catch (const Error& e) {
      detail("example %d optimal solve failed: %s", ex, e.what());
      ok = false;
    }
  }
  const struct {
    int ex;
    double tau, target;
  } fb[] = {{2, 0.75, 1.695}, {3, 1.0, 3.647}, {3, 1.25, 3.599}};
  for (const auto& c : fb) {
    const FeedbackOutcome f = feedback(c.ex, c.tau);
    max_drifts.push_back(f.drift);
    char name[64];
    std::snprintf(name, sizeof name, "J feedback tau %.2f, example %d", c.tau, c.ex);
    ok = check_rel(name, f.objective.j_total, c.target, 0.05) && ok;
  }
  verdict(3, ok, "optimal control and feedback, examples 1-3");
}

void criterion4() {
  double best_tau = -1.0, best_j = INFINITY;
  for (int k = 0; k <= 20; ++k) {
    const double tau = 0.1 * k;
    const FeedbackOutcome f = feedback(3, tau);
    max_drifts.push_back(f.drift);
    detail("tau %.1f: J %.4f", tau, f.objective.j_total);
    if (f.objective.j_total < best_j) {
      best_j = f.objective.j_total;
      best_tau = tau;
    }
  }
  detail("best tau %.1f (J %.4f), required in (1.2, 1.4)", best_tau, best_j);
  verdict(4, best_tau > 1.2 && best_tau < 1.4, "tau sweep, example 3");
}

DerivativeCheckProblem small_problem() {
  const GridSpec g = GridSpec::square(20);
  return make_check_problem(initial(1, g), TimeGrid(1.0, 20), 2024);
}

void criterion5() {
  const auto start = Clock::now();
  const DerivativeCheck c = gradient_check(small_problem(), 5, 7);
  const double secs = since(start);
  for (std::size_t k = 0; k < c.analytic.size(); ++k) {
    detail("direction %zu: adjoint %.10e, FD %.10e, rel %.2e", k, c.analytic[k],
           c.finite_difference[k], c.relative_error[k]);
  }
  detail("runtime %.2f s (budget 60 s)", secs);
  verdict(5, c.max_relative_error <= 1e-3 && secs <= 60.0, "adjoint gradient vs finite differences");
}

void criterion6() {
  const DerivativeCheck c = hessian_check(small_problem(), 5, 8);
  for (std::size_t k = 0; k < c.analytic.size(); ++k) {
    detail("direction %zu: form %.10e, second difference %.10e, rel %.2e", k, c.analytic[k],
           c.finite_difference[k], c.relative_error[k]);
  }
  verdict(6, c.max_relative_error <= 1e-2, "Hessian quadratic form vs second differences");
}

void criterion7() {
  bool ok = true;
  double worst = 0.0;
  for (double d : max_drifts) worst = std::max(worst, d);
  detail("max mean drift over %zu full runs: %.2e of |T0|_inf (bound 1e-8)", max_drifts.size(), worst);
  ok = worst <= 1e-8;

  const GridSpec g = GridSpec::square(kMesh);
  const TimeGrid tg(1.0, kMesh);
  const ScalarField T0 = ScalarField::sample(g, [](double x, double) { return std::cos(std::numbers::pi * x); });
  const Trajectory T = forward_solve(ControlTrajectory::zeros(g, tg), T0, kKappa);
  const double d0 = nodal_norm(deviation(T[0])), dn = nodal_norm(deviation(T.final()));
  const double rate = -std::log(dn * dn / (d0 * d0));
  detail("cos(pi x) decay rate of |DT|^2: %.4f (required >= 0.937)", rate);
  ok = ok && rate >= 2.0 * kKappa * std::numbers::pi * std::numbers::pi * 0.95;

  bool mono = true;
  const struct {
    int ex;
    std::vector<double> taus;
  } configs[] = {{1, {0.25, 0.5, 0.75, 1.0}},
                 {2, {0.25, 0.5, 0.75, 1.0}},
                 {3, {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75}}};
  for (const auto& c : configs) {
    for (double tau : c.taus) {
      const FeedbackOutcome f = feedback(c.ex, tau);
      worst = std::max(worst, f.drift);
      if (!f.monotone) detail("example %d tau %.2f: |DT| not monotone", c.ex, tau);
      mono = mono && f.monotone && f.drift <= 1e-8;
    }
  }
  detail("monotone |DT| in all reference feedback configurations: %s", mono ? "yes" : "no");
  verdict(7, ok && mono, "conservation and decay");
}

void criterion8() {
  bool ok = true;
  auto report = [&](const char* name, const ConvergenceStudy& s, double lo, double hi) {
    std::string line;
    bool good = true;
    for (double r : s.ratios) {
      char buf[32];
      std::snprintf(buf, sizeof buf, " %.3f", r);
      line += buf;
      good = good && r >= lo && r <= hi;
    }
    detail("%s ratios:%s (required in [%.1f, %.1f])", name, line.c_str(), lo, hi);
    ok = ok && good;
  };
  const std::vector<int> ns{16, 32, 64, 128};
  report("Helmholtz", helmholtz_convergence(ns), 3.0, 5.0);
  report("Stokes", stokes_convergence(ns), 3.0, 5.0);
  report("time (heat)", temporal_convergence({10, 20, 40, 80}), 1.7, 2.3);
  report("time (advected)", advected_temporal_convergence({10, 20, 40, 80}), 1.7, 2.3);
  verdict(8, ok, "discretization convergence");
}

void criterion9() {
  FeedbackConfig c;
  c.grid = GridSpec::square(10);
  c.timegrid = TimeGrid(1.0, 10);
  c.stokes_tol = 1e-12;
  c.linear_tol = 1e-13;
  double worst = 0.0;
  for (int ex = 1; ex <= 3; ++ex) {
    c.tau = ex == 3 ? 1.0 : 0.75;
    const ScalarField T = initial(ex, c.grid);
    const double d = oracle::max_abs_difference(feedback_velocity(T, c).velocity,
                                                oracle::feedback_velocity(T, c.tau, c.gamma, c.kappa));
    detail("example %d: max face difference %.2e", ex, d);
    worst = std::max(worst, d);
  }
  verdict(9, worst <= 1e-8, "feedback law vs dense oracle");
}

}  // namespace

int main() {
  set_log_sink([](LogLevel level, const std::string& msg) {
    if (level == LogLevel::kWarning) std::fprintf(stderr, "warning: %s\n", msg.c_str());
  });
  const std::vector<std::function<void()>> criteria{criterion1, criterion2, criterion3,
                                                    criterion4, criterion5, criterion6,
                                                    criterion7, criterion8, criterion9};
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    try {
      criteria[k]();
    } catch (const std::exception& e) {
      verdict(static_cast<int>(k) + 1, false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
