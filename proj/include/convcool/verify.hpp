#pragma once

// Self-checks shared by the CLI `verify` / `convergence` commands and the test
// suites: adjoint gradient and Hessian against finite differences, and
// manufactured-solution convergence of the Helmholtz, Stokes and time solvers.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "convcool/grid.hpp"
#include "convcool/linsolve.hpp"
#include "convcool/objective.hpp"
#include "convcool/pde.hpp"
#include "convcool/stokes.hpp"

namespace convcool {

// Random smooth divergence-free control: per time entry, the curl of a stream
// function sum a_kl sin(k pi x) sin(l pi y), k, l = 1..3, with a_kl ~ N(0, 1)
// damped by 1 / (k^2 + l^2). Scaled so that |h| = norm.
inline ControlTrajectory random_divergence_free(const GridSpec& g, const TimeGrid& tg,
                                                std::mt19937_64& rng, double norm = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double pi = std::numbers::pi;
  ControlTrajectory h{tg, {}};
  for (int i = 0; i < tg.steps; ++i) {
    double a[3][3];
    for (auto& row : a) {
      for (double& x : row) x = normal(rng);
    }
    h.velocities.push_back(curl_of_nodal(g, [&](int ii, int jj) {
      const double x = ii * g.hx(), y = jj * g.hy();
      double s = 0.0;
      for (int k = 1; k <= 3; ++k) {
        for (int l = 1; l <= 3; ++l) {
          s += a[k - 1][l - 1] / (k * k + l * l) * std::sin(k * pi * x) * std::sin(l * pi * y);
        }
      }
      return s;
    }));
  }
  h *= norm / norm_l2(h);
  return h;
}

struct DerivativeCheckProblem {
  ScalarField T0;
  TimeGrid timegrid;
  double kappa = 0.05;
  CostWeights weights;
  ControlTrajectory v;  // base point
};

struct DerivativeCheck {
  std::vector<double> analytic;
  std::vector<double> finite_difference;
  std::vector<double> relative_error;
  double max_relative_error = 0.0;
};

namespace detail {

inline double cost(const DerivativeCheckProblem& p, const ControlTrajectory& v) {
  return evaluate(v, p.T0, p.kappa, p.weights).j_total;
}

inline void record(DerivativeCheck& out, double analytic, double fd) {
  const double rel = std::abs(analytic - fd) / std::max(std::abs(fd), 1e-300);
  out.analytic.push_back(analytic);
  out.finite_difference.push_back(fd);
  out.relative_error.push_back(rel);
  out.max_relative_error = std::max(out.max_relative_error, rel);
}

}  // namespace detail

// Example-1-type problem with a seeded random divergence-free base control.
inline DerivativeCheckProblem make_check_problem(const ScalarField& T0, const TimeGrid& tg,
                                                 std::uint64_t seed, double base_norm = 0.25) {
  std::mt19937_64 rng(seed);
  DerivativeCheckProblem p{T0, tg, 0.05, CostWeights{}, {}};
  p.v = random_divergence_free(T0.grid(), tg, rng, base_norm);
  return p;
}

// Adjoint directional derivative against central differences of J along
// `directions` random divergence-free h with |h| = 1.
inline DerivativeCheck gradient_check(const DerivativeCheckProblem& p, int directions,
                                      std::uint64_t seed, double eps = 1e-4) {
  std::mt19937_64 rng(seed);
  const Trajectory T = forward_solve(p.v, p.T0, p.kappa);
  const Trajectory q = adjoint_solve(p.v, T, p.weights.alpha, p.weights.beta, p.kappa);
  DerivativeCheck out;
  for (int k = 0; k < directions; ++k) {
    const ControlTrajectory h = random_divergence_free(p.T0.grid(), p.timegrid, rng);
    const double dd = directional_derivative(p.v, T, q, h, p.weights.gamma);
    ControlTrajectory vp = p.v, vm = p.v;
    vp.axpy(eps, h);
    vm.axpy(-eps, h);
    detail::record(out, dd, (detail::cost(p, vp) - detail::cost(p, vm)) / (2.0 * eps));
  }
  return out;
}

// Hessian quadratic form against second differences of J.
inline DerivativeCheck hessian_check(const DerivativeCheckProblem& p, int directions,
                                     std::uint64_t seed, double eps = 1e-3) {
  std::mt19937_64 rng(seed);
  const Trajectory T = forward_solve(p.v, p.T0, p.kappa);
  const Trajectory q = adjoint_solve(p.v, T, p.weights.alpha, p.weights.beta, p.kappa);
  const double j0 = detail::cost(p, p.v);
  DerivativeCheck out;
  for (int k = 0; k < directions; ++k) {
    const ControlTrajectory h = random_divergence_free(p.T0.grid(), p.timegrid, rng);
    const double hq = hessian_quadratic_form(p.v, T, q, h, p.weights, p.kappa);
    ControlTrajectory vp = p.v, vm = p.v;
    vp.axpy(eps, h);
    vm.axpy(-eps, h);
    detail::record(out, hq,
                   (detail::cost(p, vp) - 2.0 * j0 + detail::cost(p, vm)) / (eps * eps));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convergence studies. `ratios[k]` = error[k] / error[k + 1].

struct ConvergenceStudy {
  std::vector<int> resolutions;
  std::vector<double> errors;
  std::vector<double> ratios;
};

namespace detail {
inline void fill_ratios(ConvergenceStudy& s) {
  for (std::size_t k = 0; k + 1 < s.errors.size(); ++k) {
    s.ratios.push_back(s.errors[k] / s.errors[k + 1]);
  }
}
}  // namespace detail

// (I - c Lap) u = f with u = cos(pi x) cos(2 pi y).
inline ConvergenceStudy helmholtz_convergence(const std::vector<int>& ns, double c = 1.0,
                                              HelmholtzMethod method = HelmholtzMethod::kSpectral) {
  const double pi = std::numbers::pi;
  ConvergenceStudy s;
  for (int n : ns) {
    const GridSpec g = GridSpec::square(n);
    auto exact = [&](double x, double y) { return std::cos(pi * x) * std::cos(2 * pi * y); };
    const ScalarField u = ScalarField::sample(g, exact);
    const ScalarField f = (1.0 + 5.0 * pi * pi * c) * u;
    const ScalarField uh = helmholtz_solve(HelmholtzOperator(g, c), f, 1e-12, method).first;
    s.resolutions.push_back(n);
    s.errors.push_back(norm_l2(uh - u));
  }
  detail::fill_ratios(s);
  return s;
}

// Stokes with stream function sin^2(pi x) sin^2(pi y) and p = cos(pi x) cos(pi y).
inline ConvergenceStudy stokes_convergence(const std::vector<int>& ns, double gamma = 1.0) {
  const double pi = std::numbers::pi;
  ConvergenceStudy s;
  auto ue = [&](double x, double y) { return pi * std::pow(std::sin(pi * x), 2) * std::sin(2 * pi * y); };
  auto we = [&](double x, double y) { return -pi * std::sin(2 * pi * x) * std::pow(std::sin(pi * y), 2); };
  auto fu = [&](double x, double y) {
    const double lap = pi * std::sin(2 * pi * y) *
                       (2 * pi * pi * std::cos(2 * pi * x) - 4 * pi * pi * std::pow(std::sin(pi * x), 2));
    return -gamma * lap - pi * std::sin(pi * x) * std::cos(pi * y);
  };
  auto fw = [&](double x, double y) {
    const double lap = -pi * std::sin(2 * pi * x) *
                       (2 * pi * pi * std::cos(2 * pi * y) - 4 * pi * pi * std::pow(std::sin(pi * y), 2));
    return -gamma * lap - pi * std::cos(pi * x) * std::sin(pi * y);
  };
  for (int n : ns) {
    const GridSpec g = GridSpec::square(n);
    const StaggeredVelocity exact = StaggeredVelocity::sample(g, ue, we);
    const StaggeredVelocity force = StaggeredVelocity::sample(g, fu, fw);
    const StokesSolution sol = stokes_solve(force, gamma, 1e-12);
    s.resolutions.push_back(n);
    s.errors.push_back(norm_l2(sol.velocity - exact));
  }
  detail::fill_ratios(s);
  return s;
}

// Heat equation from the discrete eigenmode cos(pi x) cos(pi y); the exact
// space-discrete solution decays like exp(-kappa lambda_h t), so the error is
// purely temporal.
inline ConvergenceStudy temporal_convergence(const std::vector<int>& steps, int n = 32,
                                             double kappa = 0.05, double t_final = 1.0) {
  const double pi = std::numbers::pi;
  const GridSpec g = GridSpec::square(n);
  const ScalarField T0 = ScalarField::sample(
      g, [&](double x, double y) { return std::cos(pi * x) * std::cos(pi * y); });
  const double sx = std::sin(0.5 * pi * g.hx()), sy = std::sin(0.5 * pi * g.hy());
  const double lambda = 4.0 * sx * sx / (g.hx() * g.hx()) + 4.0 * sy * sy / (g.hy() * g.hy());
  const ScalarField exact = std::exp(-kappa * lambda * t_final) * T0;
  ConvergenceStudy s;
  for (int nt : steps) {
    const TimeGrid tg(t_final, nt);
    const Trajectory T = forward_solve(ControlTrajectory::zeros(g, tg), T0, kappa);
    s.resolutions.push_back(nt);
    s.errors.push_back(norm_l2(T.final() - exact));
  }
  detail::fill_ratios(s);
  return s;
}

// Forward marcher with a fixed divergence-free velocity against a run with
// `reference_factor` times more steps.
inline ConvergenceStudy advected_temporal_convergence(const std::vector<int>& steps, int n = 32,
                                                      int reference_factor = 32,
                                                      double kappa = 0.05) {
  const double pi = std::numbers::pi;
  const GridSpec g = GridSpec::square(n);
  const ScalarField T0 = ScalarField::sample(g, [](double x, double y) {
    return std::exp(-20.0 * ((x - 0.3) * (x - 0.3) + (y - 0.4) * (y - 0.4)));
  });
  const StaggeredVelocity v = curl_of_nodal(g, [&](int i, int j) {
    const double sx = std::sin(pi * i * g.hx()), sy = std::sin(pi * j * g.hy());
    return 0.2 * sx * sx * sy * sy;
  });
  auto run = [&](int nt) {
    const TimeGrid tg(1.0, nt);
    ControlTrajectory c{tg, std::vector<StaggeredVelocity>(static_cast<std::size_t>(nt), v)};
    return forward_solve(c, T0, kappa).final();
  };
  const ScalarField ref = run(steps.back() * reference_factor);
  ConvergenceStudy s;
  for (int nt : steps) {
    s.resolutions.push_back(nt);
    s.errors.push_back(norm_l2(run(nt) - ref));
  }
  detail::fill_ratios(s);
  return s;
}

}  // namespace convcool
