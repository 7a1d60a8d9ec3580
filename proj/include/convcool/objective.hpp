#pragma once

// Cost functional
//   J(v) = alpha/2 |D T(t_f)|^2 + beta/2 int |D T|^2 dt + gamma/2 int |grad v|^2 dt
// in nodal norms, with the time integrals summed over every snapshot
// (dt sum_{i=0..n}) and every control entry (dt sum_{i<n}), plus its first and
// second directional derivatives.

#include <algorithm>
#include <cmath>

#include "convcool/grid.hpp"
#include "convcool/pde.hpp"

namespace convcool {

struct CostWeights {
  double alpha = 0.0;
  double beta = 1.0;
  double gamma = 0.025;
};

struct ObjectiveBreakdown {
  double j_total = 0.0;
  double j_alpha = 0.0;
  double j_beta = 0.0;
  double j_gamma = 0.0;
  double max_div = 0.0;     // max_i |div v_i|_2 on the MAC cells
  double max_vel = 0.0;     // max_i (|u_i|_2 + |w_i|_2)
  double max_vel_l2 = 0.0;  // max_i |v_i|_2
};

inline ObjectiveBreakdown evaluate(const Trajectory& T, const ControlTrajectory& v,
                                   const CostWeights& w) {
  detail::require_consistent(T, v, "evaluate");
  const int n = T.steps();
  const double dt = T.timegrid.dt();
  ObjectiveBreakdown out;
  if (w.alpha != 0.0) {
    const double d = nodal_norm(deviation(T[n]));
    out.j_alpha = 0.5 * w.alpha * d * d;
  }
  double sum_beta = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double d = nodal_norm(deviation(T[i]));
    sum_beta += d * d;
  }
  out.j_beta = 0.5 * w.beta * dt * sum_beta;
  double sum_gamma = 0.0;
  for (int i = 0; i < n; ++i) {
    sum_gamma += h1_seminorm_sq(v[i]);
    out.max_div = std::max(out.max_div, norm_l2(divergence(v[i])));
    out.max_vel = std::max(out.max_vel, component_norm(v[i]));
    out.max_vel_l2 = std::max(out.max_vel_l2, norm_l2(v[i]));
  }
  out.j_gamma = 0.5 * w.gamma * dt * sum_gamma;
  out.j_total = out.j_alpha + out.j_beta + out.j_gamma;
  return out;
}

// Convenience: forward solve then evaluate.
inline ObjectiveBreakdown evaluate(const ControlTrajectory& v, const ScalarField& T0,
                                   double kappa, const CostWeights& w) {
  return evaluate(forward_solve(v, T0, kappa), v, w);
}

// J'(v) h = dt sum_i [ gamma <grad v_i, grad h_i> - <face_force(q^i, T^i), h_i> ]
// with q from adjoint_solve; exact for the discrete functional.
inline double directional_derivative(const ControlTrajectory& v, const Trajectory& T,
                                     const Trajectory& q, const ControlTrajectory& h,
                                     double gamma) {
  detail::require_consistent(T, v, "directional_derivative");
  detail::require_consistent(T, h, "directional_derivative");
  const int n = T.steps();
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    s += gamma * h1_inner(v[i], h[i]) - inner(face_force(q[i], T[i]), h[i]);
  }
  return T.timegrid.dt() * s;
}

// J''(v)(h, h) = alpha |D z^n|^2 + beta dt sum_{i>=1} |D z^i|^2
//              + 2 dt sum_i <z^i, advect(h_i, q^i)> + gamma dt sum_i |h_i|_{H1}^2
inline double hessian_quadratic_form(const ControlTrajectory& v, const Trajectory& T,
                                     const Trajectory& q, const ControlTrajectory& h,
                                     const CostWeights& w, double kappa) {
  const Trajectory z = linearized_solve(v, T, h, kappa);
  const int n = T.steps();
  const double dt = T.timegrid.dt();
  double s = 0.0;
  if (w.alpha != 0.0) {
    const double d = nodal_norm(deviation(z[n]));
    s += w.alpha * d * d;
  }
  for (int i = 0; i < n; ++i) {
    double term = 2.0 * inner(z[i], advect(h[i], q[i])) +
                  w.gamma * h1_seminorm_sq(h[i]);
    if (w.beta != 0.0) {
      const double d = nodal_norm(deviation(z[i + 1]));
      term += w.beta * d * d;
    }
    s += dt * term;
  }
  return s;
}

}  // namespace convcool
