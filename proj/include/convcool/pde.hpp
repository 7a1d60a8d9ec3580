#pragma once

// Semi-implicit Euler marchers: implicit Neumann diffusion, explicit
// advection. Control entry i acts on the step from t_i to t_{i+1}.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

#include "convcool/error.hpp"
#include "convcool/grid.hpp"
#include "convcool/linsolve.hpp"
#include "convcool/log.hpp"

namespace convcool {

struct Trajectory {
  TimeGrid timegrid;
  std::vector<ScalarField> fields;  // n_t + 1 snapshots

  const GridSpec& grid() const { return fields.front().grid(); }
  int steps() const { return timegrid.steps; }
  const ScalarField& operator[](int i) const { return fields[static_cast<std::size_t>(i)]; }
  ScalarField& operator[](int i) { return fields[static_cast<std::size_t>(i)]; }
  const ScalarField& final() const { return fields.back(); }
};

struct ControlTrajectory {
  TimeGrid timegrid;
  std::vector<StaggeredVelocity> velocities;  // n_t entries

  static ControlTrajectory zeros(GridSpec g, TimeGrid tg) {
    return {tg, std::vector<StaggeredVelocity>(static_cast<std::size_t>(tg.steps),
                                               StaggeredVelocity(g))};
  }

  const GridSpec& grid() const { return velocities.front().grid(); }
  int steps() const { return timegrid.steps; }
  const StaggeredVelocity& operator[](int i) const {
    return velocities[static_cast<std::size_t>(i)];
  }
  StaggeredVelocity& operator[](int i) { return velocities[static_cast<std::size_t>(i)]; }

  ControlTrajectory& axpy(double s, const ControlTrajectory& o) {
    for (std::size_t k = 0; k < velocities.size(); ++k) velocities[k].axpy(s, o.velocities[k]);
    return *this;
  }
  ControlTrajectory& operator*=(double s) {
    for (auto& v : velocities) v *= s;
    return *this;
  }
  friend ControlTrajectory operator+(ControlTrajectory a, const ControlTrajectory& b) {
    return a.axpy(1.0, b);
  }
  friend ControlTrajectory operator-(ControlTrajectory a, const ControlTrajectory& b) {
    return a.axpy(-1.0, b);
  }
  friend ControlTrajectory operator*(double s, ControlTrajectory a) { return a *= s; }
};

// sqrt(dt * sum_i |v_i|^2): discrete L2(0, t_f; L2).
inline double norm_l2(const ControlTrajectory& v) {
  double s = 0.0;
  for (const auto& vi : v.velocities) s += inner(vi, vi);
  return std::sqrt(v.timegrid.dt() * s);
}

inline double inner(const ControlTrajectory& a, const ControlTrajectory& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.velocities.size(); ++k) {
    s += inner(a.velocities[k], b.velocities[k]);
  }
  return a.timegrid.dt() * s;
}

namespace detail {

inline void require_consistent(const ControlTrajectory& v, const GridSpec& g,
                               const TimeGrid& tg, const char* where) {
  if (static_cast<int>(v.velocities.size()) != tg.steps || v.timegrid != tg) {
    throw ShapeError(std::string(where) + ": control has wrong number of time entries");
  }
  if (!v.velocities.empty()) require_same_grid(v.grid(), g, where);
}

inline void require_consistent(const Trajectory& T, const ControlTrajectory& v,
                               const char* where) {
  if (static_cast<int>(T.fields.size()) != T.timegrid.steps + 1) {
    throw ShapeError(std::string(where) + ": trajectory has wrong snapshot count");
  }
  require_consistent(v, T.grid(), T.timegrid, where);
}

inline double max_abs_face(const StaggeredVelocity& v) {
  double m = 0.0;
  for (double x : v.u_values()) m = std::max(m, std::abs(x));
  for (double x : v.w_values()) m = std::max(m, std::abs(x));
  return m;
}

inline double cfl_number(const StaggeredVelocity& v, double dt) {
  const GridSpec& g = v.grid();
  return dt * max_abs_face(v) / std::min(g.hx(), g.hy());
}

inline bool& cfl_warnings_muted() {
  thread_local bool muted = false;
  return muted;
}

// One warning per march, naming the worst step.
inline void warn_cfl(const ControlTrajectory& v) {
  if (cfl_warnings_muted()) return;
  double worst = 0.0;
  int at = 0;
  for (int i = 0; i < v.steps(); ++i) {
    const double c = cfl_number(v[i], v.timegrid.dt());
    if (c > worst) {
      worst = c;
      at = i;
    }
  }
  if (worst > 1.0) {
    std::ostringstream os;
    os << "explicit advection CFL number " << worst << " > 1 (step " << at << ")";
    log(LogLevel::kWarning, os.str());
  }
}

}  // namespace detail

// Silences per-march CFL warnings on this thread for its lifetime, for
// callers that report one aggregate instead.
class MuteCflWarnings {
 public:
  MuteCflWarnings() : previous_(std::exchange(detail::cfl_warnings_muted(), true)) {}
  ~MuteCflWarnings() { detail::cfl_warnings_muted() = previous_; }
  MuteCflWarnings(const MuteCflWarnings&) = delete;
  MuteCflWarnings& operator=(const MuteCflWarnings&) = delete;

 private:
  bool previous_;
};

inline double max_cfl_number(const ControlTrajectory& v) {
  double worst = 0.0;
  for (int i = 0; i < v.steps(); ++i) {
    worst = std::max(worst, detail::cfl_number(v[i], v.timegrid.dt()));
  }
  return worst;
}

// (I - kappa dt Lap) T^{i+1} = T^i - dt advect(v_i, T^i)
inline Trajectory forward_solve(const ControlTrajectory& v, const ScalarField& T0,
                                double kappa, double tol = kDefaultLinearTol) {
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  const TimeGrid tg = v.timegrid;
  detail::require_consistent(v, T0.grid(), tg, "forward_solve");
  const double dt = tg.dt();
  const HelmholtzOperator E(T0.grid(), kappa * dt);
  Trajectory out{tg, {}};
  out.fields.reserve(static_cast<std::size_t>(tg.steps) + 1);
  out.fields.push_back(T0);
  detail::warn_cfl(v);
  for (int i = 0; i < tg.steps; ++i) {
    ScalarField rhs = out.fields.back();
    rhs.axpy(-dt, advect(v[i], out.fields.back()));
    out.fields.push_back(helmholtz_solve(E, rhs, tol).first);
  }
  return out;
}

// Exact discrete adjoint of forward_solve for the cost
//   alpha/2 |D T^n|^2 + beta/2 dt sum_i |D T^i|^2   (nodal norms).
// q^i is the multiplier paired with (v_i, T^i) in the gradient:
//   q^n = alpha G(T^n)
//   (I - kappa dt Lap) q^i = q^{i+1} + dt (advect(v_{i+1}, q^{i+1}) + beta G(T^{i+1}))
// with G = nodal_norm_gradient and v_n = 0. advect is skew, so it is its own
// negative adjoint.
inline Trajectory adjoint_solve(const ControlTrajectory& v, const Trajectory& T,
                                double alpha, double beta, double kappa,
                                double tol = kDefaultLinearTol) {
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  detail::require_consistent(T, v, "adjoint_solve");
  const TimeGrid tg = T.timegrid;
  const int n = tg.steps;
  const double dt = tg.dt();
  const HelmholtzOperator E(T.grid(), kappa * dt);
  Trajectory q{tg, std::vector<ScalarField>(static_cast<std::size_t>(n) + 1)};
  q[n] = alpha * nodal_norm_gradient(T[n]);
  for (int i = n - 1; i >= 0; --i) {
    ScalarField rhs = q[i + 1];
    if (i + 1 < n) rhs.axpy(dt, advect(v[i + 1], q[i + 1]));
    if (beta != 0.0) rhs.axpy(dt * beta, nodal_norm_gradient(T[i + 1]));
    q[i] = helmholtz_solve(E, rhs, tol).first;
  }
  return q;
}

// Gateaux derivative of the state in direction h:
//   z^0 = 0, (I - kappa dt Lap) z^{i+1} = z^i - dt (advect(v_i, z^i) + advect(h_i, T^i))
inline Trajectory linearized_solve(const ControlTrajectory& v, const Trajectory& T,
                                   const ControlTrajectory& h, double kappa,
                                   double tol = kDefaultLinearTol) {
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  detail::require_consistent(T, v, "linearized_solve");
  detail::require_consistent(T, h, "linearized_solve");
  const TimeGrid tg = T.timegrid;
  const double dt = tg.dt();
  const HelmholtzOperator E(T.grid(), kappa * dt);
  Trajectory z{tg, {}};
  z.fields.reserve(static_cast<std::size_t>(tg.steps) + 1);
  z.fields.emplace_back(T.grid());
  for (int i = 0; i < tg.steps; ++i) {
    ScalarField rhs = z.fields.back();
    rhs.axpy(-dt, advect(v[i], z.fields.back()));
    rhs.axpy(-dt, advect(h[i], T[i]));
    z.fields.push_back(helmholtz_solve(E, rhs, tol).first);
  }
  return z;
}

// Doubles space and time resolution: nodes 2k copy coarse node k, odd nodes
// average their neighbours.
inline Trajectory prolong(const Trajectory& T, const GridSpec& fine) {
  const int n = T.steps();
  Trajectory out{TimeGrid(T.timegrid.t_final, 2 * n), {}};
  std::vector<ScalarField> space;
  space.reserve(static_cast<std::size_t>(n) + 1);
  for (const auto& f : T.fields) space.push_back(prolong(f, fine));
  for (int k = 0; k < n; ++k) {
    out.fields.push_back(space[static_cast<std::size_t>(k)]);
    out.fields.push_back(0.5 * (space[static_cast<std::size_t>(k)] +
                                space[static_cast<std::size_t>(k) + 1]));
  }
  out.fields.push_back(space.back());
  return out;
}

// Entry k sits at t_{k+1}. Fine entries halfway between coarse ones average
// them; the first fine entry (before any coarse sample) copies entry 0.
inline ControlTrajectory prolong(const ControlTrajectory& v, const GridSpec& fine) {
  const int n = v.steps();
  ControlTrajectory out{TimeGrid(v.timegrid.t_final, 2 * n), {}};
  std::vector<StaggeredVelocity> space;
  space.reserve(static_cast<std::size_t>(n));
  for (const auto& vi : v.velocities) space.push_back(prolong(vi, fine));
  for (int k = 0; k < 2 * n; ++k) {
    if (k % 2 == 1) {
      out.velocities.push_back(space[static_cast<std::size_t>((k - 1) / 2)]);
    } else if (k == 0) {
      out.velocities.push_back(space.front());
    } else {
      out.velocities.push_back(0.5 * (space[static_cast<std::size_t>(k / 2 - 1)] +
                                      space[static_cast<std::size_t>(k / 2)]));
    }
  }
  return out;
}

}  // namespace convcool
