#pragma once

// Stationary Stokes on the MAC grid:
//   -gamma Lap v + grad p = f,  div v = 0,  v = 0 on the walls,  mean(p) = 0.
//
// Uzawa conjugate gradients on the pressure Schur complement
//   S = div (-gamma Lap)^{-1} grad^T,
// where every application of S costs one fast velocity solve per component.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "convcool/error.hpp"
#include "convcool/grid.hpp"
#include "convcool/linsolve.hpp"
#include "convcool/spectral.hpp"

namespace convcool {

inline constexpr double kDefaultStokesTol = 1e-8;

struct StokesSolution {
  StaggeredVelocity velocity;
  CellField pressure;
  LinearSolveReport report;
};

class StokesSolver {
 public:
  explicit StokesSolver(GridSpec g)
      : grid_(g),
        u_solver_(spectral::AxisTransform{spectral::Axis::kReflectCenters, g.ny}, g.hy(),
                  spectral::AxisTransform{spectral::Axis::kDirichletNodes, g.nx}, g.hx()),
        w_solver_(spectral::AxisTransform{spectral::Axis::kDirichletNodes, g.ny}, g.hy(),
                  spectral::AxisTransform{spectral::Axis::kReflectCenters, g.nx}, g.hx()),
        ubuf_(static_cast<std::size_t>(g.nx - 1) * g.ny),
        wbuf_(static_cast<std::size_t>(g.nx) * (g.ny - 1)) {}

  const GridSpec& grid() const { return grid_; }

  // Solves -coeff * vector_laplacian(v) = f on interior faces.
  StaggeredVelocity velocity_solve(const StaggeredVelocity& f, double coeff) {
    const GridSpec& g = grid_;
    StaggeredVelocity v(g);
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 1; i < g.nx; ++i) ubuf_[static_cast<std::size_t>(j) * (g.nx - 1) + i - 1] = f.u(i, j);
    }
    u_solver_.solve(ubuf_, ubuf_, 0.0, coeff);
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 1; i < g.nx; ++i) v.u(i, j) = ubuf_[static_cast<std::size_t>(j) * (g.nx - 1) + i - 1];
    }
    for (int j = 1; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) wbuf_[static_cast<std::size_t>(j - 1) * g.nx + i] = f.w(i, j);
    }
    w_solver_.solve(wbuf_, wbuf_, 0.0, coeff);
    for (int j = 1; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) v.w(i, j) = wbuf_[static_cast<std::size_t>(j - 1) * g.nx + i];
    }
    return v;
  }

  StokesSolution solve(const StaggeredVelocity& force, double gamma,
                       double tol = kDefaultStokesTol,
                       const std::optional<CellField>& pressure_guess = std::nullopt) {
    require_same_grid(grid_, force.grid(), "stokes_solve");
    if (!(gamma > 0.0)) throw ConfigError("Stokes solve requires gamma > 0");
    if (!(tol > 0.0)) throw ConfigError("solver tolerance must be positive");

    const GridSpec& g = grid_;
    const double fnorm = norm_l2(force);
    // Absolute divergence target, floored at the rounding level of computing
    // the divergence of a velocity of size |f| / gamma.
    const double roundoff =
        100.0 * std::numeric_limits<double>::epsilon() * (1.0 + fnorm / gamma) /
        std::min(g.hx(), g.hy());
    const double div_target = std::max(tol, roundoff);
    const int cap = iteration_cap(g);

    CellField p = pressure_guess ? deviation(*pressure_guess) : CellField(g);
    LinearSolveReport rep;
    rep.method = "uzawa-cg";

    StaggeredVelocity v(g);
    double div_norm = 0.0;
    // Outer restarts recompute v from p directly so the reported residuals are
    // true residuals rather than recurrence values.
    for (int restart = 0; restart < 4; ++restart) {
      v = velocity_solve(force - gradient(p), gamma);
      CellField r = -1.0 * divergence(v);
      div_norm = norm_l2(r);
      if (div_norm <= div_target || rep.iterations >= cap) break;

      CellField d = r;
      double rr = inner(r, r);
      while (rep.iterations < cap) {
        const StaggeredVelocity y = velocity_solve(gradient(d), gamma);
        const CellField sd = -1.0 * divergence(y);
        const double alpha = rr / inner(d, sd);
        p.axpy(alpha, d);
        v.axpy(-alpha, y);
        r.axpy(-alpha, sd);
        ++rep.iterations;
        const double m = mean(p);
        for (double& x : p.values()) x -= m;
        const double rr_new = inner(r, r);
        if (std::sqrt(rr_new) <= 0.5 * div_target) break;
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t k = 0; k < d.size(); ++k) {
          d.values()[k] = r.values()[k] + beta * d.values()[k];
        }
      }
    }
    v = velocity_solve(force - gradient(p), gamma);
    div_norm = norm_l2(divergence(v));
    rep.residual = div_norm;
    if (div_norm > div_target) {
      throw SolverError("Stokes Uzawa-CG did not converge in " +
                        std::to_string(rep.iterations) +
                        " iterations (divergence " + std::to_string(div_norm) + ")");
    }
    return {std::move(v), std::move(p), rep};
  }

 private:
  GridSpec grid_;
  spectral::SeparableSolver u_solver_;
  spectral::SeparableSolver w_solver_;
  std::vector<double> ubuf_;
  std::vector<double> wbuf_;
};

inline StokesSolution stokes_solve(const StaggeredVelocity& force, double gamma,
                                   double tol = kDefaultStokesTol) {
  return detail::cached_solver<StokesSolver>(force.grid()).solve(force, gamma, tol);
}

// A^{-1} P(force): velocity part of the unit-viscosity Stokes solve.
inline StaggeredVelocity apply_inverse_stokes(const StaggeredVelocity& force,
                                              double tol = kDefaultStokesTol) {
  return stokes_solve(force, 1.0, tol).velocity;
}

// -gamma Lap v + grad p - f on interior faces.
inline StaggeredVelocity momentum_residual(const StokesSolution& s,
                                           const StaggeredVelocity& force,
                                           double gamma) {
  StaggeredVelocity r = -gamma * vector_laplacian(s.velocity);
  r += gradient(s.pressure);
  r -= force;
  r.zero_boundary_normal();
  return r;
}

}  // namespace convcool
