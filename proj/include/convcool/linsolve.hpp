#pragma once

// Solvers for (I - c Lap_N) u = f with homogeneous Neumann data.

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>

#include "convcool/error.hpp"
#include "convcool/grid.hpp"
#include "convcool/spectral.hpp"

namespace convcool {

struct LinearSolveReport {
  int iterations = 0;
  double residual = 0.0;  // final relative residual
  std::string method;
};

enum class HelmholtzMethod { kSpectral, kConjugateGradient };

struct HelmholtzOperator {
  GridSpec grid;
  double c = 0.0;

  HelmholtzOperator(GridSpec g, double c_) : grid(g), c(c_) {
    if (!(c >= 0.0)) throw ConfigError("Helmholtz coefficient must be nonnegative");
  }

  ScalarField apply(const ScalarField& u) const {
    ScalarField out = u;
    if (c != 0.0) out -= laplacian_neumann(u, c);
    return out;
  }
};

inline constexpr double kDefaultLinearTol = 1e-10;

inline int iteration_cap(const GridSpec& g) { return 10 * (g.nx + g.ny); }

namespace detail {

// Preconditioned CG on an operator that is symmetric positive definite in the
// field's inner product. Returns the report; the caller decides whether
// hitting the cap is fatal.
template <class Field, class Apply, class Precond>
LinearSolveReport conjugate_gradient(Apply&& apply, Precond&& precond,
                                     const Field& rhs, Field& x,
                                     double tol, int max_iterations) {
  LinearSolveReport rep;
  rep.method = "pcg";
  const double bnorm = norm_l2(rhs);
  if (bnorm == 0.0) {
    x = Field(rhs.grid());
    return rep;
  }
  Field r = rhs - apply(x);
  Field z = precond(r);
  Field p = z;
  double rz = inner(r, z);
  rep.residual = norm_l2(r) / bnorm;
  while (rep.residual > tol && rep.iterations < max_iterations) {
    const Field ap = apply(p);
    const double alpha = rz / inner(p, ap);
    x.axpy(alpha, p);
    r.axpy(-alpha, ap);
    ++rep.iterations;
    rep.residual = norm_l2(r) / bnorm;
    if (rep.residual <= tol) break;
    z = precond(r);
    const double rz_new = inner(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t k = 0; k < p.size(); ++k) {
      p.values()[k] = z.values()[k] + beta * p.values()[k];
    }
  }
  return rep;
}

}  // namespace detail

// Owns the transform workspace for one grid. Not safe to share across threads;
// give each thread its own instance (helmholtz_solve does this automatically).
class HelmholtzSolver {
 public:
  explicit HelmholtzSolver(GridSpec g)
      : grid_(g),
        fast_(spectral::AxisTransform{spectral::Axis::kNeumannNodes, g.ny}, g.hy(),
              spectral::AxisTransform{spectral::Axis::kNeumannNodes, g.nx}, g.hx()) {}

  const GridSpec& grid() const { return grid_; }

  std::pair<ScalarField, LinearSolveReport> solve(
      const HelmholtzOperator& op, const ScalarField& rhs,
      double tol = kDefaultLinearTol,
      HelmholtzMethod method = HelmholtzMethod::kSpectral) {
    require_same_grid(grid_, op.grid, "helmholtz_solve");
    require_same_grid(grid_, rhs.grid(), "helmholtz_solve");
    if (!(tol > 0.0)) throw ConfigError("solver tolerance must be positive");
    if (op.c == 0.0) return {rhs, LinearSolveReport{0, 0.0, "identity"}};
    if (method == HelmholtzMethod::kConjugateGradient) return solve_cg(op, rhs, tol);

    ScalarField u(grid_);
    fast_.solve(rhs.values(), u.values(), 1.0, op.c);
    LinearSolveReport rep{1, 0.0, "dct"};
    const double bnorm = norm_l2(rhs);
    if (bnorm > 0.0) rep.residual = norm_l2(op.apply(u) - rhs) / bnorm;
    if (rep.residual > tol) {
      throw SolverError("spectral Helmholtz solve missed tolerance: residual " +
                        std::to_string(rep.residual));
    }
    return {std::move(u), rep};
  }

 private:
  std::pair<ScalarField, LinearSolveReport> solve_cg(const HelmholtzOperator& op,
                                                     const ScalarField& rhs,
                                                     double tol) {
    const GridSpec& g = grid_;
    const double cx = op.c / (g.hx() * g.hx()), cy = op.c / (g.hy() * g.hy());
    // The mirror stencil has the same diagonal at every node.
    const double inv_diag = 1.0 / (1.0 + 2.0 * cx + 2.0 * cy);
    auto precond = [&](const ScalarField& r) { return inv_diag * r; };
    ScalarField x(g);
    auto rep = detail::conjugate_gradient([&](const ScalarField& f) { return op.apply(f); },
                                          precond, rhs, x, tol, iteration_cap(g));
    if (rep.residual > tol) {
      throw SolverError("Helmholtz CG did not converge in " +
                        std::to_string(rep.iterations) + " iterations (residual " +
                        std::to_string(rep.residual) + ")");
    }
    return {std::move(x), rep};
  }

  GridSpec grid_;
  spectral::SeparableSolver fast_;
};

namespace detail {

template <class Solver>
Solver& cached_solver(const GridSpec& g) {
  thread_local std::map<std::pair<int, int>, std::unique_ptr<Solver>> cache;
  auto& slot = cache[{g.nx, g.ny}];
  if (!slot) slot = std::make_unique<Solver>(g);
  return *slot;
}

}  // namespace detail

inline std::pair<ScalarField, LinearSolveReport> helmholtz_solve(
    const HelmholtzOperator& op, const ScalarField& rhs,
    double tol = kDefaultLinearTol,
    HelmholtzMethod method = HelmholtzMethod::kSpectral) {
  return detail::cached_solver<HelmholtzSolver>(op.grid).solve(op, rhs, tol, method);
}

}  // namespace convcool
