#pragma once

// Staggered (MAC) grid on the unit square: nodal scalars, cell-centered
// pressure, face-centered velocity components, and the discrete operators
// shared by every solver.
//
// Layout conventions
//   ScalarField        value(i, j) at (i hx, j hy), i = 0..nx, j = 0..ny,
//                      stored j-major (x varies fastest).
//   CellField          value(i, j) at ((i+1/2)hx, (j+1/2)hy).
//   StaggeredVelocity  u(i, j) at (i hx, (j+1/2)hy), i = 0..nx, j = 0..ny-1
//                      w(i, j) at ((i+1/2)hx, j hy), i = 0..nx-1, j = 0..ny
//                      Boundary-normal faces (u at i = 0, nx; w at j = 0, ny)
//                      are held at exactly zero.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "convcool/error.hpp"

namespace convcool {

struct GridSpec {
  int nx = 0;
  int ny = 0;

  GridSpec() = default;
  GridSpec(int nx_, int ny_) : nx(nx_), ny(ny_) {
    if (nx < 2 || ny < 2) {
      throw ConfigError("grid needs at least 2 cells per direction, got " +
                        std::to_string(nx) + "x" + std::to_string(ny));
    }
  }
  static GridSpec square(int n) { return {n, n}; }

  double hx() const { return 1.0 / nx; }
  double hy() const { return 1.0 / ny; }
  double cell_area() const { return hx() * hy(); }
  std::size_t cells() const { return static_cast<std::size_t>(nx) * ny; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct TimeGrid {
  double t_final = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double t_final_, int steps_) : t_final(t_final_), steps(steps_) {
    if (steps < 1) throw ConfigError("time grid needs at least one step");
    if (!(t_final > 0.0)) throw ConfigError("final time must be positive");
  }

  double dt() const { return t_final / steps; }
  double time(int node) const { return node * dt(); }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

inline void require_same_grid(const GridSpec& a, const GridSpec& b,
                              const char* where) {
  if (a != b) {
    throw ShapeError(std::string(where) + ": grid mismatch (" +
                     std::to_string(a.nx) + "x" + std::to_string(a.ny) +
                     " vs " + std::to_string(b.nx) + "x" +
                     std::to_string(b.ny) + ")");
  }
}

enum class Location { kNodes, kCells };

// Scalar grid function. Nodes: (nx+1)(ny+1) values at (i hx, j hy), walls
// included. Cells: nx*ny values at ((i+1/2)hx, (j+1/2)hy). Stored j-major.
template <Location L>
class GridField {
 public:
  static constexpr Location location = L;

  GridField() = default;
  explicit GridField(GridSpec grid, double fill = 0.0)
      : grid_(grid), values_(count(grid), fill) {}
  GridField(GridSpec grid, std::vector<double> values)
      : grid_(grid), values_(std::move(values)) {
    if (values_.size() != count(grid_)) {
      throw ShapeError("field value count does not match grid");
    }
  }

  static std::size_t count(const GridSpec& g) {
    return static_cast<std::size_t>(width(g)) * height(g);
  }
  static int width(const GridSpec& g) { return L == Location::kNodes ? g.nx + 1 : g.nx; }
  static int height(const GridSpec& g) { return L == Location::kNodes ? g.ny + 1 : g.ny; }
  static double offset() { return L == Location::kNodes ? 0.0 : 0.5; }

  template <class F>
  static GridField sample(GridSpec grid, F&& f) {
    GridField out(grid);
    for (int j = 0; j < height(grid); ++j) {
      const double y = (j + offset()) * grid.hy();
      for (int i = 0; i < width(grid); ++i) {
        out(i, j) = f((i + offset()) * grid.hx(), y);
      }
    }
    return out;
  }

  const GridSpec& grid() const { return grid_; }
  int nx() const { return grid_.nx; }
  int ny() const { return grid_.ny; }
  int width() const { return width(grid_); }
  int height() const { return height(grid_); }

  double& operator()(int i, int j) { return values_[index(i, j)]; }
  double operator()(int i, int j) const { return values_[index(i, j)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  GridField& operator+=(const GridField& o) { return axpy(1.0, o); }
  GridField& operator-=(const GridField& o) { return axpy(-1.0, o); }
  GridField& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }
  // this += s * o
  GridField& axpy(double s, const GridField& o) {
    require_same_grid(grid_, o.grid_, "field axpy");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += s * o.values_[k];
    return *this;
  }

  friend GridField operator+(GridField a, const GridField& b) { return a += b; }
  friend GridField operator-(GridField a, const GridField& b) { return a -= b; }
  friend GridField operator*(double s, GridField a) { return a *= s; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return std::isfinite(v); });
  }

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * width(grid_) + i;
  }

  GridSpec grid_;
  std::vector<double> values_;
};

// Temperature, adjoint and every other transported scalar live on the nodes.
using ScalarField = GridField<Location::kNodes>;
// Pressure and discrete divergence live on the cells.
using CellField = GridField<Location::kCells>;

class StaggeredVelocity {
 public:
  StaggeredVelocity() = default;
  explicit StaggeredVelocity(GridSpec grid)
      : grid_(grid),
        u_(static_cast<std::size_t>(grid.nx + 1) * grid.ny, 0.0),
        w_(static_cast<std::size_t>(grid.nx) * (grid.ny + 1), 0.0) {}

  // Samples (fu, fw) at the face locations; boundary-normal faces stay 0.
  template <class FU, class FW>
  static StaggeredVelocity sample(GridSpec grid, FU&& fu, FW&& fw) {
    StaggeredVelocity out(grid);
    const double hx = grid.hx(), hy = grid.hy();
    for (int j = 0; j < grid.ny; ++j) {
      for (int i = 1; i < grid.nx; ++i) out.u(i, j) = fu(i * hx, (j + 0.5) * hy);
    }
    for (int j = 1; j < grid.ny; ++j) {
      for (int i = 0; i < grid.nx; ++i) out.w(i, j) = fw((i + 0.5) * hx, j * hy);
    }
    return out;
  }

  const GridSpec& grid() const { return grid_; }

  double& u(int i, int j) { return u_[uindex(i, j)]; }
  double u(int i, int j) const { return u_[uindex(i, j)]; }
  double& w(int i, int j) { return w_[windex(i, j)]; }
  double w(int i, int j) const { return w_[windex(i, j)]; }

  std::span<double> u_values() { return u_; }
  std::span<const double> u_values() const { return u_; }
  std::span<double> w_values() { return w_; }
  std::span<const double> w_values() const { return w_; }
  std::size_t size() const { return u_.size() + w_.size(); }

  StaggeredVelocity& operator+=(const StaggeredVelocity& o) {
    return axpy(1.0, o);
  }
  StaggeredVelocity& operator-=(const StaggeredVelocity& o) {
    return axpy(-1.0, o);
  }
  StaggeredVelocity& operator*=(double s) {
    for (double& v : u_) v *= s;
    for (double& v : w_) v *= s;
    return *this;
  }
  StaggeredVelocity& axpy(double s, const StaggeredVelocity& o) {
    require_same_grid(grid_, o.grid_, "StaggeredVelocity axpy");
    for (std::size_t k = 0; k < u_.size(); ++k) u_[k] += s * o.u_[k];
    for (std::size_t k = 0; k < w_.size(); ++k) w_[k] += s * o.w_[k];
    return *this;
  }
  friend StaggeredVelocity operator+(StaggeredVelocity a,
                                     const StaggeredVelocity& b) {
    return a += b;
  }
  friend StaggeredVelocity operator-(StaggeredVelocity a,
                                     const StaggeredVelocity& b) {
    return a -= b;
  }
  friend StaggeredVelocity operator*(double s, StaggeredVelocity a) {
    return a *= s;
  }

  void zero_boundary_normal() {
    for (int j = 0; j < grid_.ny; ++j) u(0, j) = u(grid_.nx, j) = 0.0;
    for (int i = 0; i < grid_.nx; ++i) w(i, 0) = w(i, grid_.ny) = 0.0;
  }

  bool boundary_normal_is_zero() const {
    for (int j = 0; j < grid_.ny; ++j) {
      if (u(0, j) != 0.0 || u(grid_.nx, j) != 0.0) return false;
    }
    for (int i = 0; i < grid_.nx; ++i) {
      if (w(i, 0) != 0.0 || w(i, grid_.ny) != 0.0) return false;
    }
    return true;
  }

  bool all_finite() const {
    auto fin = [](double v) { return std::isfinite(v); };
    return std::all_of(u_.begin(), u_.end(), fin) &&
           std::all_of(w_.begin(), w_.end(), fin);
  }

 private:
  std::size_t uindex(int i, int j) const {
    return static_cast<std::size_t>(j) * (grid_.nx + 1) + i;
  }
  std::size_t windex(int i, int j) const {
    return static_cast<std::size_t>(j) * grid_.nx + i;
  }

  GridSpec grid_;
  std::vector<double> u_;
  std::vector<double> w_;
};

// ---------------------------------------------------------------------------
// Inner products and norms.
//
// Nodal scalars use the trapezoid weights w_i w_j hx hy (w = 1/2 on walls),
// under which the Neumann Laplacian is symmetric and the advection operator is
// skew. Cells and faces use the plain area weight.

inline double node_weight(const GridSpec& g, int i, int j) {
  const double wx = (i == 0 || i == g.nx) ? 0.5 : 1.0;
  const double wy = (j == 0 || j == g.ny) ? 0.5 : 1.0;
  return wx * wy;
}

inline double inner(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid(), b.grid(), "inner");
  const GridSpec& g = a.grid();
  double s = 0.0;
  for (int j = 0; j <= g.ny; ++j) {
    double row = 0.0;
    for (int i = 1; i < g.nx; ++i) row += a(i, j) * b(i, j);
    row += 0.5 * (a(0, j) * b(0, j) + a(g.nx, j) * b(g.nx, j));
    s += (j == 0 || j == g.ny) ? 0.5 * row : row;
  }
  return g.cell_area() * s;
}

inline double inner(const CellField& a, const CellField& b) {
  require_same_grid(a.grid(), b.grid(), "inner");
  const auto av = a.values();
  const auto bv = b.values();
  return a.grid().cell_area() * std::inner_product(av.begin(), av.end(), bv.begin(), 0.0);
}

inline double inner(const StaggeredVelocity& a, const StaggeredVelocity& b) {
  require_same_grid(a.grid(), b.grid(), "inner");
  double s = 0.0;
  auto au = a.u_values(), bu = b.u_values(), aw = a.w_values(),
       bw = b.w_values();
  s = std::inner_product(au.begin(), au.end(), bu.begin(), s);
  s = std::inner_product(aw.begin(), aw.end(), bw.begin(), s);
  return a.grid().cell_area() * s;
}

template <class Field>
double norm_l2(const Field& f) {
  return std::sqrt(inner(f, f));
}

// (hx hy sum f^2)^{1/2} over all nodes, walls at full weight. This is the
// norm the cost functional and the reported deviation norms use.
inline double nodal_norm(const ScalarField& f) {
  const auto v = f.values();
  return std::sqrt(f.grid().cell_area() * std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

// |u|_2 + |w|_2, the velocity size reported in result tables.
inline double component_norm(const StaggeredVelocity& v) {
  const auto u = v.u_values();
  const auto w = v.w_values();
  const double a = v.grid().cell_area();
  return std::sqrt(a * std::inner_product(u.begin(), u.end(), u.begin(), 0.0)) +
         std::sqrt(a * std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
}

template <Location L>
double norm_inf(const GridField<L>& f) {
  double m = 0.0;
  for (double x : f.values()) m = std::max(m, std::abs(x));
  return m;
}

// ---------------------------------------------------------------------------
// Scalar operators

inline double mean(const ScalarField& f) { return inner(f, ScalarField(f.grid(), 1.0)); }

inline double mean(const CellField& f) {
  const auto v = f.values();
  return f.grid().cell_area() * std::accumulate(v.begin(), v.end(), 0.0);
}

template <Location L>
GridField<L> deviation(const GridField<L>& f) {
  GridField<L> out = f;
  const double m = mean(f);
  for (double& x : out.values()) x -= m;
  return out;
}

// Representer, in the weighted inner product, of the derivative of
// f -> nodal_norm(deviation(f))^2 / 2.
inline ScalarField nodal_norm_gradient(const ScalarField& f) {
  const GridSpec& g = f.grid();
  ScalarField d = deviation(f);
  for (int j = 0; j <= g.ny; ++j) {
    for (int i = 0; i <= g.nx; ++i) d(i, j) /= node_weight(g, i, j);
  }
  return deviation(d);
}

// coeff * Laplacian with homogeneous Neumann data (mirror ghost nodes).
inline ScalarField laplacian_neumann(const ScalarField& f, double coeff = 1.0) {
  const GridSpec& g = f.grid();
  const double cx = coeff / (g.hx() * g.hx());
  const double cy = coeff / (g.hy() * g.hy());
  ScalarField out(g);
  for (int j = 0; j <= g.ny; ++j) {
    const int s = j > 0 ? j - 1 : 1;
    const int n = j < g.ny ? j + 1 : g.ny - 1;
    for (int i = 0; i <= g.nx; ++i) {
      const int w = i > 0 ? i - 1 : 1;
      const int e = i < g.nx ? i + 1 : g.nx - 1;
      const double c = f(i, j);
      out(i, j) = cx * (f(w, j) - 2.0 * c + f(e, j)) + cy * (f(i, s) - 2.0 * c + f(i, n));
    }
  }
  return out;
}

inline CellField divergence(const StaggeredVelocity& v) {
  const GridSpec& g = v.grid();
  CellField out(g);
  const double ix = 1.0 / g.hx(), iy = 1.0 / g.hy();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      out(i, j) = (v.u(i + 1, j) - v.u(i, j)) * ix +
                  (v.w(i, j + 1) - v.w(i, j)) * iy;
    }
  }
  return out;
}

// Face gradient of a cell field, zero on boundary-normal faces. Equals minus
// the transpose of `divergence` in the area-weighted inner products.
inline StaggeredVelocity gradient(const CellField& p) {
  const GridSpec& g = p.grid();
  StaggeredVelocity out(g);
  const double ix = 1.0 / g.hx(), iy = 1.0 / g.hy();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 1; i < g.nx; ++i) out.u(i, j) = (p(i, j) - p(i - 1, j)) * ix;
  }
  for (int j = 1; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) out.w(i, j) = (p(i, j) - p(i, j - 1)) * iy;
  }
  return out;
}

// Volume fluxes through the faces of the node-centered dual cells (clipped to
// the domain at the walls). The normal velocity on a dual face is the mean of
// the four surrounding MAC values, with tangential components mirrored evenly
// across the wall. Each dual cell's net outflow is then a fixed combination of
// the adjacent MAC cell divergences, so it vanishes for discretely
// divergence-free v.
struct DualFlux {
  GridSpec grid;
  std::vector<double> x;  // edge (i,j)-(i+1,j): i = 0..nx-1, j = 0..ny
  std::vector<double> y;  // edge (i,j)-(i,j+1): i = 0..nx,   j = 0..ny-1

  double fx(int i, int j) const { return x[static_cast<std::size_t>(j) * grid.nx + i]; }
  double fy(int i, int j) const { return y[static_cast<std::size_t>(j) * (grid.nx + 1) + i]; }
};

inline DualFlux dual_flux(const StaggeredVelocity& v) {
  const GridSpec& g = v.grid();
  DualFlux f{g, std::vector<double>(static_cast<std::size_t>(g.nx) * (g.ny + 1)),
             std::vector<double>(static_cast<std::size_t>(g.nx + 1) * g.ny)};
  for (int j = 0; j <= g.ny; ++j) {
    const int lo = std::max(j - 1, 0), hi = std::min(j, g.ny - 1);
    const double len = 0.25 * g.hy() * ((j == 0 || j == g.ny) ? 0.5 : 1.0);
    for (int i = 0; i < g.nx; ++i) {
      f.x[static_cast<std::size_t>(j) * g.nx + i] =
          len * (v.u(i, lo) + v.u(i, hi) + v.u(i + 1, lo) + v.u(i + 1, hi));
    }
  }
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i <= g.nx; ++i) {
      const int lo = std::max(i - 1, 0), hi = std::min(i, g.nx - 1);
      const double len = 0.25 * g.hx() * ((i == 0 || i == g.nx) ? 0.5 : 1.0);
      f.y[static_cast<std::size_t>(j) * (g.nx + 1) + i] =
          len * (v.w(lo, j) + v.w(hi, j) + v.w(lo, j + 1) + v.w(hi, j + 1));
    }
  }
  return f;
}

// Net dual-cell outflow per unit weighted area.
inline ScalarField dual_divergence(const StaggeredVelocity& v) {
  const GridSpec& g = v.grid();
  const DualFlux f = dual_flux(v);
  ScalarField out(g);
  for (int j = 0; j <= g.ny; ++j) {
    for (int i = 0; i <= g.nx; ++i) {
      double s = 0.0;
      if (i < g.nx) s += f.fx(i, j);
      if (i > 0) s -= f.fx(i - 1, j);
      if (j < g.ny) s += f.fy(i, j);
      if (j > 0) s -= f.fy(i, j - 1);
      out(i, j) = s / (g.cell_area() * node_weight(g, i, j));
    }
  }
  return out;
}

// v . grad(f) in skew-symmetric flux form: half the outflow through each dual
// face times the neighbor value. inner(advect(v, f), g) == -inner(f,
// advect(v, g)) for every v; constants are annihilated and the weighted mean
// is conserved whenever v is discretely divergence-free.
inline ScalarField advect(const StaggeredVelocity& v, const ScalarField& f) {
  const GridSpec& g = f.grid();
  require_same_grid(g, v.grid(), "advect");
  const DualFlux fl = dual_flux(v);
  ScalarField out(g);
  for (int j = 0; j <= g.ny; ++j) {
    for (int i = 0; i <= g.nx; ++i) {
      double s = 0.0;
      if (i < g.nx) s += fl.fx(i, j) * f(i + 1, j);
      if (i > 0) s -= fl.fx(i - 1, j) * f(i - 1, j);
      if (j < g.ny) s += fl.fy(i, j) * f(i, j + 1);
      if (j > 0) s -= fl.fy(i, j - 1) * f(i, j - 1);
      out(i, j) = 0.5 * s / (g.cell_area() * node_weight(g, i, j));
    }
  }
  return out;
}

// Face body force with inner(face_force(q, T), h) == inner(q, advect(h, T))
// for every face field h. Discretizes (q grad T - T grad q) / 2, which differs
// from q grad T by a gradient.
inline StaggeredVelocity face_force(const ScalarField& q, const ScalarField& T) {
  const GridSpec& g = T.grid();
  require_same_grid(g, q.grid(), "face_force");
  StaggeredVelocity out(g);
  const double scale = 0.125 / g.cell_area();
  for (int j = 0; j <= g.ny; ++j) {
    const int lo = std::max(j - 1, 0), hi = std::min(j, g.ny - 1);
    const double len = g.hy() * ((j == 0 || j == g.ny) ? 0.5 : 1.0);
    for (int i = 0; i < g.nx; ++i) {
      const double s = scale * len * (q(i, j) * T(i + 1, j) - q(i + 1, j) * T(i, j));
      out.u(i, lo) += s;
      out.u(i, hi) += s;
      out.u(i + 1, lo) += s;
      out.u(i + 1, hi) += s;
    }
  }
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i <= g.nx; ++i) {
      const int lo = std::max(i - 1, 0), hi = std::min(i, g.nx - 1);
      const double len = g.hx() * ((i == 0 || i == g.nx) ? 0.5 : 1.0);
      const double s = scale * len * (q(i, j) * T(i, j + 1) - q(i, j + 1) * T(i, j));
      out.w(lo, j) += s;
      out.w(hi, j) += s;
      out.w(lo, j + 1) += s;
      out.w(hi, j + 1) += s;
    }
  }
  out.zero_boundary_normal();
  return out;
}

// ---------------------------------------------------------------------------
// Velocity operators with no-slip walls. Tangential components use reflection
// ghosts (ghost = -interior) so the wall value interpolates to zero.

inline StaggeredVelocity vector_laplacian(const StaggeredVelocity& v) {
  const GridSpec& g = v.grid();
  const double cx = 1.0 / (g.hx() * g.hx());
  const double cy = 1.0 / (g.hy() * g.hy());
  StaggeredVelocity out(g);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 1; i < g.nx; ++i) {
      const double c = v.u(i, j);
      const double south = j > 0 ? v.u(i, j - 1) : -c;
      const double north = j + 1 < g.ny ? v.u(i, j + 1) : -c;
      out.u(i, j) = cx * (v.u(i - 1, j) - 2.0 * c + v.u(i + 1, j)) +
                    cy * (south - 2.0 * c + north);
    }
  }
  for (int j = 1; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double c = v.w(i, j);
      const double west = i > 0 ? v.w(i - 1, j) : -c;
      const double east = i + 1 < g.nx ? v.w(i + 1, j) : -c;
      out.w(i, j) = cx * (west - 2.0 * c + east) +
                    cy * (v.w(i, j - 1) - 2.0 * c + v.w(i, j + 1));
    }
  }
  return out;
}

// |v|_{H1}^2 = inner(-vector_laplacian(v), v), written as a sum of squared
// differences so it is nonnegative to round-off.
inline double h1_seminorm_sq(const StaggeredVelocity& v) {
  const GridSpec& g = v.grid();
  const double hx = g.hx(), hy = g.hy();
  double s = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double d = (v.u(i + 1, j) - v.u(i, j)) / hx;
      s += d * d;
    }
  }
  for (int j = 0; j + 1 < g.ny; ++j) {
    for (int i = 1; i < g.nx; ++i) {
      const double d = (v.u(i, j + 1) - v.u(i, j)) / hy;
      s += d * d;
    }
  }
  for (int i = 1; i < g.nx; ++i) {
    const double a = v.u(i, 0), b = v.u(i, g.ny - 1);
    s += 2.0 * (a * a + b * b) / (hy * hy);
  }
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double d = (v.w(i, j + 1) - v.w(i, j)) / hy;
      s += d * d;
    }
  }
  for (int j = 1; j < g.ny; ++j) {
    for (int i = 0; i + 1 < g.nx; ++i) {
      const double d = (v.w(i + 1, j) - v.w(i, j)) / hx;
      s += d * d;
    }
    const double a = v.w(0, j), b = v.w(g.nx - 1, j);
    s += 2.0 * (a * a + b * b) / (hx * hx);
  }
  return g.cell_area() * s;
}

inline double h1_inner(const StaggeredVelocity& a, const StaggeredVelocity& b) {
  return -inner(vector_laplacian(a), b);
}

// Discrete curl of a nodal stream function psi(i, j) at (i hx, j hy),
// i = 0..nx, j = 0..ny: u = d psi/dy, w = -d psi/dx. The result is exactly
// divergence-free; psi must vanish on the boundary for no-penetration.
template <class Psi>
StaggeredVelocity curl_of_nodal(GridSpec g, Psi&& psi) {
  StaggeredVelocity out(g);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 1; i < g.nx; ++i) {
      out.u(i, j) = (psi(i, j + 1) - psi(i, j)) / g.hy();
    }
  }
  for (int j = 1; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      out.w(i, j) = -(psi(i + 1, j) - psi(i, j)) / g.hx();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prolongation by a factor of two in space. Linear interpolation per
// direction on each quantity's native locations; tangential velocity
// directions use the no-slip reflection ghost.

namespace detail {

// Interpolates a cell-centered 1D line (n values at (k+1/2)H) to 2n fine
// centers, with the reflection ghost (-value) beyond each end.
inline void refine_centers(std::span<const double> in, std::span<double> out) {
  const std::size_t n = in.size();
  auto at = [&](std::ptrdiff_t k) {
    if (k < 0) return -in[0];
    if (k >= static_cast<std::ptrdiff_t>(n)) return -in[n - 1];
    return in[static_cast<std::size_t>(k)];
  };
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<std::ptrdiff_t>(k);
    out[2 * k] = 0.75 * in[k] + 0.25 * at(kk - 1);
    out[2 * k + 1] = 0.75 * in[k] + 0.25 * at(kk + 1);
  }
}

// Node-located line (n+1 values at kH) to 2n+1 fine nodes.
inline void refine_nodes(std::span<const double> in, std::span<double> out) {
  const std::size_t n = in.size() - 1;
  for (std::size_t k = 0; k < n; ++k) {
    out[2 * k] = in[k];
    out[2 * k + 1] = 0.5 * (in[k] + in[k + 1]);
  }
  out[2 * n] = in[n];
}

}  // namespace detail

inline GridSpec refined(const GridSpec& g) { return {2 * g.nx, 2 * g.ny}; }

inline void require_doubling(const GridSpec& coarse, const GridSpec& fine) {
  if (fine.nx != 2 * coarse.nx || fine.ny != 2 * coarse.ny) {
    throw ShapeError("prolongation requires the fine grid to double the coarse grid");
  }
}

// Nodal scalars refine exactly for bilinear data.
inline ScalarField prolong(const ScalarField& f, const GridSpec& fine) {
  const GridSpec& g = f.grid();
  require_doubling(g, fine);
  std::vector<double> tmp(static_cast<std::size_t>(fine.nx + 1) * (g.ny + 1));
  for (int j = 0; j <= g.ny; ++j) {
    detail::refine_nodes(
        f.values().subspan(static_cast<std::size_t>(j) * (g.nx + 1), g.nx + 1),
        std::span(tmp).subspan(static_cast<std::size_t>(j) * (fine.nx + 1), fine.nx + 1));
  }
  ScalarField out(fine);
  std::vector<double> col(g.ny + 1), fcol(fine.ny + 1);
  for (int i = 0; i <= fine.nx; ++i) {
    for (int j = 0; j <= g.ny; ++j) col[j] = tmp[static_cast<std::size_t>(j) * (fine.nx + 1) + i];
    detail::refine_nodes(col, fcol);
    for (int j = 0; j <= fine.ny; ++j) out(i, j) = fcol[j];
  }
  return out;
}

inline StaggeredVelocity prolong(const StaggeredVelocity& v,
                                 const GridSpec& fine) {
  const GridSpec& g = v.grid();
  require_doubling(g, fine);
  StaggeredVelocity out(fine);
  {
    // u: nodes in x, centers in y (reflection ghost).
    std::vector<double> tmp(static_cast<std::size_t>(fine.nx + 1) * g.ny);
    std::vector<double> row(g.nx + 1), frow(fine.nx + 1);
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i <= g.nx; ++i) row[i] = v.u(i, j);
      detail::refine_nodes(row, frow);
      std::copy(frow.begin(), frow.end(),
                tmp.begin() + static_cast<std::ptrdiff_t>(j) * (fine.nx + 1));
    }
    std::vector<double> col(g.ny), fcol(fine.ny);
    for (int i = 0; i <= fine.nx; ++i) {
      for (int j = 0; j < g.ny; ++j) {
        col[j] = tmp[static_cast<std::size_t>(j) * (fine.nx + 1) + i];
      }
      detail::refine_centers(col, fcol);
      for (int j = 0; j < fine.ny; ++j) out.u(i, j) = fcol[j];
    }
  }
  {
    // w: centers in x (reflection ghost), nodes in y.
    std::vector<double> tmp(static_cast<std::size_t>(fine.nx) * (g.ny + 1));
    std::vector<double> row(g.nx), frow(fine.nx);
    for (int j = 0; j <= g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) row[i] = v.w(i, j);
      detail::refine_centers(row, frow);
      std::copy(frow.begin(), frow.end(),
                tmp.begin() + static_cast<std::ptrdiff_t>(j) * fine.nx);
    }
    std::vector<double> col(g.ny + 1), fcol(fine.ny + 1);
    for (int i = 0; i < fine.nx; ++i) {
      for (int j = 0; j <= g.ny; ++j) col[j] = tmp[static_cast<std::size_t>(j) * fine.nx + i];
      detail::refine_nodes(col, fcol);
      for (int j = 0; j <= fine.ny; ++j) out.w(i, j) = fcol[j];
    }
  }
  out.zero_boundary_normal();
  return out;
}

}  // namespace convcool
