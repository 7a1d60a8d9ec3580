#pragma once

// Fast diagonalization of the constant-coefficient grid operators with FFTW
// real-to-real transforms:
//   vertex Neumann (mirror ghosts)    DCT-I
//   cell-centered reflection (-ghost) DST-II / DST-III
//   interior face nodes, Dirichlet    DST-I
//
// Plans are built with FFTW_ESTIMATE so repeated runs take the same code path
// and produce bit-identical results.

#include <fftw3.h>

#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "convcool/error.hpp"

namespace convcool::spectral {

// Boundary treatment along one axis.
enum class Axis {
  kNeumannNodes,     // n+1 vertices of an n-cell axis, mirror ghosts
  kReflectCenters,   // n values at cell centers, ghost = -interior
  kDirichletNodes,   // n-1 interior nodes of an n-cell axis, zero at ends
};

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct AxisTransform {
  Axis kind;
  int cells;  // cell count along the axis

  int length() const {
    switch (kind) {
      case Axis::kNeumannNodes: return cells + 1;
      case Axis::kReflectCenters: return cells;
      case Axis::kDirichletNodes: return cells - 1;
    }
    return cells;
  }
  fftw_r2r_kind forward() const {
    switch (kind) {
      case Axis::kNeumannNodes: return FFTW_REDFT00;
      case Axis::kReflectCenters: return FFTW_RODFT10;
      case Axis::kDirichletNodes: return FFTW_RODFT00;
    }
    return FFTW_REDFT00;
  }
  fftw_r2r_kind inverse() const {
    switch (kind) {
      case Axis::kNeumannNodes: return FFTW_REDFT00;
      case Axis::kReflectCenters: return FFTW_RODFT01;
      case Axis::kDirichletNodes: return FFTW_RODFT00;
    }
    return FFTW_REDFT00;
  }
  // forward followed by inverse multiplies by this factor
  double normalization() const { return 2.0 * cells; }

  // Eigenvalues of the negated second-difference operator with spacing h.
  std::vector<double> eigenvalues(double h) const {
    std::vector<double> lam(static_cast<std::size_t>(length()));
    const double pi = std::numbers::pi;
    for (int k = 0; k < length(); ++k) {
      const int mode = kind == Axis::kNeumannNodes ? k : k + 1;
      const double s = std::sin(pi * mode / (2.0 * cells));
      lam[static_cast<std::size_t>(k)] = 4.0 * s * s / (h * h);
    }
    return lam;
  }
};

// Solves (shift I - coeff * Lap) x = rhs on a rows x cols array, where Lap is
// the separable second-difference operator described by the two axes.
class SeparableSolver {
 public:
  SeparableSolver(AxisTransform rows_axis, double hy, AxisTransform cols_axis,
                  double hx)
      : rows_(rows_axis.length()),
        cols_(cols_axis.length()),
        lam_y_(rows_axis.eigenvalues(hy)),
        lam_x_(cols_axis.eigenvalues(hx)),
        scale_(1.0 / (rows_axis.normalization() * cols_axis.normalization())),
        buffer_(static_cast<double*>(
                    fftw_malloc(sizeof(double) * static_cast<std::size_t>(rows_ * cols_))),
                &fftw_free) {
    if (!buffer_) throw SolverError("fftw_malloc failed");
    std::lock_guard lock(planner_mutex());
    forward_ = fftw_plan_r2r_2d(rows_, cols_, buffer_.get(), buffer_.get(),
                                rows_axis.forward(), cols_axis.forward(),
                                FFTW_ESTIMATE);
    inverse_ = fftw_plan_r2r_2d(rows_, cols_, buffer_.get(), buffer_.get(),
                                rows_axis.inverse(), cols_axis.inverse(),
                                FFTW_ESTIMATE);
    if (!forward_ || !inverse_) throw SolverError("FFTW planning failed");
  }
  ~SeparableSolver() {
    std::lock_guard lock(planner_mutex());
    if (forward_) fftw_destroy_plan(forward_);
    if (inverse_) fftw_destroy_plan(inverse_);
  }
  SeparableSolver(const SeparableSolver&) = delete;
  SeparableSolver& operator=(const SeparableSolver&) = delete;

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  // rhs and x are rows*cols, row-major; they may alias.
  void solve(std::span<const double> rhs, std::span<double> x, double shift,
             double coeff) {
    const std::size_t n = static_cast<std::size_t>(rows_) * cols_;
    double* b = buffer_.get();
    for (std::size_t k = 0; k < n; ++k) b[k] = rhs[k];
    fftw_execute(forward_);
    for (int r = 0; r < rows_; ++r) {
      const double ly = lam_y_[static_cast<std::size_t>(r)];
      double* row = b + static_cast<std::size_t>(r) * cols_;
      for (int c = 0; c < cols_; ++c) {
        const double denom = shift + coeff * (ly + lam_x_[static_cast<std::size_t>(c)]);
        row[c] = denom != 0.0 ? row[c] * scale_ / denom : 0.0;
      }
    }
    fftw_execute(inverse_);
    for (std::size_t k = 0; k < n; ++k) x[k] = b[k];
  }

 private:
  int rows_;
  int cols_;
  std::vector<double> lam_y_;
  std::vector<double> lam_x_;
  double scale_;
  std::unique_ptr<double, decltype(&fftw_free)> buffer_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace convcool::spectral
