#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>

#include "convcool/app/field_io.hpp"
#include "convcool/error.hpp"
#include "convcool/grid.hpp"

namespace convcool {

enum class InitialSelector { kExample1, kExample2, kExample3, kFile };

struct InitialConditionSpec {
  InitialSelector selector = InitialSelector::kExample1;
  std::optional<std::filesystem::path> path;  // required for kFile

  friend bool operator==(const InitialConditionSpec&, const InitialConditionSpec&) = default;
};

// Smooth plateau of height 10 over the ellipse centered at (cx, cy).
inline double elliptic_bump(double x, double y, double cx, double cy) {
  const double arg = 10.0 * (1.0 - 32.0 * (x - cx) * (x - cx) - 16.0 * (y - cy) * (y - cy));
  return 10.0 * (0.5 + std::atan(arg) / std::numbers::pi);
}

inline double example1(double x, double y) { return elliptic_bump(x, y, 0.25, 0.25); }

inline double example2(double x, double y) {
  return elliptic_bump(x, y, 0.25, 0.25) + elliptic_bump(x, y, 0.75, 0.25);
}

// 10 on [0,0.5)^2 and (0.5,1]^2, 0 elsewhere.
inline double example3(double x, double y) {
  const bool low = x < 0.5 && y < 0.5;
  const bool high = x > 0.5 && y > 0.5;
  return (low || high) ? 10.0 : 0.0;
}

inline ScalarField build_initial_condition(const InitialConditionSpec& spec,
                                           const GridSpec& grid) {
  switch (spec.selector) {
    case InitialSelector::kExample1: return ScalarField::sample(grid, example1);
    case InitialSelector::kExample2: return ScalarField::sample(grid, example2);
    case InitialSelector::kExample3: return ScalarField::sample(grid, example3);
    case InitialSelector::kFile:
      if (!spec.path) throw ConfigError("initial condition 'file' needs a path");
      return load_field(*spec.path, grid);
  }
  throw ConfigError("unknown initial condition selector");
}

}  // namespace convcool
