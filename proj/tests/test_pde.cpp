#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "convcool/app/initial_condition.hpp"
#include "convcool/pde.hpp"
#include "convcool/verify.hpp"

using namespace convcool;

namespace {

constexpr double kPi = std::numbers::pi;

ControlTrajectory random_control(const GridSpec& g, const TimeGrid& tg, unsigned seed,
                                 double norm) {
  std::mt19937_64 rng(seed);
  return random_divergence_free(g, tg, rng, norm);
}

}  // namespace

TEST(Forward, ConstantStateIsSteady) {
  const GridSpec g(12, 10);
  const TimeGrid tg(1.0, 8);
  const Trajectory T = forward_solve(random_control(g, tg, 1, 0.3), ScalarField(g, 4.0), 0.05);
  ASSERT_EQ(T.fields.size(), 9u);
  for (const ScalarField& f : T.fields) EXPECT_LT(norm_inf(f - ScalarField(g, 4.0)), 1e-12);
}

TEST(Forward, CosineModeDecayRate) {
  // |D T|^2 decays at least at 2 kappa pi^2 (1 - 0.05).
  const double kappa = 0.05;
  const GridSpec g = GridSpec::square(64);
  const TimeGrid tg(1.0, 160);
  const ScalarField T0 = ScalarField::sample(g, [](double x, double) { return std::cos(kPi * x); });
  const Trajectory T = forward_solve(ControlTrajectory::zeros(g, tg), T0, kappa);
  const double d0 = nodal_norm(deviation(T[0])), dn = nodal_norm(deviation(T.final()));
  EXPECT_LT(dn, d0);
  const double rate = -std::log(dn * dn / (d0 * d0)) / tg.t_final;
  EXPECT_GE(rate, 2.0 * kappa * kPi * kPi * 0.95);
  for (int i = 0; i <= tg.steps; ++i) EXPECT_NEAR(mean(T[i]), mean(T0), 1e-14);
}

TEST(Forward, MeanConservedUnderDivergenceFreeControl) {
  const GridSpec g = GridSpec::square(40);
  const TimeGrid tg(1.0, 40);
  const ScalarField T0 = ScalarField::sample(g, example2);
  const ControlTrajectory v = random_control(g, tg, 2, 1.0);
  const Trajectory T = forward_solve(v, T0, 0.05);
  for (int i = 0; i <= tg.steps; ++i) {
    EXPECT_LE(std::abs(mean(T[i]) - mean(T0)), 1e-8 * norm_inf(T0));
  }
}

TEST(Forward, RejectsInconsistentControl) {
  const GridSpec g(8, 8);
  const ControlTrajectory v = ControlTrajectory::zeros(g, TimeGrid(1.0, 5));
  ControlTrajectory short_v = v;
  short_v.velocities.pop_back();
  EXPECT_THROW(forward_solve(short_v, ScalarField(g), 0.05), ShapeError);
  EXPECT_THROW(forward_solve(v, ScalarField(GridSpec(9, 8)), 0.05), ShapeError);
  EXPECT_THROW(forward_solve(v, ScalarField(g), 0.0), ConfigError);
}

TEST(Adjoint, ZeroWeightsGiveZero) {
  const GridSpec g(10, 10);
  const TimeGrid tg(1.0, 6);
  const ControlTrajectory v = random_control(g, tg, 3, 0.2);
  const Trajectory T = forward_solve(v, ScalarField::sample(g, example1), 0.05);
  const Trajectory q = adjoint_solve(v, T, 0.0, 0.0, 0.05);
  for (const ScalarField& f : q.fields) EXPECT_EQ(norm_inf(f), 0.0);
}

TEST(Adjoint, TerminalOnlyStaysMeanFree) {
  const GridSpec g(16, 12);
  const TimeGrid tg(1.0, 10);
  const ControlTrajectory v = ControlTrajectory::zeros(g, tg);
  const Trajectory T = forward_solve(v, ScalarField::sample(g, example1), 0.05);
  const Trajectory q = adjoint_solve(v, T, 1.0, 0.0, 0.05);
  for (const ScalarField& f : q.fields) EXPECT_NEAR(mean(f), 0.0, 1e-12);
  EXPECT_GT(norm_l2(q[0]), 0.0);
  EXPECT_LT(norm_l2(q[0]), norm_l2(q[tg.steps]));
}

TEST(Adjoint, DiscreteDuality) {
  // With beta = 0 the costate of the initial state, (I + dt A_0) q^0, pairs
  // with a transported perturbation exactly as q^n pairs with its image.
  const GridSpec g(12, 12);
  const TimeGrid tg(1.0, 8);
  const double kappa = 0.05;
  const ControlTrajectory v = random_control(g, tg, 4, 0.5);
  const Trajectory T = forward_solve(v, ScalarField::sample(g, example1), kappa);
  const Trajectory q = adjoint_solve(v, T, 1.0, 0.0, kappa, 1e-13);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  ScalarField e(g);
  for (double& x : e.values()) x = u(rng);
  const ScalarField e0 = e;
  const HelmholtzOperator E(g, kappa * tg.dt());
  for (int i = 0; i < tg.steps; ++i) {
    ScalarField rhs = e;
    rhs.axpy(-tg.dt(), advect(v[i], e));
    e = helmholtz_solve(E, rhs, 1e-13).first;
  }
  ScalarField p0 = q[0];
  p0.axpy(tg.dt(), advect(v[0], q[0]));
  EXPECT_NEAR(inner(p0, e0), inner(q[tg.steps], e), 1e-10);
}

TEST(Linearized, ZeroDirection) {
  const GridSpec g(10, 10);
  const TimeGrid tg(1.0, 5);
  const ControlTrajectory v = random_control(g, tg, 6, 0.3);
  const Trajectory T = forward_solve(v, ScalarField::sample(g, example1), 0.05);
  const Trajectory z = linearized_solve(v, T, ControlTrajectory::zeros(g, tg), 0.05);
  for (const ScalarField& f : z.fields) EXPECT_EQ(norm_inf(f), 0.0);
}

TEST(Linearized, LinearInDirection) {
  const GridSpec g(10, 10);
  const TimeGrid tg(1.0, 5);
  const ControlTrajectory v = random_control(g, tg, 7, 0.3);
  const ControlTrajectory h = random_control(g, tg, 8, 1.0);
  const Trajectory T = forward_solve(v, ScalarField::sample(g, example1), 0.05);
  const Trajectory z1 = linearized_solve(v, T, h, 0.05);
  const Trajectory z3 = linearized_solve(v, T, 3.0 * h, 0.05);
  for (int i = 0; i <= tg.steps; ++i) {
    EXPECT_LT(norm_inf(z3[i] - 3.0 * z1[i]), 1e-10 * std::max(1.0, norm_inf(z3[i])));
  }
}

TEST(Linearized, TangentRemainderIsSecondOrder) {
  const GridSpec g = GridSpec::square(16);
  const TimeGrid tg(1.0, 16);
  const ScalarField T0 = ScalarField::sample(g, example1);
  const ControlTrajectory v = random_control(g, tg, 9, 0.25);
  const ControlTrajectory h = random_control(g, tg, 10, 1.0);
  const Trajectory T = forward_solve(v, T0, 0.05);
  const Trajectory z = linearized_solve(v, T, h, 0.05);
  std::vector<double> eps{1e-2, 1e-3, 1e-4}, rem;
  for (double e : eps) {
    ControlTrajectory ve = v;
    ve.axpy(e, h);
    const Trajectory Te = forward_solve(ve, T0, 0.05);
    double r = 0.0;
    for (int i = 0; i <= tg.steps; ++i) {
      ScalarField d = Te[i] - T[i];
      d.axpy(-e, z[i]);
      r = std::max(r, norm_l2(d));
    }
    rem.push_back(r);
  }
  const double slope = std::log(rem[0] / rem[2]) / std::log(eps[0] / eps[2]);
  EXPECT_NEAR(slope, 2.0, 0.1);
}

TEST(Prolong, TrajectoryAndControlShapes) {
  const GridSpec c = GridSpec::square(10), f = GridSpec::square(20);
  const TimeGrid tg(1.0, 10);
  const ControlTrajectory v = random_control(c, tg, 11, 0.5);
  const ControlTrajectory pv = prolong(v, f);
  EXPECT_EQ(pv.steps(), 20);
  EXPECT_EQ(static_cast<int>(pv.velocities.size()), 20);
  EXPECT_EQ(pv.grid(), f);
  for (const auto& u : pv.velocities) EXPECT_TRUE(u.boundary_normal_is_zero());
  const Trajectory T = forward_solve(v, ScalarField::sample(c, example1), 0.05);
  const Trajectory pT = prolong(T, f);
  EXPECT_EQ(pT.fields.size(), 21u);
  EXPECT_LT(norm_inf(pT[0] - prolong(T[0], f)), 1e-14);
  EXPECT_LT(norm_inf(pT[20] - prolong(T[10], f)), 1e-14);
}

TEST(TemporalConvergence, FirstOrder) {
  const ConvergenceStudy s = temporal_convergence({10, 20, 40, 80});
  for (double r : s.ratios) EXPECT_NEAR(r, 2.0, 0.3);
  const ConvergenceStudy a = advected_temporal_convergence({20, 40, 80});
  for (double r : a.ratios) EXPECT_NEAR(r, 2.0, 0.3);
}

TEST(Cfl, WarnsOncePerMarchUnlessMuted) {
  const GridSpec g(10, 10);
  const TimeGrid tg(1.0, 4);
  const ControlTrajectory v = random_control(g, tg, 3, 50.0);
  ASSERT_GT(max_cfl_number(v), 1.0);
  int warnings = 0;
  const LogSink previous = set_log_sink([&](LogLevel level, const std::string&) {
    if (level == LogLevel::kWarning) ++warnings;
  });
  const ScalarField T0 = ScalarField::sample(g, example1);
  forward_solve(v, T0, 0.05);
  EXPECT_EQ(warnings, 1);
  {
    const MuteCflWarnings mute;
    forward_solve(v, T0, 0.05);
  }
  EXPECT_EQ(warnings, 1);
  forward_solve(v, T0, 0.05);
  EXPECT_EQ(warnings, 2);
  set_log_sink(previous);
}
