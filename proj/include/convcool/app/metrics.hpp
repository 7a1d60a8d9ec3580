#pragma once

// CSV exports: per-time-node metrics and the one-row objective summary.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "convcool/error.hpp"
#include "convcool/feedback.hpp"
#include "convcool/objective.hpp"
#include "convcool/pde.hpp"

namespace convcool {

inline constexpr const char* kMetricsHeader = "t,dT_l2,v_l2,div_l2,mean_T,mix_norm,J_running";
inline constexpr const char* kSummaryHeader = "J,J_alpha,J_beta,J_gamma,max_div,max_vel,iter,cpu";

struct MetricsRow {
  double t = 0.0;
  double dT_l2 = 0.0;   // nodal |D T(t_i)|
  double v_l2 = 0.0;    // |v_i|_2, 0 at the final node
  double div_l2 = 0.0;  // |div v_i|_2 on the MAC cells
  double mean_T = 0.0;
  double mix_norm = 0.0;
  double J_running = 0.0;  // cost accumulated through t_i
};

// The running cost uses the same quadrature as `evaluate`, so the last row
// equals J (the terminal alpha term is added there).
inline std::vector<MetricsRow> compute_metrics(const Trajectory& T, const ControlTrajectory& v,
                                               const CostWeights& w) {
  detail::require_consistent(T, v, "compute_metrics");
  const int n = T.steps();
  const double dt = T.timegrid.dt();
  std::vector<MetricsRow> rows;
  rows.reserve(static_cast<std::size_t>(n) + 1);
  double running = 0.0;
  for (int i = 0; i <= n; ++i) {
    MetricsRow r;
    r.t = T.timegrid.time(i);
    r.dT_l2 = nodal_norm(deviation(T[i]));
    r.mean_T = mean(T[i]);
    r.mix_norm = mix_norm(T[i]);
    running += 0.5 * w.beta * dt * r.dT_l2 * r.dT_l2;
    if (i > 0) running += 0.5 * w.gamma * dt * h1_seminorm_sq(v[i - 1]);
    if (i == n) running += 0.5 * w.alpha * r.dT_l2 * r.dT_l2;
    if (i < n) {
      r.v_l2 = norm_l2(v[i]);
      r.div_l2 = norm_l2(divergence(v[i]));
    }
    r.J_running = running;
    rows.push_back(r);
  }
  return rows;
}

namespace detail {

inline std::string csv_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

// Returns the number of data rows written.
inline std::size_t write_metrics_csv(const std::filesystem::path& path,
                                     const std::vector<MetricsRow>& rows) {
  auto out = detail::open_for_write(path);
  out << kMetricsHeader << "\n";
  using detail::csv_number;
  for (const auto& r : rows) {
    out << csv_number(r.t) << ',' << csv_number(r.dT_l2) << ',' << csv_number(r.v_l2) << ','
        << csv_number(r.div_l2) << ',' << csv_number(r.mean_T) << ',' << csv_number(r.mix_norm)
        << ',' << csv_number(r.J_running) << "\n";
  }
  detail::finish(out, path);
  return rows.size();
}

inline std::string summary_row(const ObjectiveBreakdown& o, int iterations, double cpu) {
  using detail::csv_number;
  return csv_number(o.j_total) + ',' + csv_number(o.j_alpha) + ',' + csv_number(o.j_beta) + ',' +
         csv_number(o.j_gamma) + ',' + csv_number(o.max_div) + ',' + csv_number(o.max_vel) + ',' +
         std::to_string(iterations) + ',' + csv_number(cpu);
}

inline std::size_t write_summary_csv(const std::filesystem::path& path, const ObjectiveBreakdown& o,
                                     int iterations, double cpu) {
  auto out = detail::open_for_write(path);
  out << kSummaryHeader << "\n" << summary_row(o, iterations, cpu) << "\n";
  detail::finish(out, path);
  return 1;
}

}  // namespace convcool
