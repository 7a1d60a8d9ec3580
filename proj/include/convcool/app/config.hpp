#pragma once

// Flat key-value run configuration:
//
//   # comment
//   mode = feedback
//   example = 1
//   tau = 0.75
//
// Unknown keys and malformed values are ConfigErrors. to_text() writes every
// key, and parse_config(to_text(c)) reproduces c exactly.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "convcool/app/initial_condition.hpp"
#include "convcool/error.hpp"

namespace convcool {

enum class RunMode { kNone, kOptimal, kFeedback, kSweep, kVerify, kConvergence };

inline std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::kNone: return "none";
    case RunMode::kOptimal: return "optimal";
    case RunMode::kFeedback: return "feedback";
    case RunMode::kSweep: return "sweep";
    case RunMode::kVerify: return "verify";
    case RunMode::kConvergence: return "convergence";
  }
  return "none";
}

struct RunConfig {
  RunMode mode = RunMode::kNone;
  InitialConditionSpec initial;
  double kappa = 0.05;
  double gamma = 0.025;
  double alpha = 0.0;
  double beta = 1.0;
  double tau = 0.75;
  double t_final = 1.0;
  int mesh = 160;
  int steps = 160;
  double picard_tol = 1e-5;
  int memory = 5;
  double damping = 0.5;
  int max_iterations = 200;
  bool continuation = true;
  double stokes_tol = 1e-8;
  double linear_tol = 1e-10;
  std::vector<double> taus;            // sweep values
  std::vector<double> snapshot_times;  // field snapshots, nearest time node
  int directions = 5;                  // verify
  std::uint64_t seed = 1;              // verify
  bool check_gradient = true;          // verify
  bool check_hessian = true;           // verify

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  void validate() const {
    if (mesh < 2) throw ConfigError("mesh must be at least 2");
    if (steps < 1) throw ConfigError("steps must be at least 1");
    if (!(t_final > 0.0)) throw ConfigError("t_final must be positive");
    if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (alpha < 0.0 || beta < 0.0) throw ConfigError("alpha and beta must be nonnegative");
    if (!(tau >= 0.0)) throw ConfigError("tau must be nonnegative");
    if (!(picard_tol > 0.0) || !(stokes_tol > 0.0) || !(linear_tol > 0.0)) {
      throw ConfigError("tolerances must be positive");
    }
    if (memory < 0) throw ConfigError("memory must be nonnegative");
    if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");
    if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
    if (directions < 1) throw ConfigError("directions must be at least 1");
    for (double t : taus) {
      if (!(t >= 0.0)) throw ConfigError("sweep taus must be nonnegative");
    }
    for (double t : snapshot_times) {
      if (!(t >= 0.0 && t <= t_final)) throw ConfigError("snapshot times must lie in [0, t_final]");
    }
    if (initial.selector == InitialSelector::kFile && !initial.path) {
      throw ConfigError("example = file needs initial_file");
    }
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string format_double(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "': not a number: '" + v + "'");
  }
  return x;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "': not an integer: '" + v + "'");
  }
  return x;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  return out;
}

inline std::string format_list(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) s += ",";
    s += format_double(xs[k]);
  }
  return s;
}

}  // namespace detail

inline RunMode parse_mode(const std::string& v) {
  for (RunMode m : {RunMode::kNone, RunMode::kOptimal, RunMode::kFeedback, RunMode::kSweep,
                    RunMode::kVerify, RunMode::kConvergence}) {
    if (to_string(m) == v) return m;
  }
  throw ConfigError("unknown mode '" + v + "'");
}

inline InitialSelector parse_example(const std::string& v) {
  if (v == "1" || v == "example1") return InitialSelector::kExample1;
  if (v == "2" || v == "example2") return InitialSelector::kExample2;
  if (v == "3" || v == "example3") return InitialSelector::kExample3;
  if (v == "file") return InitialSelector::kFile;
  throw ConfigError("unknown example '" + v + "' (expected 1, 2, 3 or file)");
}

inline std::string example_name(InitialSelector s) {
  switch (s) {
    case InitialSelector::kExample1: return "1";
    case InitialSelector::kExample2: return "2";
    case InitialSelector::kExample3: return "3";
    case InitialSelector::kFile: return "file";
  }
  return "1";
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + v + "'");
}

// Assigns one key; used by the file parser and by CLI overrides.
inline void set_value(RunConfig& c, const std::string& key, const std::string& value) {
  const std::string v = detail::trim(value);
  using detail::parse_double;
  using detail::parse_int;
  if (key == "mode") c.mode = parse_mode(v);
  else if (key == "example") c.initial.selector = parse_example(v);
  else if (key == "initial_file") c.initial.path = v.empty() ? std::nullopt : std::optional<std::filesystem::path>(v);
  else if (key == "kappa") c.kappa = parse_double(key, v);
  else if (key == "gamma") c.gamma = parse_double(key, v);
  else if (key == "alpha") c.alpha = parse_double(key, v);
  else if (key == "beta") c.beta = parse_double(key, v);
  else if (key == "tau") c.tau = parse_double(key, v);
  else if (key == "t_final") c.t_final = parse_double(key, v);
  else if (key == "mesh") c.mesh = static_cast<int>(parse_int(key, v));
  else if (key == "steps") c.steps = static_cast<int>(parse_int(key, v));
  else if (key == "picard_tol") c.picard_tol = parse_double(key, v);
  else if (key == "memory") c.memory = static_cast<int>(parse_int(key, v));
  else if (key == "damping") c.damping = parse_double(key, v);
  else if (key == "max_iterations") c.max_iterations = static_cast<int>(parse_int(key, v));
  else if (key == "continuation") c.continuation = parse_bool(key, v);
  else if (key == "stokes_tol") c.stokes_tol = parse_double(key, v);
  else if (key == "linear_tol") c.linear_tol = parse_double(key, v);
  else if (key == "taus") c.taus = detail::parse_list(key, v);
  else if (key == "snapshot_times") c.snapshot_times = detail::parse_list(key, v);
  else if (key == "directions") c.directions = static_cast<int>(parse_int(key, v));
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(key, v));
  else if (key == "check_gradient") c.check_gradient = parse_bool(key, v);
  else if (key == "check_hessian") c.check_hessian = parse_bool(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

inline RunConfig parse_config(std::string_view text, RunConfig base = {}) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    set_value(base, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

inline std::string to_text(const RunConfig& c) {
  using detail::format_double;
  std::ostringstream os;
  os << "mode = " << to_string(c.mode) << "\n"
     << "example = " << example_name(c.initial.selector) << "\n"
     << "initial_file = " << (c.initial.path ? c.initial.path->string() : "") << "\n"
     << "kappa = " << format_double(c.kappa) << "\n"
     << "gamma = " << format_double(c.gamma) << "\n"
     << "alpha = " << format_double(c.alpha) << "\n"
     << "beta = " << format_double(c.beta) << "\n"
     << "tau = " << format_double(c.tau) << "\n"
     << "t_final = " << format_double(c.t_final) << "\n"
     << "mesh = " << c.mesh << "\n"
     << "steps = " << c.steps << "\n"
     << "picard_tol = " << format_double(c.picard_tol) << "\n"
     << "memory = " << c.memory << "\n"
     << "damping = " << format_double(c.damping) << "\n"
     << "max_iterations = " << c.max_iterations << "\n"
     << "continuation = " << (c.continuation ? "true" : "false") << "\n"
     << "stokes_tol = " << format_double(c.stokes_tol) << "\n"
     << "linear_tol = " << format_double(c.linear_tol) << "\n"
     << "taus = " << detail::format_list(c.taus) << "\n"
     << "snapshot_times = " << detail::format_list(c.snapshot_times) << "\n"
     << "directions = " << c.directions << "\n"
     << "seed = " << c.seed << "\n"
     << "check_gradient = " << (c.check_gradient ? "true" : "false") << "\n"
     << "check_hessian = " << (c.check_hessian ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace convcool
