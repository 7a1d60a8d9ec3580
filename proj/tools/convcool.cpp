// convcool: run one experiment and write its outputs under the output root.
//
//   convcool simulate --example 1 --control feedback --tau 0.75
//   convcool optimize --example 2 --mesh 160 --steps 160
//   convcool sweep-tau --example 3 --taus 0:2:0.1
//   convcool verify --gradient --mesh 20 --steps 20
//   convcool convergence
//
// Exit status: 0 success, 2 configuration, 3 solver, 4 I/O, 5 failed check.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "convcool/app/config.hpp"
#include "convcool/app/runner.hpp"
#include "convcool/error.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;
constexpr int kExitCheck = 5;

int fail(const char* category, int code, const std::string& message) {
  std::cerr << "error[" << category << "]: " << message << "\n";
  return code;
}

// "a:b:step" expands to a, a+step, ..., b; otherwise a comma-separated list.
std::string expand_taus(const std::string& spec) {
  const auto c1 = spec.find(':');
  if (c1 == std::string::npos) return spec;
  const auto c2 = spec.find(':', c1 + 1);
  if (c2 == std::string::npos) throw convcool::ConfigError("--taus range must be lo:hi:step");
  const double lo = convcool::detail::parse_double("taus", spec.substr(0, c1));
  const double hi = convcool::detail::parse_double("taus", spec.substr(c1 + 1, c2 - c1 - 1));
  const double step = convcool::detail::parse_double("taus", spec.substr(c2 + 1));
  if (!(step > 0.0) || hi < lo) throw convcool::ConfigError("--taus range must have lo <= hi and step > 0");
  const int count = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  std::string out;
  for (int k = 0; k <= count; ++k) {
    if (k) out += ",";
    out += convcool::detail::format_double(lo + k * step);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convection-cooling control experiments"};
  app.require_subcommand(1);

  std::string config_path, example, initial_file, control = "none", taus, snapshots, name,
              output_root;
  std::vector<std::pair<std::string, std::string>> overrides;
  auto override_opt = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                          const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); }, help);
  };
  bool gradient = false, hessian = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--example", example, "initial condition: 1, 2, 3 or file");
    sub->add_option("--initial-file", initial_file, "flat binary initial temperature");
    override_opt(sub, "--mesh", "mesh", "cells per side");
    override_opt(sub, "--steps", "steps", "time steps");
    override_opt(sub, "--t-final", "t_final", "final time");
    override_opt(sub, "--kappa", "kappa", "diffusivity");
    override_opt(sub, "--gamma", "gamma", "control cost weight");
    override_opt(sub, "--alpha", "alpha", "terminal cost weight");
    override_opt(sub, "--beta", "beta", "running cost weight");
    override_opt(sub, "--stokes-tol", "stokes_tol", "Stokes solver tolerance");
    override_opt(sub, "--linear-tol", "linear_tol", "Helmholtz solver tolerance");
    sub->add_option("--snapshots", snapshots, "comma-separated snapshot times");
    sub->add_option("--name", name, "run directory name");
    sub->add_option("--output-root", output_root,
                    "output root (default $CONVCOOL_OUTPUT_ROOT, then ./runs)");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "forward run without or with feedback");
  common(simulate);
  simulate->add_option("--control", control, "none or feedback")
      ->check(CLI::IsMember({"none", "feedback"}));
  override_opt(simulate, "--tau", "tau", "feedback parameter");

  CLI::App* optimize = app.add_subcommand("optimize", "open-loop optimal control");
  common(optimize);
  override_opt(optimize, "--tol", "picard_tol", "fixed-point tolerance");
  override_opt(optimize, "--memory", "memory", "Anderson memory depth");
  override_opt(optimize, "--damping", "damping", "Anderson mixing weight in (0, 1]");
  override_opt(optimize, "--max-iterations", "max_iterations", "iteration cap per level");
  override_opt(optimize, "--continuation", "continuation", "mesh continuation (true/false)");

  CLI::App* sweep = app.add_subcommand("sweep-tau", "feedback objective over a range of tau");
  common(sweep);
  sweep->add_option("--taus", taus, "lo:hi:step or comma list (default 0:2:0.1)");

  CLI::App* verify = app.add_subcommand("verify", "adjoint derivatives against finite differences");
  common(verify);
  verify->add_flag("--gradient", gradient, "check the gradient");
  verify->add_flag("--hessian", hessian, "check the Hessian quadratic form");
  override_opt(verify, "--directions", "directions", "random directions");
  override_opt(verify, "--seed", "seed", "random seed");

  CLI::App* convergence = app.add_subcommand("convergence", "manufactured-solution convergence");
  convergence->add_option("--name", name, "run directory name");
  convergence->add_option("--output-root", output_root, "output root");

  CLI11_PARSE(app, argc, argv);

  convcool::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = convcool::load_config(config_path);
    if (*simulate) {
      cfg.mode = control == "feedback" ? convcool::RunMode::kFeedback : convcool::RunMode::kNone;
    } else if (*optimize) {
      cfg.mode = convcool::RunMode::kOptimal;
    } else if (*sweep) {
      cfg.mode = convcool::RunMode::kSweep;
    } else if (*verify) {
      cfg.mode = convcool::RunMode::kVerify;
      if (gradient || hessian) {
        cfg.check_gradient = gradient;
        cfg.check_hessian = hessian;
      }
    } else {
      cfg.mode = convcool::RunMode::kConvergence;
    }
    if (!example.empty()) convcool::set_value(cfg, "example", example);
    if (!initial_file.empty()) {
      convcool::set_value(cfg, "initial_file", initial_file);
      if (example.empty()) convcool::set_value(cfg, "example", "file");
    }
    for (const auto& [key, value] : overrides) convcool::set_value(cfg, key, value);
    if (!taus.empty()) convcool::set_value(cfg, "taus", expand_taus(taus));
    if (!snapshots.empty()) convcool::set_value(cfg, "snapshot_times", snapshots);
    cfg.validate();
  } catch (const convcool::IoError& e) {
    return fail("io", kExitIo, e.what());
  } catch (const convcool::Error& e) {
    return fail("config", kExitConfig, e.what());
  }

  if (output_root.empty()) {
    const char* env = std::getenv("CONVCOOL_OUTPUT_ROOT");
    output_root = env && *env ? env : "runs";
  }
  if (name.empty()) name = convcool::default_run_name(cfg);
  const std::filesystem::path dir = std::filesystem::path(output_root) / name;

  try {
    const convcool::RunResult r = convcool::run_experiment(cfg, dir, std::cout);
    std::cout << "outputs: " << dir.string() << "\n";
    if (!r.failed_checks.empty()) {
      std::string which;
      for (const auto& c : r.failed_checks) which += (which.empty() ? "" : ",") + c;
      return fail("check", kExitCheck, "failed checks: " + which);
    }
  } catch (const convcool::ConfigError& e) {
    return fail("config", kExitConfig, e.what());
  } catch (const convcool::IoError& e) {
    return fail("io", kExitIo, e.what());
  } catch (const convcool::Error& e) {
    return fail("solver", kExitSolver, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("io", kExitIo, e.what());
  }
  return 0;
}
