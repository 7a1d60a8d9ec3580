#include <atomic>
#include <cstring>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "convcool/app/config.hpp"
#include "convcool/app/field_io.hpp"
#include "convcool/app/initial_condition.hpp"
#include "convcool/app/manifest.hpp"
#include "convcool/app/metrics.hpp"
#include "convcool/app/runner.hpp"

using namespace convcool;
namespace fs = std::filesystem;

namespace {

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("convcool-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small(RunMode mode, int n = 20) {
  RunConfig c;
  c.mode = mode;
  c.mesh = n;
  c.steps = n;
  return c;
}

int run_cli(const std::string& args, const fs::path& root) {
  const std::string cmd = std::string(CONVCOOL_CLI) + " " + args + " --output-root " +
                          root.string() + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(InitialCondition, Example1PeakValue) {
  const GridSpec g = GridSpec::square(160);
  const ScalarField T = build_initial_condition({InitialSelector::kExample1, std::nullopt}, g);
  const double expect = 10.0 * (0.5 + std::atan(10.0) / std::numbers::pi);
  EXPECT_NEAR(T(40, 40), expect, 1e-12);
  EXPECT_NEAR(T(40, 40), 9.6827, 1e-4);
}

TEST(InitialCondition, Example3NodeCount) {
  // Nodes on the lines x = 1/2 or y = 1/2 are outside S.
  for (int n : {10, 40, 160}) {
    const ScalarField T =
        build_initial_condition({InitialSelector::kExample3, std::nullopt}, GridSpec::square(n));
    std::size_t hot = 0, cold = 0;
    for (double x : T.values()) {
      if (x == 10.0) ++hot;
      if (x == 0.0) ++cold;
    }
    EXPECT_EQ(hot, static_cast<std::size_t>(n * n / 2));
    EXPECT_EQ(hot + cold, T.size());
  }
}

TEST(InitialCondition, Example2MirrorSymmetric) {
  const GridSpec g = GridSpec::square(64);
  const ScalarField T = build_initial_condition({InitialSelector::kExample2, std::nullopt}, g);
  for (int j = 0; j <= g.ny; ++j) {
    for (int i = 0; i <= g.nx; ++i) EXPECT_NEAR(T(i, j), T(g.nx - i, j), 1e-12);
  }
}

TEST(InitialCondition, FileSelectorNeedsPath) {
  EXPECT_THROW(build_initial_condition({InitialSelector::kFile, std::nullopt}, GridSpec(4, 4)),
               ConfigError);
}

TEST(FieldIo, RoundTripAndHeader) {
  TempDir dir;
  const GridSpec g(12, 7);
  const ScalarField f = ScalarField::sample(g, [](double x, double y) { return x * x - 3 * y; });
  const fs::path p = dir.path() / "f.bin";
  write_field(p, f, 0.25, "T");
  EXPECT_EQ(fs::file_size(p), f.size() * sizeof(double));
  const ScalarField back = load_field(p, g);
  EXPECT_EQ(std::memcmp(back.values().data(), f.values().data(), f.size() * sizeof(double)), 0);
  const std::string hdr = slurp(sidecar_path(p));
  EXPECT_NE(hdr.find("nx=12"), std::string::npos);
  EXPECT_NE(hdr.find("ny=7"), std::string::npos);
  EXPECT_NE(hdr.find("time=0.25"), std::string::npos);
  EXPECT_THROW(load_field(p, GridSpec(12, 8)), Error);
  EXPECT_THROW(load_field(dir.path() / "missing.bin", g), IoError);
}

TEST(FieldIo, FileInitialCondition) {
  TempDir dir;
  const GridSpec g = GridSpec::square(10);
  const ScalarField f = ScalarField::sample(g, example2);
  write_field(dir.path() / "t0.bin", f, 0.0);
  const ScalarField back =
      build_initial_condition({InitialSelector::kFile, dir.path() / "t0.bin"}, g);
  EXPECT_EQ(norm_inf(back - f), 0.0);
}

TEST(Config, RoundTrip) {
  RunConfig c;
  c.mode = RunMode::kSweep;
  c.initial.selector = InitialSelector::kExample3;
  c.kappa = 0.1 / 3.0;
  c.gamma = 0.0125;
  c.alpha = 0.5;
  c.tau = 1.25;
  c.t_final = 2.0;
  c.mesh = 80;
  c.steps = 40;
  c.continuation = false;
  c.taus = {0.1, 0.2, 1.0 / 3.0};
  c.snapshot_times = {0.0, 0.7};
  c.seed = 1234567;
  c.check_hessian = false;
  EXPECT_EQ(parse_config(to_text(c)), c);
  c.initial = {InitialSelector::kFile, fs::path("/tmp/x.bin")};
  EXPECT_EQ(parse_config(to_text(c)), c);
}

TEST(Config, ParsesCommentsAndOverrides) {
  const RunConfig c = parse_config("# run\nmode = feedback  # inline\n\n tau=0.5\nexample = 2\n");
  EXPECT_EQ(c.mode, RunMode::kFeedback);
  EXPECT_EQ(c.tau, 0.5);
  EXPECT_EQ(c.initial.selector, InitialSelector::kExample2);
  RunConfig d = c;
  set_value(d, "tau", "0.75");
  EXPECT_EQ(d.tau, 0.75);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("tau = abc\n"), ConfigError);
  EXPECT_THROW(parse_config("mesh = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("no equals sign\n"), ConfigError);
  EXPECT_THROW(parse_config("mode = fast\n"), ConfigError);
  EXPECT_THROW(parse_config("mesh = 1\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("snapshot_times = 2\n").validate(), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/run.cfg"), IoError);
}

TEST(Manifest, JsonRoundTripAndCheck) {
  TempDir dir;
  RunManifest m;
  m.mode = "none";
  m.config = "mode = none\n";
  m.wall_time = 1.5;
  m.reports["x"] = 2;
  {
    std::ofstream(dir.path() / "a.csv") << "h\n1\n2\n";
  }
  m.add_csv("a.csv", 2);
  write_manifest(dir.path(), m);
  const RunManifest back = read_manifest(dir.path());
  EXPECT_EQ(back.mode, "none");
  EXPECT_EQ(back.outputs.size(), 1u);
  EXPECT_TRUE(check_manifest(dir.path(), back).empty());

  std::ofstream(dir.path() / "stray.txt") << "x";
  EXPECT_EQ(check_manifest(dir.path(), back).size(), 1u);
  fs::remove(dir.path() / "stray.txt");
  m.outputs[0].count = 3;
  EXPECT_EQ(check_manifest(dir.path(), m).size(), 1u);
  fs::remove(dir.path() / "a.csv");
  EXPECT_FALSE(check_manifest(dir.path(), back).empty());
}

TEST(Metrics, RunningCostEndsAtObjective) {
  const GridSpec g = GridSpec::square(16);
  const TimeGrid tg(1.0, 16);
  const ControlTrajectory v = ControlTrajectory::zeros(g, tg);
  const Trajectory T = forward_solve(v, ScalarField::sample(g, example1), 0.05);
  const CostWeights w{0.5, 1.0, 0.025};
  const auto rows = compute_metrics(T, v, w);
  ASSERT_EQ(rows.size(), 17u);
  EXPECT_NEAR(rows.back().J_running, evaluate(T, v, w).j_total, 1e-12);
  for (const auto& r : rows) EXPECT_EQ(r.v_l2, 0.0);
}

TEST(Runner, NoControlOutputs) {
  TempDir root;
  const fs::path dir = root.path() / "run";
  RunConfig c = small(RunMode::kNone);
  c.snapshot_times = {0.0, 0.5, 1.0};
  std::ostringstream log;
  EXPECT_TRUE(run_experiment(c, dir, log).failed_checks.empty());
  EXPECT_TRUE(check_manifest(dir, read_manifest(dir)).empty());
  EXPECT_EQ(read_manifest(dir).mode, "none");

  std::ifstream metrics(dir / "metrics.csv");
  std::string line;
  std::getline(metrics, line);
  EXPECT_EQ(line, kMetricsHeader);
  int rows = 0;
  while (std::getline(metrics, line)) {
    ++rows;
    std::stringstream ss(line);
    std::string t, dt, vl2;
    std::getline(ss, t, ',');
    std::getline(ss, dt, ',');
    std::getline(ss, vl2, ',');
    EXPECT_EQ(vl2, "0");
  }
  EXPECT_EQ(rows, 21);

  const std::string summary = slurp(dir / "summary.csv");
  EXPECT_EQ(summary.substr(0, summary.find('\n')), kSummaryHeader);

  // Snapshot at t = 0 is the initial condition byte for byte.
  const ScalarField T0 = build_initial_condition(c.initial, GridSpec::square(20));
  const std::string bytes = slurp(dir / "T_00000.bin");
  ASSERT_EQ(bytes.size(), T0.size() * sizeof(double));
  EXPECT_EQ(std::memcmp(bytes.data(), T0.values().data(), bytes.size()), 0);
  EXPECT_TRUE(fs::exists(dir / "T_00010.bin"));
  EXPECT_TRUE(fs::exists(dir / "T_00020.hdr"));
}

TEST(Runner, FeedbackManifestEchoesConfig) {
  TempDir root;
  RunConfig c = small(RunMode::kFeedback);
  c.tau = 0.75;
  std::ostringstream log;
  run_experiment(c, root.path() / "fb", log);
  const RunManifest m = read_manifest(root.path() / "fb");
  EXPECT_EQ(m.mode, "feedback");
  EXPECT_EQ(parse_config(m.config).tau, 0.75);
  EXPECT_EQ(parse_config(m.config), c);
  EXPECT_EQ(m.reports.at("tau").get<double>(), 0.75);
  EXPECT_TRUE(check_manifest(root.path() / "fb", m).empty());
}

TEST(Runner, DeterministicCsv) {
  TempDir root;
  std::ostringstream log;
  RunConfig fb = small(RunMode::kFeedback);
  run_experiment(fb, root.path() / "a", log);
  run_experiment(fb, root.path() / "b", log);
  EXPECT_EQ(slurp(root.path() / "a" / "metrics.csv"), slurp(root.path() / "b" / "metrics.csv"));
  // The summary differs only in the trailing cpu column.
  auto strip_cpu = [](std::string s) { return s.substr(0, s.rfind(',')); };
  EXPECT_EQ(strip_cpu(slurp(root.path() / "a" / "summary.csv")),
            strip_cpu(slurp(root.path() / "b" / "summary.csv")));

  RunConfig v = small(RunMode::kVerify);
  v.seed = 17;
  run_experiment(v, root.path() / "c", log);
  run_experiment(v, root.path() / "d", log);
  EXPECT_EQ(slurp(root.path() / "c" / "verify.csv"), slurp(root.path() / "d" / "verify.csv"));
  v.seed = 18;
  run_experiment(v, root.path() / "e", log);
  EXPECT_NE(slurp(root.path() / "c" / "verify.csv"), slurp(root.path() / "e" / "verify.csv"));
}

TEST(Runner, OptimalWritesResiduals) {
  TempDir root;
  std::ostringstream log;
  RunConfig c = small(RunMode::kOptimal);
  c.initial.selector = InitialSelector::kExample2;
  const RunResult r = run_experiment(c, root.path() / "opt", log);
  const fs::path dir = root.path() / "opt";
  EXPECT_TRUE(check_manifest(dir, read_manifest(dir)).empty());
  EXPECT_TRUE(fs::exists(dir / "residuals.csv"));
  EXPECT_LT(r.manifest.reports.at("objective").at("J").get<double>(),
            r.manifest.reports.at("no_control").at("J").get<double>());
  const std::string summary = slurp(dir / "summary.csv");
  EXPECT_EQ(summary.substr(0, summary.find('\n')), "J,J_alpha,J_beta,J_gamma,max_div,max_vel,iter,cpu");
}

TEST(Runner, SweepPicksBestTau) {
  TempDir root;
  std::ostringstream log;
  RunConfig c = small(RunMode::kSweep);
  c.taus = {0.0, 0.5, 1.0};
  const RunResult r = run_experiment(c, root.path() / "s", log);
  const double best = r.manifest.reports.at("best_tau").get<double>();
  EXPECT_GT(best, 0.0);
  EXPECT_TRUE(check_manifest(root.path() / "s", read_manifest(root.path() / "s")).empty());
}

TEST(Runner, VerifyPasses) {
  TempDir root;
  std::ostringstream log;
  const RunResult r = run_experiment(small(RunMode::kVerify), root.path() / "v", log);
  EXPECT_TRUE(r.failed_checks.empty());
  EXPECT_NE(log.str().find("gradient check"), std::string::npos);
}

TEST(Runner, RefusesNonEmptyDirectory) {
  TempDir root;
  std::ofstream(root.path() / "x") << "1";
  std::ostringstream log;
  EXPECT_THROW(run_experiment(small(RunMode::kNone), root.path(), log), IoError);
}

TEST(Cli, ExitCodes) {
  TempDir root;
  EXPECT_EQ(run_cli("verify --gradient --mesh 20 --steps 20 --name v", root.path()), 0);
  EXPECT_TRUE(fs::exists(root.path() / "v" / "manifest.json"));
  EXPECT_EQ(run_cli("simulate --mesh 1 --name bad", root.path()), 2);
  EXPECT_EQ(run_cli("simulate --kappa x --name bad2", root.path()), 2);
  EXPECT_EQ(run_cli("optimize --mesh 30 --steps 30 --name bad3", root.path()), 2);
  EXPECT_EQ(run_cli("simulate --mesh 10 --steps 10 --name v", root.path()), 4);
  EXPECT_EQ(run_cli("simulate --initial-file /nonexistent.bin --mesh 10 --steps 10 --name f",
                    root.path()),
            4);
  EXPECT_EQ(run_cli("optimize --mesh 10 --steps 10 --max-iterations 1 --name cap", root.path()), 3);
  EXPECT_EQ(run_cli("simulate --control feedback --tau 0.75 --mesh 10 --steps 10 --name fb",
                    root.path()),
            0);
  EXPECT_EQ(read_manifest(root.path() / "fb").mode, "feedback");
  EXPECT_EQ(parse_config(read_manifest(root.path() / "fb").config).tau, 0.75);
}
