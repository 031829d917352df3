#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rrm/errors.hpp"
#include "rrm/harness.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rrm-test-" + name);
  fs::remove_all(p);
  return p;
}

std::string error_path(const json& j) {
  try {
    rrm::parse_config(j);
  } catch (const rrm::ConfigError& e) {
    return e.path();
  }
  return "<accepted>";
}

json small_rayleigh() {
  return {{"scenario", "rayleigh-sphere"}, {"iterations", 400}, {"replications", 2}, {"seed", 11}};
}

}  // namespace

TEST(HarnessRegistry, HasAtLeastFiveScenariosAndEveryTemplateParses) {
  const auto& reg = rrm::scenario_registry();
  EXPECT_GE(reg.size(), 5u);
  for (const auto& s : reg) {
    EXPECT_FALSE(s.description.empty());
    const auto cfg = rrm::parse_config(rrm::scenario_template(s.name));
    EXPECT_EQ(cfg.scenario, s.name);
    EXPECT_NO_THROW(rrm::scenario_target(cfg)) << s.name;
  }
  EXPECT_THROW(rrm::scenario_template("nope"), rrm::InvalidArgument);
}

TEST(HarnessConfig, ErrorsCarryTheFieldPath) {
  EXPECT_EQ(error_path(json::array()), "$");
  EXPECT_EQ(error_path(json::object()), "$.scenario");
  EXPECT_EQ(error_path({{"scenario", "missing"}}), "$.scenario");

  auto j = small_rayleigh();
  j["algorithm"] = {{"method", "newton"}};
  EXPECT_EQ(error_path(j), "$.algorithm.method");

  j = small_rayleigh();
  j["oracle"] = {{"sigma", -1.0}};
  EXPECT_EQ(error_path(j), "$.oracle.sigma");

  j = small_rayleigh();
  j["oracle"] = {{"sigmaa", 1.0}};
  EXPECT_EQ(error_path(j), "$.oracle.sigmaa");

  j = small_rayleigh();
  j["iterations"] = 0;
  EXPECT_EQ(error_path(j), "$.iterations");

  j = small_rayleigh();
  j["field"] = {{"kind", "cycling"}};
  EXPECT_EQ(error_path(j), "$.field.kind");

  j = small_rayleigh();
  j["initial_point"] = {{"kind", "coords"}, {"coords", {1.0, 1.0, 0.0}}};
  EXPECT_EQ(error_path(j), "$.initial_point.coords");

  j = small_rayleigh();
  j["algorithm"] = json::array({{{"method", "rsgm"}}, {{"method", "rppm"}, {"map", "sideways"}}});
  EXPECT_EQ(error_path(j), "$.algorithm[1].map");

  j = small_rayleigh();
  j["schedule"] = {{"kind", "window"}, {"A", 1.0}, {"B", 1.0}, {"eps", 0.0}};
  EXPECT_EQ(error_path(j), "$.schedule.eps");

  // the Lyapunov audit is restricted to Hadamard manifolds
  j = small_rayleigh();
  j["diagnostics"] = {{"lyapunov", {{"base", {1.0, 0.0, 0.0}}}}};
  EXPECT_EQ(error_path(j), "$.diagnostics.lyapunov");

  // a repeated top eigenvalue has no isolated target
  j = small_rayleigh();
  j["field"] = {{"kind", "rayleigh"}, {"matrix", {{1.0, 0.0}, {0.0, 1.0}}}, {"maximize", true}};
  j["initial_point"] = {{"kind", "random"}};
  EXPECT_EQ(error_path(j), "$.field");
}

TEST(HarnessConfig, UserValuesOverrideTheTemplate) {
  auto j = small_rayleigh();
  j["schedule"] = {{"kind", "power-law"}, {"c", 0.5}, {"rho", 0.75}};
  const auto cfg = rrm::parse_config(j);
  EXPECT_EQ(cfg.iterations, 400u);
  EXPECT_EQ(cfg.replications, 2);
  EXPECT_EQ(cfg.seed, 11u);
  EXPECT_NEAR(cfg.schedule.gamma(16), 0.5 / 8.0, 1e-15);
}

TEST(HarnessRun, WorkerCountHonorsEnvironment) {
  ::setenv("RSA_THREADS", "3", 1);
  EXPECT_EQ(rrm::worker_count(10), 3);
  EXPECT_EQ(rrm::worker_count(2), 2);
  ::setenv("RSA_THREADS", "1", 1);
  EXPECT_EQ(rrm::worker_count(10), 1);
  ::setenv("RSA_THREADS", "zero", 1);
  EXPECT_GE(rrm::worker_count(10), 1);
  ::unsetenv("RSA_THREADS");
  EXPECT_GE(rrm::worker_count(4), 1);
  EXPECT_LE(rrm::worker_count(4), 4);
}

TEST(HarnessRun, ReplicationSeedsDiffer) {
  EXPECT_NE(rrm::replication_seed(1, 0), rrm::replication_seed(1, 1));
  EXPECT_NE(rrm::replication_seed(1, 0), rrm::replication_seed(2, 0));
  EXPECT_EQ(rrm::replication_seed(5, 3), rrm::replication_seed(5, 3));
}

TEST(HarnessRun, OutputsAreByteIdenticalAcrossRunsAndThreadCounts) {
  const auto cfg = rrm::parse_config(small_rayleigh());
  const auto a = scratch("repro-a"), b = scratch("repro-b");
  ::setenv("RSA_THREADS", "1", 1);
  rrm::write_outputs(cfg, rrm::run_experiment(cfg), a);
  ::setenv("RSA_THREADS", "4", 1);
  rrm::write_outputs(cfg, rrm::run_experiment(cfg), b);
  ::unsetenv("RSA_THREADS");
  for (const char* f : {"trajectory.csv", "diagnostics.csv", "verdicts.csv", "summary.json", "plot.svg"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(HarnessRun, SummaryMatchesDiagnosticsCsv) {
  const auto cfg = rrm::parse_config(small_rayleigh());
  const auto dir = scratch("summary");
  const auto res = rrm::run_experiment(cfg);
  rrm::write_outputs(cfg, res, dir);

  const std::string csv = slurp(dir / "diagnostics.csv");
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  auto lines = split(csv, '\n');
  ASSERT_TRUE(lines.back().empty());
  lines.pop_back();
  EXPECT_EQ(lines[0], "replication,n,tau,target_distance,apt_deviation,refinement_bound,picard_deviation,noise_delta");

  const json summary = json::parse(slurp(dir / "summary.json"));
  ASSERT_EQ(summary["runs"].size(), 2u);
  for (const auto& run : summary["runs"]) {
    const int r = run["replication"].get<int>();
    std::vector<std::string> last;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto cells = split(lines[i], ',');
      if (std::stoi(cells[0]) == r) last = cells;
    }
    ASSERT_EQ(last.size(), 8u);
    const auto& t = run["terminal"];
    EXPECT_EQ(t["n"].get<std::size_t>(), std::stoul(last[1]));
    EXPECT_EQ(t["n"].get<std::size_t>(), cfg.iterations);
    EXPECT_EQ(t["tau"].get<double>(), std::stod(last[2]));
    EXPECT_EQ(t["target_distance"].get<double>(), std::stod(last[3]));
    const char* keys[] = {"apt_deviation", "refinement_bound", "picard_deviation", "noise_delta"};
    for (int c = 0; c < 4; ++c) {
      if (t[keys[c]].is_null()) {
        EXPECT_TRUE(last[4 + c].empty()) << keys[c];
      } else {
        EXPECT_EQ(t[keys[c]].get<double>(), std::stod(last[4 + c])) << keys[c];
      }
    }
    EXPECT_EQ(run["verdict"]["passed"].get<bool>(), res.replications[r].verdict.passed);
  }
  EXPECT_EQ(summary["all_passed"].get<bool>(), res.all_passed());
}

TEST(HarnessRun, InvalidScheduleIsRunButFlagged) {
  auto j = small_rayleigh();
  j["schedule"] = {{"kind", "power-law"}, {"c", 0.5}, {"rho", 0.4}};
  j["replications"] = 1;
  const auto cfg = rrm::parse_config(j);
  const auto res = rrm::run_experiment(cfg);
  ASSERT_FALSE(res.warnings.empty());
  bool flagged = false;
  for (const auto& w : res.warnings) flagged |= w.find("RM-invalid") != std::string::npos;
  EXPECT_TRUE(flagged);

  const auto dir = scratch("invalid");
  rrm::write_outputs(cfg, res, dir);
  const auto lines = split(slurp(dir / "verdicts.csv"), '\n');
  EXPECT_EQ(lines[0], "replication,scenario,metric,value,final_value,threshold,passed,note");
  EXPECT_EQ(split(lines[1], ',').back(), "schedule RM-invalid");
}

TEST(HarnessRun, SvgIsEightHundredBySixHundred) {
  const std::string svg = rrm::svg_line_chart({{"a", {0, 1, 2}, {1, 0.5, 0.25}}}, "t", "x", "y");
  EXPECT_NE(svg.find("width=\"800\""), std::string::npos);
  EXPECT_NE(svg.find("height=\"600\""), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

#ifdef RRM_CLI
namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(RRM_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(HarnessCli, ExitCodes) {
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  const auto good = dir / "good.json", bad = dir / "bad.json", broken = dir / "broken.json";
  std::ofstream(good) << small_rayleigh().dump();
  auto b = small_rayleigh();
  b["oracle"] = {{"sigma", "loud"}};
  std::ofstream(bad) << b.dump();
  std::ofstream(broken) << "{ not json";

  EXPECT_EQ(cli("validate " + good.string()), 0);
  EXPECT_EQ(cli("validate " + bad.string()), 2);
  EXPECT_EQ(cli("validate " + broken.string()), 2);
  EXPECT_EQ(cli("validate " + (dir / "absent.json").string()), 2);
  EXPECT_EQ(cli("list-scenarios"), 0);
  EXPECT_EQ(cli("run " + bad.string()), 2);
  EXPECT_EQ(cli("frobnicate"), 2);

  const auto listing = dir / "list.json";
  ASSERT_EQ(std::system((std::string(RRM_CLI) + " list-scenarios --json > " + listing.string()).c_str()), 0);
  const json arr = json::parse(slurp(listing));
  EXPECT_EQ(arr.size(), rrm::scenario_registry().size());
  EXPECT_TRUE(arr[0].contains("name"));
}

TEST(HarnessCli, RunWritesOutputsAndReportsVerdicts) {
  const auto dir = scratch("cli-run");
  fs::create_directories(dir);
  const auto cfg = dir / "cfg.json";
  // zero noise from the template start converges well inside 400 states
  auto j = small_rayleigh();
  j["oracle"] = {{"sigma", 0.0}};
  std::ofstream(cfg) << j.dump();
  EXPECT_EQ(cli("run " + cfg.string() + " --out " + (dir / "out").string() + " --reps 1 --seed 3"), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "verdicts.csv"));
  const json summary = json::parse(slurp(dir / "out" / "summary.json"));
  EXPECT_EQ(summary["seed"].get<std::uint64_t>(), 3u);
  EXPECT_EQ(summary["replications"].get<int>(), 1);
}

TEST(HarnessCli, RuntimeFailureExitsThree) {
  const auto dir = scratch("cli-fail");
  fs::create_directories(dir);
  const auto cfg = dir / "cfg.json";
  // a contraction-violating proximal step: gamma L >= 1 with a tiny Picard budget
  auto j = small_rayleigh();
  j["algorithm"] = {{"method", "rppm"}, {"ppm", {{"max_iters", 1}}}};
  j["schedule"] = {{"kind", "power-law"}, {"c", 5.0}, {"rho", 1.0}};
  std::ofstream(cfg) << j.dump();
  EXPECT_EQ(cli("run " + cfg.string() + " --out " + (dir / "out").string()), 3);
}
#endif
