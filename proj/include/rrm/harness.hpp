#pragma once

// Experiment runner behind the `rrm` command line tool: JSON configs,
// the scenario registry, batch execution over replications and CSV/SVG output.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "rrm/diagnostics.hpp"
#include "rrm/dynamics.hpp"

namespace rrm {

/// Schema violation; `path` is a JSON path such as "$.oracle.sigma".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::invalid_argument(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

struct InitialPoint {
  enum class Kind { kCoords, kRandom, kLatitude } kind = Kind::kCoords;
  Vec coords;           // kCoords
  double radius = 1.0;  // kRandom: random_point radius
  double z = 0.0;       // kLatitude: (sqrt(1 - z^2), 0, ..., z) on a sphere
};

struct AptOptions {
  double horizon = 1.0;
  int grid_per_unit = 200;
  FlowScheme scheme = FlowScheme::kGeodesicRK4;
  double h_step = 0.0;  // <= 0 selects default_h_step per probe
};

struct LyapunovOptions {
  Vec base;
  double radius = 1.0;
  int replications = 200;
  int audited = 20;
};

struct DiagnosticsOptions {
  int probes = 20;
  std::optional<AptOptions> apt;
  bool picard = false;
  double picard_micro_step = 0.0;  // <= 0: same rule as the flow micro-step
  std::optional<double> noise_delta_horizon;
  std::optional<LyapunovOptions> lyapunov;
  bool verdict = true;
  double threshold = 0.05;
};

struct ExperimentConfig {
  std::string scenario;
  nlohmann::json source;  // the merged config, as read
  Scheme scheme;
  StepSchedule schedule = StepSchedule::power_law(1.0, 1.0);
  InitialPoint initial;
  std::size_t iterations = 1;
  std::uint64_t seed = 0;
  int replications = 1;
  std::string out_dir;
  std::size_t csv_stride = 1;
  bool plot = true;
  DiagnosticsOptions diagnostics;
};

struct ScenarioInfo {
  std::string name;
  std::string description;
  std::string verdict;  // kind of target set used by the verdict
};

const std::vector<ScenarioInfo>& scenario_registry();
/// A complete config for `name`; throws InvalidArgument for unknown names.
nlohmann::json scenario_template(const std::string& name);

/// Merges `config` over the template of its scenario and validates it.
/// Throws ConfigError with the path of the first offending field.
ExperimentConfig parse_config(const nlohmann::json& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Verdict target of the configured scenario.
ScenarioTarget scenario_target(const ExperimentConfig& config);

/// Seed of replication r.
std::uint64_t replication_seed(std::uint64_t master, int replication);
Vec initial_point(const ExperimentConfig& config, int replication);

/// Worker threads: RSA_THREADS if set (>= 1), else the hardware concurrency, capped by `jobs`.
int worker_count(int jobs);

struct ReplicationResult {
  int replication = 0;
  Trajectory trajectory;
  ConvergenceVerdict verdict;
  ErrorBoundsAudit error_audit;
  std::optional<SupermartingaleReport> lyapunov;
  struct Probe {
    std::size_t n = 0;
    double tau = 0.0;
    double target_distance = 0.0;
    std::optional<double> apt;
    std::optional<double> refinement_bound;
    std::optional<double> picard;
    std::optional<double> noise_delta;
  };
  std::vector<Probe> probes;  // the last one is the terminal row
};

struct ExperimentResult {
  std::vector<ReplicationResult> replications;  // sorted by replication id
  ScheduleClass schedule;
  std::vector<std::string> warnings;
  bool all_passed() const;
};

/// Runs every replication (in parallel) and, if out_dir is non-empty, writes
/// trajectory.csv, diagnostics.csv, verdicts.csv, summary.json and plot.svg.
/// Algorithm failures propagate as IterateError.
ExperimentResult run_experiment(const ExperimentConfig& config);

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result,
                   const std::filesystem::path& out_dir);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// 800x600 SVG line chart.
std::string svg_line_chart(const std::vector<PlotSeries>& series, const std::string& title, const std::string& x_label,
                           const std::string& y_label);

}  // namespace rrm
