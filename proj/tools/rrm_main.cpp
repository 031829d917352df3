// rrm: command line front end of the experiment harness.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rrm/errors.hpp"
#include "rrm/harness.hpp"
#include "rrm/io.hpp"

namespace {

constexpr int kExitVerdictFailed = 1;
constexpr int kExitSchema = 2;
constexpr int kExitRuntime = 3;

int cmd_run(const std::string& path, const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed,
            const std::optional<int>& reps) {
  rrm::ExperimentConfig cfg;
  try {
    cfg = rrm::load_config(path);
    if (reps && *reps < 1) throw rrm::ConfigError("--reps", "must be >= 1");
  } catch (const rrm::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSchema;
  }
  if (seed) cfg.seed = *seed;
  if (reps) cfg.replications = *reps;
  const std::string dir = out ? *out : (cfg.out_dir.empty() ? "rrm-out/" + cfg.scenario : cfg.out_dir);

  rrm::ExperimentResult res;
  try {
    res = rrm::run_experiment(cfg);
  } catch (const rrm::IterateError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
  try {
    rrm::write_outputs(cfg, res, dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }

  if (cfg.diagnostics.verdict) {
    for (const auto& r : res.replications) {
      std::cout << "replication " << r.replication << ": " << r.verdict.metric << " = "
                << rrm::format_double(r.verdict.value) << " (threshold " << rrm::format_double(r.verdict.threshold)
                << ") " << (r.verdict.passed ? "pass" : "FAIL") << '\n';
    }
  }
  std::cout << "outputs written to " << dir << '\n';
  return res.all_passed() ? 0 : kExitVerdictFailed;
}

int cmd_list(bool as_json) {
  const auto& reg = rrm::scenario_registry();
  if (as_json) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : reg) {
      arr.push_back({{"name", s.name}, {"description", s.description}, {"verdict", s.verdict}});
    }
    std::cout << arr.dump(2) << '\n';
    return 0;
  }
  std::size_t w = 0;
  for (const auto& s : reg) w = std::max(w, s.name.size());
  for (const auto& s : reg) {
    std::cout << s.name << std::string(w + 2 - s.name.size(), ' ') << s.description << "  [" << s.verdict << "]\n";
  }
  return 0;
}

int cmd_validate(const std::string& path) {
  try {
    const auto cfg = rrm::load_config(path);
    std::cout << "ok: " << cfg.scenario << " on " << cfg.scheme.manifold().id() << ", " << cfg.iterations
              << " iterations x " << cfg.replications << " replication(s), " << cfg.schedule.describe() << '\n';
    return 0;
  } catch (const rrm::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSchema;
  }
}

int cmd_template(const std::string& name) {
  try {
    std::cout << rrm::scenario_template(name).dump(2) << '\n';
    return 0;
  } catch (const rrm::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSchema;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian Robbins-Monro experiment runner"};
  app.require_subcommand(1);

  std::string run_config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", run_config, "JSON config")->required();
  run->add_option("--out", out, "output directory");
  run->add_option("--seed", seed, "master seed override");
  run->add_option("--reps", reps, "replication count override");

  bool as_json = false;
  auto* list = app.add_subcommand("list-scenarios", "list registered scenarios");
  list->add_flag("--json", as_json, "machine-readable output");

  std::string validate_config;
  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("config", validate_config, "JSON config")->required();

  std::string template_name;
  auto* tmpl = app.add_subcommand("template", "print the default config of a scenario");
  tmpl->add_option("scenario", template_name, "scenario name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitSchema;
  }

  if (*run) return cmd_run(run_config, out, seed, reps);
  if (*list) return cmd_list(as_json);
  if (*validate) return cmd_validate(validate_config);
  return cmd_template(template_name);
}
