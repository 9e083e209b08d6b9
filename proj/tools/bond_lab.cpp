// bond_lab: run experiments, sweeps, Pareto extraction, scenario generation
// and the verification suite.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bond/acceptance.hpp"
#include "bond/error.hpp"
#include "bond/experiment.hpp"
#include "bond/pareto.hpp"
#include "bond/runner.hpp"
#include "bond/scenario.hpp"

namespace fs = std::filesystem;

namespace {

void report(const bond::ExperimentOutput& out) {
  for (const auto& s : out.seeds) std::cout << "seed " << s.seed << ": " << s.csv.string() << " (" << s.rows << " rows)\n";
  std::cout << "manifest: " << out.manifest.string() << "\n";
}

int cmd_run(const fs::path& config_path, const std::string& out_override) {
  auto config = bond::load_experiment_config(config_path);
  if (!out_override.empty()) config.output = out_override;
  report(bond::run_experiment(config, bond::worker_count_from_env()));
  return 0;
}

int cmd_sweep(const fs::path& dir) {
  for (const auto& out : bond::run_sweep(dir, bond::worker_count_from_env())) report(out);
  return 0;
}

int cmd_pareto(const std::vector<fs::path>& csvs, const fs::path& out) {
  auto points = bond::load_pareto_points(csvs);
  bond::mark_front(points);
  bond::save_pareto_csv(out, points);
  std::size_t front = 0;
  for (const auto& p : points) front += p.non_dominated;
  std::cout << points.size() << " points, " << front << " non-dominated -> " << out.string() << "\n";
  return 0;
}

int cmd_gen_scenario(const std::string& name, const std::vector<std::string>& kv, std::uint64_t seed,
                     const fs::path& out) {
  bond::ScenarioParams params;
  for (const auto& item : kv) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw bond::ConfigError("scenario parameter '" + item + "' is not key=value");
    params[item.substr(0, eq)] = item.substr(eq + 1);
  }
  const auto sc = bond::generate_scenario(name, params, seed);
  bond::save_scenario(out, sc);
  std::cout << name << " scenario (" << sc.prompts.size() << " prompts) -> " << out.string() << "\n";
  return 0;
}

int cmd_verify() {
  int failures = 0;
  auto emit = [&](const bond::CriterionResult& r) {
    std::cout << bond::format_result(r) << std::endl;
    failures += !r.passed;
  };
  for (int id : bond::verify_criteria()) emit(bond::run_criterion(id));
  for (const auto& r : bond::run_invariant_checks()) emit(r);
  std::cout << (failures ? std::to_string(failures) + " check(s) failed" : std::string("all checks passed")) << "\n";
  return failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BOND distillation lab on enumerable toy policies"};
  app.require_subcommand(1);

  fs::path config_path, sweep_dir, pareto_out, scenario_out;
  std::string run_out, scenario_name;
  std::vector<fs::path> csvs;
  std::vector<std::string> scenario_params;
  std::uint64_t scenario_seed = 0;

  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("config", config_path, "INI config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Override the output directory");

  auto* sweep = app.add_subcommand("sweep", "Run every *.ini in a directory");
  sweep->add_option("dir", sweep_dir, "Config directory")->required()->check(CLI::ExistingDirectory);

  auto* pareto = app.add_subcommand("pareto", "Flag non-dominated (kl_to_ref, reward_mean) points");
  pareto->add_option("csv", csvs, "Metric CSVs")->required()->check(CLI::ExistingFile);
  pareto->add_option("--out", pareto_out, "Output CSV")->required();

  auto* verify = app.add_subcommand("verify", "Run the oracle and property suite");

  auto* gen = app.add_subcommand("gen-scenario", "Write a generated scenario to disk");
  gen->add_option("name", scenario_name, "random | peaked | tied | file")->required();
  gen->add_option("params", scenario_params, "Generator parameters as key=value");
  gen->add_option("--seed", scenario_seed, "Scenario seed");
  gen->add_option("--out", scenario_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, run_out);
    if (*sweep) return cmd_sweep(sweep_dir);
    if (*pareto) return cmd_pareto(csvs, pareto_out);
    if (*verify) return cmd_verify();
    if (*gen) return cmd_gen_scenario(scenario_name, scenario_params, scenario_seed, scenario_out);
  } catch (const std::exception& e) {
    std::cerr << "bond_lab: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
