#pragma once

// Seeded experiment orchestration: one CSV per seed, a JSON manifest, and
// optional policy/anchor checkpoints at every logged step.
//
// Output layout under config.output:
//   seed_<s>.csv
//   seed_<s>/step_<t>.policy.ckpt, seed_<s>/step_<t>.anchor.ckpt  (checkpoints = true)
//   manifest.json

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "bond/experiment.hpp"
#include "bond/scenario.hpp"
#include "bond/training.hpp"

namespace bond {

/// Version string recorded in manifests.
const char* code_version();

/// BOND_WORKERS from the environment; 1 when unset. Throws ConfigError on
/// a value that is not a positive integer.
int worker_count_from_env();

/// Runs one seed in memory. The observer sees every logged row.
std::vector<MetricsRow> run_seed(const ExperimentConfig& config, std::uint64_t seed,
                                 const StepObserver& observer = {});

/// The scenario a seed of this config trains on.
Scenario scenario_for(const ExperimentConfig& config, std::uint64_t seed);

struct SeedOutput {
  std::uint64_t seed = 0;
  std::filesystem::path csv;
  std::size_t rows = 0;
};

struct ExperimentOutput {
  std::filesystem::path manifest;
  std::vector<SeedOutput> seeds;
};

/// Seeds run on up to `workers` threads; each run owns its files.
ExperimentOutput run_experiment(const ExperimentConfig& config, int workers = 1);

/// Every *.ini directly inside `dir`, in lexicographic order; configs run
/// on up to `workers` threads.
std::vector<ExperimentOutput> run_sweep(const std::filesystem::path& dir, int workers = 1);

/// Calls job(i) for i in [0, count) on up to `workers` threads. The first
/// exception is rethrown after all workers finish.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job);

}  // namespace bond
