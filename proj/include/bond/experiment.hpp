#pragma once

// Experiment configuration files.
//
// INI-style text with sections. Recognized layout:
//
//   [experiment]  name, algorithm (bond | iterative_bond | jbond | reinforce),
//                 seeds (comma list), eval_every, output, checkpoints
//   [scenario]    generator, seed (optional; defaults to the run seed), plus
//                 the generator's own parameters
//   [<algorithm>] the algorithm block; its section name must equal the
//                 algorithm name
//
// Every key outside this layout is an error; all offending keys are
// reported together.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bond/baselines.hpp"
#include "bond/bond_trainer.hpp"
#include "bond/jbond.hpp"
#include "bond/scenario.hpp"

namespace bond {

enum class Algorithm { bond, iterative_bond, jbond, reinforce };

Algorithm parse_algorithm(std::string_view name);
const char* to_string(Algorithm algorithm);

struct ExperimentConfig {
  std::string name = "experiment";
  Algorithm algorithm = Algorithm::bond;
  std::vector<std::uint64_t> seeds{0};
  std::int64_t eval_every = 1;
  std::filesystem::path output = "out";
  bool checkpoints = false;

  std::string scenario = "random";
  ScenarioParams scenario_params;
  std::optional<std::uint64_t> scenario_seed;

  BondConfig bond;  // also used by iterative_bond
  JBondConfig jbond;
  ReinforceConfig reinforce;

  /// FNV-1a of the canonical "section.key=value" listing.
  std::uint64_t hash = 0;

  std::int64_t steps() const;
  std::uint64_t scenario_seed_for(std::uint64_t run_seed) const {
    return scenario_seed.value_or(run_seed);
  }
};

/// Relative `output` paths are resolved against `base_dir`.
ExperimentConfig parse_experiment_config(std::istream& in,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

std::string hash_hex(std::uint64_t hash);

}  // namespace bond
