#pragma once

// Seeded toy problems: a prompt set with reward tables and a reference
// policy. Built-in generators are `random`, `peaked` and `tied`; `file`
// loads a reward table (and optionally a reference checkpoint) from disk.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "bond/outcome_space.hpp"
#include "bond/policy.hpp"

namespace bond {

/// Generator parameters as text, e.g. {"prompts", "4"}.
using ScenarioParams = std::map<std::string, std::string>;

struct Scenario {
  std::string name;
  ScenarioParams params;
  std::uint64_t seed = 0;
  PromptSet prompts;
  Policy reference;
};

/// Common parameters (defaults in parentheses):
///   prompts (4), vocab_size (4), max_len (1), reference_scale (1.0),
///   policy_kind (categorical | autoregressive, categorical).
/// peaked: peak_mass (0.05), the reference-probability ceiling of the
///   single best outcome. tied: dup (2), outcomes per reward value.
/// file: rewards (path), reference (optional checkpoint path).
/// Unknown names or parameters throw ConfigError.
Scenario generate_scenario(const std::string& name, const ScenarioParams& params,
                           std::uint64_t seed);

/// Writes rewards.csv and reference.ckpt into `dir` (created if needed).
void save_scenario(const std::filesystem::path& dir, const Scenario& scenario);

}  // namespace bond
