#pragma once

// J-BOND: one policy sample and two anchor samples per prompt, the
// two-sample calibrated reward, an EMA anchor and an extra KL term toward
// the anchor.

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "bond/optimizer.hpp"
#include "bond/outcome_space.hpp"
#include "bond/policy.hpp"
#include "bond/training.hpp"

namespace bond {

/// -log(16): E[reward] equals log p_leq at the median p_leq = 0.5.
inline constexpr double kJBondPenalty = -4.0 * std::numbers::ln2;

struct JBondConfig {
  double beta = 0.5;
  double eta = 0.02;
  double gamma = 0.0;
  OptimizerConfig optimizer;
  std::int64_t steps = 1000;
  int batch_size = 32;
  bool use_baseline = true;
  /// Penalty for a policy sample worse than both anchor samples.
  double alpha = kJBondPenalty;
  /// Penalize r(y) <= min instead of r(y) < min.
  bool non_strict_reward = false;
  /// > 0: replace the EMA with a hard anchor <- policy every this many steps.
  std::int64_t anchor_update_period = 0;
  std::uint64_t seed = 0;
};

void validate(const JBondConfig& config);

struct JBondSample {
  std::size_t prompt = 0;
  std::size_t y = 0;
  std::size_t anchor1 = 0;
  std::size_t anchor2 = 0;
  double reward_y = 0.0;
  double reward_anchor1 = 0.0;
  double reward_anchor2 = 0.0;
};

/// alpha if r(y) < min(r(y1'), r(y2')), else 0.
double jbond_reward(const JBondSample& sample, double alpha = kJBondPenalty,
                    bool non_strict = false);

/// alpha (1 - p_leq)^2: the expectation of jbond_reward over the two anchor
/// draws for tie-free rewards.
double jbond_reward_expectation(double p_leq, double alpha = kJBondPenalty);

/// Batch-averaged (1 - beta) G_FW + beta G_BW + gamma G_Reg for the step
/// `state.step`; does not modify the state.
ParamVector jbond_gradient(const TrainState& state, const JBondConfig& config,
                           const PromptSet& prompts);

/// Optimizer update followed by the anchor update; increments state.step.
void jbond_update(TrainState& state, const JBondConfig& config, const PromptSet& prompts);

MetricOptions jbond_metric_options(const JBondConfig& config);

MetricsRow jbond_step(TrainState& state, const JBondConfig& config, const PromptSet& prompts);

/// Full loop from policy = anchor = reference; deterministic per config.seed.
std::vector<MetricsRow> run_jbond(const JBondConfig& config, const PromptSet& prompts,
                                  const Policy& reference, const LoopOptions& options = {});

/// Same loop continuing from an existing state.
std::vector<MetricsRow> run_jbond(TrainState& state, const JBondConfig& config,
                                  const PromptSet& prompts, const LoopOptions& options = {});

}  // namespace bond
