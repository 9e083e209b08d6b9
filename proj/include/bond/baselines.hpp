#pragma once

// Comparison methods: REINFORCE on the KL-regularized objective, its
// closed-form optimum, and inference-time Best-of-N sampling.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bond/optimizer.hpp"
#include "bond/outcome_space.hpp"
#include "bond/policy.hpp"
#include "bond/rng.hpp"
#include "bond/training.hpp"

namespace bond {

struct ReinforceConfig {
  double beta_rl = 0.1;
  int samples_per_prompt = 2;
  OptimizerConfig optimizer;
  std::int64_t steps = 1000;
  int batch_size = 32;
  GradMode grad_mode = GradMode::sampled;
  bool leave_one_out = true;
  std::uint64_t seed = 0;
};

void validate(const ReinforceConfig& config);

/// pi_RL(y) proportional to ref(y) exp(r(y) / beta_rl), computed with the
/// maximum exponent subtracted.
std::vector<double> analytic_rl_solution(std::span<const double> ref,
                                         std::span<const double> rewards, double beta_rl);

/// Descent direction for -(E_pi[r] - beta_rl KL(pi || ref)). Sampled mode:
/// -mean of score(y_i) * advantage_i with leave-one-out advantages; exact
/// mode: -sum_y pi(y) score(y) (r(y) - beta_rl log(pi(y) / ref(y))).
ParamVector reinforce_gradient(const TrainState& state, const ReinforceConfig& config,
                               const PromptSet& prompts);

void reinforce_update(TrainState& state, const ReinforceConfig& config, const PromptSet& prompts);

MetricOptions reinforce_metric_options();

MetricsRow reinforce_step(TrainState& state, const ReinforceConfig& config, const PromptSet& prompts);

std::vector<MetricsRow> run_reinforce(TrainState& state, const ReinforceConfig& config,
                                      const PromptSet& prompts, const LoopOptions& options = {});

/// n reference draws, returns the strict_order winner.
std::size_t best_of_n_sampler(const Policy& reference, const PromptSet& prompts,
                              std::size_t prompt, int n, Rng& rng);

}  // namespace bond
