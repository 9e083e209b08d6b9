#pragma once

// BOND: distill the Best-of-N distribution of an anchor policy by
// minimizing the Jeffreys divergence J^beta(pi || pi_BoN), and its
// iterative variant with a periodically refreshed anchor.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "bond/bon_exact.hpp"
#include "bond/optimizer.hpp"
#include "bond/outcome_space.hpp"
#include "bond/policy.hpp"
#include "bond/rng.hpp"
#include "bond/training.hpp"

namespace bond {

/// Reward used by the sampled backward term: log of the MC quantile, or
/// the raw quantile estimate.
enum class RewardForm { log_quantile, raw_quantile };
enum class Baseline { none, batch_mean };
enum class QuantileSource { monte_carlo, learned };

RewardForm parse_reward_form(std::string_view name);
Baseline parse_baseline(std::string_view name);
QuantileSource parse_quantile_source(std::string_view name);
const char* to_string(RewardForm form);
const char* to_string(Baseline baseline);
const char* to_string(QuantileSource source);

struct BondConfig {
  int n = 8;
  double beta = 0.5;
  int k_mc = 16;
  int batch_size = 32;
  OptimizerConfig optimizer;
  std::int64_t steps = 1000;
  GradMode grad_mode = GradMode::exact;
  RewardForm reward_form = RewardForm::log_quantile;
  Baseline baseline = Baseline::batch_mean;
  std::int64_t anchor_update_period = 1000;
  QuantileSource quantile_source = QuantileSource::monte_carlo;
  double quantile_learning_rate = 0.2;
  std::uint64_t seed = 0;
};

/// Throws InvalidArgument naming the first violated bound.
void validate(const BondConfig& config);

struct GradientBatch {
  ParamVector forward_term;
  ParamVector backward_term;
  ParamVector combined;  // (1 - beta) forward + beta backward
};

/// log pi_BoN(y) for every y, from the factored form (no underflow).
std::vector<double> log_bon_probs(const BonDistribution& bd);

/// Exact -sum_y pi_BoN(y) score(y) with pi_BoN = Best-of-n(anchor).
ParamVector forward_kl_grad(const Policy& policy, const Policy& anchor, const PromptSet& prompts,
                            std::size_t prompt, int n);

/// -score(winner) for the strict_order winner of n anchor draws.
ParamVector forward_kl_grad(const Policy& policy, const Policy& anchor, const PromptSet& prompts,
                            std::size_t prompt, int n, Rng& rng);

/// Exact sum_y pi(y) score(y) (log pi(y) - log pi_BoN(y)): the gradient of
/// KL(pi || Best-of-n(anchor)).
ParamVector backward_kl_grad(const Policy& policy, const Policy& anchor, const PromptSet& prompts,
                             std::size_t prompt, int n);

struct SampledBackwardOptions {
  int k_mc = 16;
  RewardForm reward_form = RewardForm::log_quantile;
  Baseline baseline = Baseline::batch_mean;
  int batch_size = 1;  // policy samples of this prompt
};

/// Policy-gradient estimate with MC quantile rewards (correction factor omitted):
/// mean over the batch of -(n-1) score(y) (R(y) - B) with
/// R = reward_form(p_hat(y)) - beta_BOND (log pi(y) - log anchor(y)).
ParamVector backward_kl_grad(const Policy& policy, const Policy& anchor, const PromptSet& prompts,
                             std::size_t prompt, int n, const SampledBackwardOptions& options,
                             Rng& rng);

/// The same exact gradient written as -(n-1) times the REINFORCE gradient
/// of the KL-regularized objective with reward r_BOND and strength
/// beta_BOND relative to the anchor.
ParamVector reinforce_form_backward_grad(const Policy& policy, const Policy& anchor,
                                         const PromptSet& prompts, std::size_t prompt, int n);

/// Both gradient terms for the step `state.step`, averaged over the batch
/// (all prompts in exact mode). Learned quantiles update
/// `state.quantile_model`.
GradientBatch bond_gradient(TrainState& state, const BondConfig& config, const PromptSet& prompts);

/// One optimizer update on the combined gradient; increments state.step.
void bond_update(TrainState& state, const BondConfig& config, const PromptSet& prompts);

MetricOptions bond_metric_options(const BondConfig& config);

/// bond_update followed by exact metrics against Best-of-n(anchor).
MetricsRow bond_step(TrainState& state, const BondConfig& config, const PromptSet& prompts);

/// Runs `total_steps` BOND steps; after every `anchor_update_period` steps
/// the anchor is replaced by the current policy. Rows are logged before
/// the anchor update of the same step.
std::vector<MetricsRow> iterative_bond(TrainState& state, const BondConfig& config,
                                       const PromptSet& prompts, std::int64_t total_steps,
                                       const LoopOptions& options = {});

/// Non-iterative BOND: the anchor stays at its initial value.
std::vector<MetricsRow> run_bond(TrainState& state, const BondConfig& config,
                                 const PromptSet& prompts, std::int64_t total_steps,
                                 const LoopOptions& options = {});

}  // namespace bond
