#pragma once

// State and metrics shared by the BOND, J-BOND and REINFORCE loops.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "bond/optimizer.hpp"
#include "bond/outcome_space.hpp"
#include "bond/policy.hpp"
#include "bond/quantile.hpp"

namespace bond {

enum class GradMode { exact, sampled };

GradMode parse_grad_mode(std::string_view name);
const char* to_string(GradMode mode);

struct TrainState {
  Policy policy;
  Policy anchor;
  Policy reference;
  OptimizerState optimizer;
  std::int64_t step = 0;
  QuantileModel quantile_model;  // empty unless learned quantiles are used

  /// policy = anchor = reference.
  static TrainState start(const Policy& reference);
};

/// Exact evaluation of the training policy after a step. Optional fields
/// are not defined for every algorithm and are written as empty CSV cells.
struct MetricsRow {
  std::int64_t step = 0;
  double reward_mean = 0.0;        // E_pi[r]
  double log_quantile_mean = 0.0;  // E_pi[log p_leq(y)], quantile under pi_ref
  double kl_to_ref = 0.0;          // KL(pi || pi_ref)
  std::optional<double> fwd_kl_to_bon;  // KL(pi_BoN(anchor) || pi)
  std::optional<double> bwd_kl_to_bon;  // KL(pi || pi_BoN(anchor))
  std::optional<double> jeffreys;
  std::optional<double> kl_to_anchor;   // KL(pi || anchor)
};

/// What to measure besides reward, log-quantile and KL to the reference.
struct MetricOptions {
  std::optional<int> bon_n;  // Best-of-n of the anchor as distillation target
  double jeffreys_beta = 0.5;
  bool with_anchor = true;
};

/// Every quantity is averaged uniformly over prompts.
MetricsRow compute_metrics(const PromptSet& prompts, const Policy& policy, const Policy& anchor,
                           const Policy& reference, std::int64_t step, const MetricOptions& options);

using StepObserver = std::function<void(const TrainState&, const MetricsRow&)>;

struct LoopOptions {
  std::int64_t eval_every = 1;
  StepObserver observer;  // called with every logged row
};

/// True when metrics are logged after completing `step` (1-based) of `total`.
bool is_eval_step(std::int64_t step, std::int64_t total, std::int64_t eval_every);

/// Round-robin prompt assignment of batch slots: slot b of step t gets
/// prompt (t * batch + b) mod |prompts|.
std::vector<std::size_t> batch_prompts(std::int64_t step, std::size_t batch_size,
                                       std::size_t prompt_count);

/// Mean of the other entries (leave-one-out); zero for a batch of one.
std::vector<double> leave_one_out_means(const std::vector<double>& values);

}  // namespace bond
