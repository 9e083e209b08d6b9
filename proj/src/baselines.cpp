#include "bond/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "bond/error.hpp"

namespace bond {

void validate(const ReinforceConfig& c) {
  if (!(c.beta_rl > 0.0)) throw InvalidArgument("reinforce: beta_rl must be > 0");
  if (c.samples_per_prompt < 1) throw InvalidArgument("reinforce: samples_per_prompt must be >= 1");
  if (c.leave_one_out && c.grad_mode == GradMode::sampled && c.samples_per_prompt < 2) {
    throw InvalidArgument("reinforce: leave-one-out baseline needs samples_per_prompt >= 2");
  }
  if (c.batch_size < 1) throw InvalidArgument("reinforce: batch_size must be >= 1");
  if (c.steps < 0) throw InvalidArgument("reinforce: steps must be >= 0");
  if (c.optimizer.learning_rate < 0.0) throw InvalidArgument("reinforce: learning_rate must be >= 0");
}

std::vector<double> analytic_rl_solution(std::span<const double> ref,
                                         std::span<const double> rewards, double beta_rl) {
  if (!(beta_rl > 0.0)) throw InvalidArgument("analytic_rl_solution: beta_rl must be > 0");
  if (ref.size() != rewards.size()) throw ShapeMismatch("analytic_rl_solution: size mismatch");
  std::vector<double> logits(ref.size());
  for (std::size_t y = 0; y < ref.size(); ++y) logits[y] = std::log(ref[y]) + rewards[y] / beta_rl;
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - top);
    total += l;
  }
  for (double& l : logits) l /= total;
  return logits;
}

ParamVector reinforce_gradient(const TrainState& state, const ReinforceConfig& config,
                               const PromptSet& prompts) {
  validate(config);
  const Policy& policy = state.policy;
  const Policy& ref = state.reference;
  ParamVector grad{policy.layout(), std::vector<double>(policy.layout().total, 0.0)};

  if (config.grad_mode == GradMode::exact) {
    const double w = 1.0 / static_cast<double>(prompts.size());
    for (std::size_t p = 0; p < prompts.size(); ++p) {
      const auto log_pi = policy.log_probabilities(p);
      const auto log_ref = ref.log_probabilities(p);
      std::vector<double> weights(log_pi.size());
      for (std::size_t y = 0; y < weights.size(); ++y) {
        const double ret = prompts[p].rewards[y] - config.beta_rl * (log_pi[y] - log_ref[y]);
        weights[y] = -w * std::exp(log_pi[y]) * ret;
      }
      policy.add_weighted_scores(p, weights, grad.values);
    }
    return grad;
  }

  const auto slots = batch_prompts(state.step, static_cast<std::size_t>(config.batch_size), prompts.size());
  const std::uint64_t step_seed = derive_seed(config.seed, static_cast<std::uint64_t>(state.step));
  const auto per_prompt = static_cast<std::size_t>(config.samples_per_prompt);
  const double w = 1.0 / static_cast<double>(slots.size() * per_prompt);
  for (std::size_t b = 0; b < slots.size(); ++b) {
    Rng rng(derive_seed(step_seed, b));
    const std::size_t p = slots[b];
    const auto ys = policy.sample(p, rng, per_prompt);
    std::vector<double> returns(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) {
      returns[i] = prompts[p].rewards[ys[i]] -
                   config.beta_rl * (policy.log_prob(p, ys[i]) - ref.log_prob(p, ys[i]));
    }
    std::vector<double> baseline(ys.size(), 0.0);
    if (config.leave_one_out) baseline = leave_one_out_means(returns);
    for (std::size_t i = 0; i < ys.size(); ++i) {
      policy.add_score(p, ys[i], -w * (returns[i] - baseline[i]), grad.values);
    }
  }
  return grad;
}

void reinforce_update(TrainState& state, const ReinforceConfig& config, const PromptSet& prompts) {
  const ParamVector grad = reinforce_gradient(state, config, prompts);
  apply_update(config.optimizer, state.optimizer, state.policy.mutable_params(), grad.values);
  ++state.step;
}

MetricOptions reinforce_metric_options() {
  MetricOptions m;
  m.with_anchor = false;
  return m;
}

MetricsRow reinforce_step(TrainState& state, const ReinforceConfig& config, const PromptSet& prompts) {
  reinforce_update(state, config, prompts);
  return compute_metrics(prompts, state.policy, state.anchor, state.reference, state.step,
                         reinforce_metric_options());
}

std::vector<MetricsRow> run_reinforce(TrainState& state, const ReinforceConfig& config,
                                      const PromptSet& prompts, const LoopOptions& options) {
  validate(config);
  if (options.eval_every < 1) throw InvalidArgument("eval_every must be >= 1");
  std::vector<MetricsRow> rows;
  for (std::int64_t t = 1; t <= config.steps; ++t) {
    reinforce_update(state, config, prompts);
    if (is_eval_step(t, config.steps, options.eval_every)) {
      rows.push_back(compute_metrics(prompts, state.policy, state.anchor, state.reference,
                                     state.step, reinforce_metric_options()));
      if (options.observer) options.observer(state, rows.back());
    }
  }
  return rows;
}

std::size_t best_of_n_sampler(const Policy& reference, const PromptSet& prompts,
                              std::size_t prompt, int n, Rng& rng) {
  if (n < 1) throw InvalidArgument("best_of_n_sampler: n must be >= 1");
  const auto draws = reference.sample(prompt, rng, static_cast<std::size_t>(n));
  return best_of(prompts[prompt].rewards, draws);
}

}  // namespace bond
