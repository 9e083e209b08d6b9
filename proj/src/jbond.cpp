#include "bond/jbond.hpp"

#include <string>

#include "bond/error.hpp"
#include "bond/rng.hpp"

namespace bond {

void validate(const JBondConfig& c) {
  if (!(c.beta >= 0.0 && c.beta <= 1.0)) throw InvalidArgument("jbond: beta must lie in [0, 1]");
  if (!(c.eta >= 0.0 && c.eta <= 1.0)) throw InvalidArgument("jbond: eta must lie in [0, 1]");
  if (!(c.gamma >= 0.0)) throw InvalidArgument("jbond: gamma must be >= 0");
  if (c.batch_size < 1) throw InvalidArgument("jbond: batch_size must be >= 1");
  if (c.steps < 0) throw InvalidArgument("jbond: steps must be >= 0");
  if (c.optimizer.learning_rate < 0.0) throw InvalidArgument("jbond: learning_rate must be >= 0");
  if (c.anchor_update_period < 0) throw InvalidArgument("jbond: anchor_update_period must be >= 0");
}

double jbond_reward(const JBondSample& s, double alpha, bool non_strict) {
  const double lowest = std::min(s.reward_anchor1, s.reward_anchor2);
  const bool worse = non_strict ? s.reward_y <= lowest : s.reward_y < lowest;
  return worse ? alpha : 0.0;
}

double jbond_reward_expectation(double p_leq, double alpha) {
  if (!(p_leq >= 0.0 && p_leq <= 1.0)) throw InvalidArgument("p_leq must lie in [0, 1]");
  return alpha * (1.0 - p_leq) * (1.0 - p_leq);
}

ParamVector jbond_gradient(const TrainState& state, const JBondConfig& config,
                           const PromptSet& prompts) {
  validate(config);
  const Policy& policy = state.policy;
  const Policy& anchor = state.anchor;
  ParamVector grad{policy.layout(), std::vector<double>(policy.layout().total, 0.0)};
  const auto slots = batch_prompts(state.step, static_cast<std::size_t>(config.batch_size), prompts.size());
  const std::uint64_t step_seed = derive_seed(config.seed, static_cast<std::uint64_t>(state.step));

  std::vector<JBondSample> samples(slots.size());
  std::vector<double> returns(slots.size());
  std::vector<double> log_ratio(slots.size());
  for (std::size_t b = 0; b < slots.size(); ++b) {
    Rng rng(derive_seed(step_seed, b));
    JBondSample& s = samples[b];
    const auto& rewards = prompts[slots[b]].rewards;
    s.prompt = slots[b];
    s.y = policy.sample_one(s.prompt, rng);
    s.anchor1 = anchor.sample_one(s.prompt, rng);
    s.anchor2 = anchor.sample_one(s.prompt, rng);
    s.reward_y = rewards[s.y];
    s.reward_anchor1 = rewards[s.anchor1];
    s.reward_anchor2 = rewards[s.anchor2];
    log_ratio[b] = policy.log_prob(s.prompt, s.y) - anchor.log_prob(s.prompt, s.y);
    returns[b] = jbond_reward(s, config.alpha, config.non_strict_reward) - log_ratio[b];
  }
  std::vector<double> baseline(slots.size(), 0.0);
  if (config.use_baseline) baseline = leave_one_out_means(returns);

  const double w = 1.0 / static_cast<double>(slots.size());
  for (std::size_t b = 0; b < slots.size(); ++b) {
    const JBondSample& s = samples[b];
    const std::size_t pair[2] = {s.anchor1, s.anchor2};
    const std::size_t winner = best_of(prompts[s.prompt].rewards, pair);
    // G_FW = -score(winner)
    policy.add_score(s.prompt, winner, -w * (1.0 - config.beta), grad.values);
    // G_BW = -score(y) (R - B);  G_Reg = +score(y) (log pi - log anchor)
    const double coeff = -config.beta * (returns[b] - baseline[b]) + config.gamma * log_ratio[b];
    policy.add_score(s.prompt, s.y, w * coeff, grad.values);
  }
  return grad;
}

void jbond_update(TrainState& state, const JBondConfig& config, const PromptSet& prompts) {
  const ParamVector grad = jbond_gradient(state, config, prompts);
  apply_update(config.optimizer, state.optimizer, state.policy.mutable_params(), grad.values);
  ++state.step;
  if (config.anchor_update_period > 0) {
    if (state.step % config.anchor_update_period == 0) state.anchor = state.policy;
  } else {
    state.anchor.set_params(ema_blend(state.anchor.param_vector(), state.policy.param_vector(), config.eta));
  }
}

MetricOptions jbond_metric_options(const JBondConfig& config) {
  MetricOptions m;
  m.bon_n = 2;
  m.jeffreys_beta = config.beta;
  return m;
}

MetricsRow jbond_step(TrainState& state, const JBondConfig& config, const PromptSet& prompts) {
  jbond_update(state, config, prompts);
  return compute_metrics(prompts, state.policy, state.anchor, state.reference, state.step,
                         jbond_metric_options(config));
}

std::vector<MetricsRow> run_jbond(TrainState& state, const JBondConfig& config,
                                  const PromptSet& prompts, const LoopOptions& options) {
  validate(config);
  if (options.eval_every < 1) throw InvalidArgument("eval_every must be >= 1");
  std::vector<MetricsRow> rows;
  const auto metric_options = jbond_metric_options(config);
  for (std::int64_t t = 1; t <= config.steps; ++t) {
    jbond_update(state, config, prompts);
    if (is_eval_step(t, config.steps, options.eval_every)) {
      rows.push_back(compute_metrics(prompts, state.policy, state.anchor, state.reference,
                                     state.step, metric_options));
      if (options.observer) options.observer(state, rows.back());
    }
  }
  return rows;
}

std::vector<MetricsRow> run_jbond(const JBondConfig& config, const PromptSet& prompts,
                                  const Policy& reference, const LoopOptions& options) {
  TrainState state = TrainState::start(reference);
  return run_jbond(state, config, prompts, options);
}

}  // namespace bond
