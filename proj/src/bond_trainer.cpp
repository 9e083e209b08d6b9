#include "bond/bond_trainer.hpp"

#include <cmath>
#include <string>

#include "bond/error.hpp"
#include "bond/quantile.hpp"

namespace bond {

RewardForm parse_reward_form(std::string_view name) {
  if (name == "log_quantile") return RewardForm::log_quantile;
  if (name == "raw_quantile") return RewardForm::raw_quantile;
  throw InvalidArgument("unknown reward_form '" + std::string(name) + "'");
}

Baseline parse_baseline(std::string_view name) {
  if (name == "none") return Baseline::none;
  if (name == "batch_mean") return Baseline::batch_mean;
  throw InvalidArgument("unknown baseline '" + std::string(name) + "'");
}

QuantileSource parse_quantile_source(std::string_view name) {
  if (name == "monte_carlo" || name == "mc") return QuantileSource::monte_carlo;
  if (name == "learned") return QuantileSource::learned;
  throw InvalidArgument("unknown quantile_source '" + std::string(name) + "'");
}

const char* to_string(RewardForm form) {
  return form == RewardForm::log_quantile ? "log_quantile" : "raw_quantile";
}
const char* to_string(Baseline baseline) {
  return baseline == Baseline::none ? "none" : "batch_mean";
}
const char* to_string(QuantileSource source) {
  return source == QuantileSource::monte_carlo ? "monte_carlo" : "learned";
}

void validate(const BondConfig& c) {
  if (c.n < 2) throw InvalidArgument("bond: n must be >= 2");
  if (!(c.beta >= 0.0 && c.beta <= 1.0)) throw InvalidArgument("bond: beta must lie in [0, 1]");
  if (c.k_mc < 1) throw InvalidArgument("bond: k_mc must be >= 1");
  if (c.batch_size < 1) throw InvalidArgument("bond: batch_size must be >= 1");
  if (c.optimizer.learning_rate < 0.0) throw InvalidArgument("bond: learning_rate must be >= 0");
  if (c.steps < 0) throw InvalidArgument("bond: steps must be >= 0");
  if (c.anchor_update_period < 1) throw InvalidArgument("bond: anchor_update_period must be >= 1");
  if (c.grad_mode == GradMode::sampled && c.baseline == Baseline::batch_mean && c.batch_size < 2) {
    throw InvalidArgument("bond: baseline batch_mean requires batch_size >= 2");
  }
  if (c.quantile_source == QuantileSource::learned && !(c.quantile_learning_rate > 0.0)) {
    throw InvalidArgument("bond: quantile_learning_rate must be > 0");
  }
}

std::vector<double> log_bon_probs(const BonDistribution& bd) {
  std::vector<double> out(bd.size());
  for (std::size_t y = 0; y < out.size(); ++y) {
    out[y] = std::log(bd.base[y]) + (bd.n - 1) * std::log(bd.quantiles[y].p_leq) +
             std::log(bd.correction[y]);
  }
  return out;
}

namespace {

ParamVector zeros_like(const Policy& policy) {
  return {policy.layout(), std::vector<double>(policy.layout().total, 0.0)};
}

void check_n(int n) {
  if (n < 2) throw InvalidArgument("backward KL gradient needs n >= 2");
}

// Weights w(y) = pi(y) (log pi(y) - log pi_BoN(y)), scaled by `scale`.
void add_exact_backward(const Policy& policy, std::size_t prompt, const BonDistribution& bd,
                        double scale, std::span<double> grad) {
  const auto log_pi = policy.log_probabilities(prompt);
  const auto log_q = log_bon_probs(bd);
  std::vector<double> w(log_pi.size());
  for (std::size_t y = 0; y < w.size(); ++y) w[y] = scale * std::exp(log_pi[y]) * (log_pi[y] - log_q[y]);
  policy.add_weighted_scores(prompt, w, grad);
}

void add_exact_forward(const Policy& policy, std::size_t prompt, const BonDistribution& bd,
                       double scale, std::span<double> grad) {
  std::vector<double> w(bd.probs.size());
  for (std::size_t y = 0; y < w.size(); ++y) w[y] = -scale * bd.probs[y];
  policy.add_weighted_scores(prompt, w, grad);
}

struct SlotDraw {
  std::size_t prompt = 0;
  std::size_t y = 0;
  double ret = 0.0;
  std::size_t y_ref = 0;
};

// Sampled backward term over a batch of slots; one generator per slot.
void add_sampled_backward(const Policy& policy, const Policy& anchor, const PromptSet& prompts,
                          std::span<const std::size_t> slot_prompts, int n,
                          const SampledBackwardOptions& opt, QuantileModel* learned,
                          double quantile_lr, std::vector<Rng>& rngs, std::span<double> grad) {
  const double beta_bond = bond_beta(n);
  std::vector<SlotDraw> draws(slot_prompts.size());
  std::vector<double> returns(slot_prompts.size());
  for (std::size_t b = 0; b < slot_prompts.size(); ++b) {
    SlotDraw& d = draws[b];
    d.prompt = slot_prompts[b];
    const auto& rewards = prompts[d.prompt].rewards;
    d.y = policy.sample_one(d.prompt, rngs[b]);
    double q = 0.0;
    if (learned != nullptr) {
      q = learned->predict(d.prompt, d.y);
      d.y_ref = anchor.sample_one(d.prompt, rngs[b]);
    } else {
      const auto ref = anchor.sample(d.prompt, rngs[b], static_cast<std::size_t>(opt.k_mc));
      q = mc_quantile(rewards, d.y, ref).value;
    }
    const double reward = opt.reward_form == RewardForm::log_quantile ? std::log(q) : q;
    d.ret = reward - beta_bond * (policy.log_prob(d.prompt, d.y) - anchor.log_prob(d.prompt, d.y));
    returns[b] = d.ret;
  }
  std::vector<double> baseline(draws.size(), 0.0);
  if (opt.baseline == Baseline::batch_mean) baseline = leave_one_out_means(returns);
  const double scale = -static_cast<double>(n - 1) / static_cast<double>(draws.size());
  for (std::size_t b = 0; b < draws.size(); ++b) {
    policy.add_score(draws[b].prompt, draws[b].y, scale * (draws[b].ret - baseline[b]), grad);
  }
  if (learned != nullptr) {
    for (const SlotDraw& d : draws) {
      const auto& rewards = prompts[d.prompt].rewards;
      learned->update(d.prompt, d.y, rewards[d.y_ref] <= rewards[d.y], quantile_lr);
    }
  }
}

}  // namespace

ParamVector forward_kl_grad(const Policy& policy, const Policy& anchor, const PromptSet& prompts,
                            std::size_t prompt, int n) {
  ParamVector g = zeros_like(policy);
  const auto bd = bon_distribution(anchor.probabilities(prompt), prompts[prompt].rewards, n);
  add_exact_forward(policy, prompt, bd, 1.0, g.values);
  return g;
}

ParamVector forward_kl_grad(const Policy& policy, const Policy& anchor, const PromptSet& prompts,
                            std::size_t prompt, int n, Rng& rng) {
  if (n < 1) throw InvalidArgument("forward_kl_grad: n must be >= 1");
  ParamVector g = zeros_like(policy);
  const auto draws = anchor.sample(prompt, rng, static_cast<std::size_t>(n));
  policy.add_score(prompt, best_of(prompts[prompt].rewards, draws), -1.0, g.values);
  return g;
}

ParamVector backward_kl_grad(const Policy& policy, const Policy& anchor, const PromptSet& prompts,
                             std::size_t prompt, int n) {
  check_n(n);
  ParamVector g = zeros_like(policy);
  const auto bd = bon_distribution(anchor.probabilities(prompt), prompts[prompt].rewards, n);
  add_exact_backward(policy, prompt, bd, 1.0, g.values);
  return g;
}

ParamVector backward_kl_grad(const Policy& policy, const Policy& anchor, const PromptSet& prompts,
                             std::size_t prompt, int n, const SampledBackwardOptions& options,
                             Rng& rng) {
  check_n(n);
  if (options.batch_size < 1 || options.k_mc < 1) throw InvalidArgument("backward_kl_grad: bad options");
  if (options.baseline == Baseline::batch_mean && options.batch_size < 2) {
    throw InvalidArgument("backward_kl_grad: batch_mean baseline needs batch_size >= 2");
  }
  ParamVector g = zeros_like(policy);
  std::vector<std::size_t> slots(static_cast<std::size_t>(options.batch_size), prompt);
  std::vector<Rng> rngs;
  for (std::size_t b = 0; b < slots.size(); ++b) rngs.emplace_back(rng.next());
  add_sampled_backward(policy, anchor, prompts, slots, n, options, nullptr, 0.0, rngs, g.values);
  return g;
}

ParamVector reinforce_form_backward_grad(const Policy& policy, const Policy& anchor,
                                         const PromptSet& prompts, std::size_t prompt, int n) {
  check_n(n);
  ParamVector g = zeros_like(policy);
  const auto base = anchor.probabilities(prompt);
  const auto bd = bon_distribution(base, prompts[prompt].rewards, n);
  const double beta_bond = bond_beta(n);
  const auto log_pi = policy.log_probabilities(prompt);
  const auto log_base = anchor.log_probabilities(prompt);
  std::vector<double> w(log_pi.size());
  for (std::size_t y = 0; y < w.size(); ++y) {
    const double objective = bond_reward(bd, y) - beta_bond * (log_pi[y] - log_base[y]);
    w[y] = -static_cast<double>(n - 1) * std::exp(log_pi[y]) * objective;
  }
  policy.add_weighted_scores(prompt, w, g.values);
  return g;
}

GradientBatch bond_gradient(TrainState& state, const BondConfig& config, const PromptSet& prompts) {
  validate(config);
  GradientBatch out{zeros_like(state.policy), zeros_like(state.policy), zeros_like(state.policy)};
  if (config.grad_mode == GradMode::exact) {
    const double w = 1.0 / static_cast<double>(prompts.size());
    for (std::size_t p = 0; p < prompts.size(); ++p) {
      const auto bd = bon_distribution(state.anchor.probabilities(p), prompts[p].rewards, config.n);
      add_exact_forward(state.policy, p, bd, w, out.forward_term.values);
      add_exact_backward(state.policy, p, bd, w, out.backward_term.values);
    }
  } else {
    const auto slots = batch_prompts(state.step, static_cast<std::size_t>(config.batch_size), prompts.size());
    const std::uint64_t step_seed = derive_seed(config.seed, static_cast<std::uint64_t>(state.step));
    std::vector<Rng> rngs;
    for (std::size_t b = 0; b < slots.size(); ++b) rngs.emplace_back(derive_seed(step_seed, b));

    const bool learned = config.quantile_source == QuantileSource::learned;
    if (learned && state.quantile_model.empty()) state.quantile_model = QuantileModel(prompts);
    SampledBackwardOptions opt{config.k_mc, config.reward_form, config.baseline, config.batch_size};
    add_sampled_backward(state.policy, state.anchor, prompts, slots, config.n, opt,
                         learned ? &state.quantile_model : nullptr, config.quantile_learning_rate,
                         rngs, out.backward_term.values);

    const double w = -1.0 / static_cast<double>(slots.size());
    for (std::size_t b = 0; b < slots.size(); ++b) {
      const auto draws = state.anchor.sample(slots[b], rngs[b], static_cast<std::size_t>(config.n));
      state.policy.add_score(slots[b], best_of(prompts[slots[b]].rewards, draws), w,
                             out.forward_term.values);
    }
  }
  for (std::size_t i = 0; i < out.combined.values.size(); ++i) {
    out.combined.values[i] =
        (1.0 - config.beta) * out.forward_term.values[i] + config.beta * out.backward_term.values[i];
  }
  return out;
}

void bond_update(TrainState& state, const BondConfig& config, const PromptSet& prompts) {
  const GradientBatch g = bond_gradient(state, config, prompts);
  apply_update(config.optimizer, state.optimizer, state.policy.mutable_params(), g.combined.values);
  ++state.step;
}

MetricOptions bond_metric_options(const BondConfig& config) {
  MetricOptions m;
  m.bon_n = config.n;
  m.jeffreys_beta = config.beta;
  return m;
}

MetricsRow bond_step(TrainState& state, const BondConfig& config, const PromptSet& prompts) {
  bond_update(state, config, prompts);
  return compute_metrics(prompts, state.policy, state.anchor, state.reference, state.step,
                         bond_metric_options(config));
}

std::vector<MetricsRow> iterative_bond(TrainState& state, const BondConfig& config,
                                       const PromptSet& prompts, std::int64_t total_steps,
                                       const LoopOptions& options) {
  validate(config);
  if (options.eval_every < 1) throw InvalidArgument("eval_every must be >= 1");
  std::vector<MetricsRow> rows;
  const auto metric_options = bond_metric_options(config);
  for (std::int64_t t = 1; t <= total_steps; ++t) {
    bond_update(state, config, prompts);
    if (is_eval_step(t, total_steps, options.eval_every)) {
      rows.push_back(compute_metrics(prompts, state.policy, state.anchor, state.reference,
                                     state.step, metric_options));
      if (options.observer) options.observer(state, rows.back());
    }
    if (t % config.anchor_update_period == 0) state.anchor = state.policy;
  }
  return rows;
}

std::vector<MetricsRow> run_bond(TrainState& state, const BondConfig& config,
                                 const PromptSet& prompts, std::int64_t total_steps,
                                 const LoopOptions& options) {
  BondConfig fixed = config;
  fixed.anchor_update_period = total_steps + 1;
  return iterative_bond(state, fixed, prompts, total_steps, options);
}

}  // namespace bond
