#include "bond/training.hpp"

#include <cmath>
#include <string>

#include "bond/bon_exact.hpp"
#include "bond/divergence.hpp"
#include "bond/error.hpp"

namespace bond {

GradMode parse_grad_mode(std::string_view name) {
  if (name == "exact") return GradMode::exact;
  if (name == "sampled") return GradMode::sampled;
  throw InvalidArgument("unknown grad_mode '" + std::string(name) + "'");
}

const char* to_string(GradMode mode) { return mode == GradMode::exact ? "exact" : "sampled"; }

TrainState TrainState::start(const Policy& reference) {
  return TrainState{reference, reference, reference, {}, 0, {}};
}

MetricsRow compute_metrics(const PromptSet& prompts, const Policy& policy, const Policy& anchor,
                           const Policy& reference, std::int64_t step, const MetricOptions& options) {
  MetricsRow row;
  row.step = step;
  double fwd = 0.0;
  double bwd = 0.0;
  double kl_anchor = 0.0;
  const double weight = 1.0 / static_cast<double>(prompts.size());
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    const auto& rewards = prompts[p].rewards;
    const auto pi = policy.probabilities(p);
    const auto ref = reference.probabilities(p);
    const auto q_ref = exact_quantiles(ref, rewards, TieMode::pooled);
    double reward = 0.0;
    double log_q = 0.0;
    for (std::size_t y = 0; y < pi.size(); ++y) {
      reward += pi[y] * rewards[y];
      log_q += pi[y] * std::log(q_ref[y].p_leq);
    }
    row.reward_mean += weight * reward;
    row.log_quantile_mean += weight * log_q;
    row.kl_to_ref += weight * exact_kl(pi, ref);
    if (options.with_anchor || options.bon_n) {
      const auto anc = anchor.probabilities(p);
      if (options.with_anchor) kl_anchor += weight * exact_kl(pi, anc);
      if (options.bon_n) {
        const auto target = bon_distribution(anc, rewards, *options.bon_n).probs;
        const auto report = jeffreys(pi, target, options.jeffreys_beta);
        fwd += weight * report.forward_kl;
        bwd += weight * report.backward_kl;
      }
    }
  }
  if (options.with_anchor) row.kl_to_anchor = kl_anchor;
  if (options.bon_n) {
    row.fwd_kl_to_bon = fwd;
    row.bwd_kl_to_bon = bwd;
    row.jeffreys = (1.0 - options.jeffreys_beta) * fwd + options.jeffreys_beta * bwd;
  }
  return row;
}

bool is_eval_step(std::int64_t step, std::int64_t total, std::int64_t eval_every) {
  return step % eval_every == 0 || step == total;
}

std::vector<std::size_t> batch_prompts(std::int64_t step, std::size_t batch_size,
                                       std::size_t prompt_count) {
  std::vector<std::size_t> out(batch_size);
  const auto base = static_cast<std::uint64_t>(step) * batch_size;
  for (std::size_t b = 0; b < batch_size; ++b) out[b] = (base + b) % prompt_count;
  return out;
}

std::vector<double> leave_one_out_means(const std::vector<double>& values) {
  std::vector<double> out(values.size(), 0.0);
  if (values.size() < 2) return out;
  double total = 0.0;
  for (double v : values) total += v;
  const double others = static_cast<double>(values.size() - 1);
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (total - values[i]) / others;
  return out;
}

}  // namespace bond
