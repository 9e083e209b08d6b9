#include "bond/quantile.hpp"

#include <algorithm>
#include <cmath>

#include "bond/error.hpp"

namespace bond {

namespace {

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

McQuantileEstimate mc_quantile(std::span<const double> rewards, std::size_t y,
                               std::span<const std::size_t> ref_samples) {
  if (ref_samples.empty()) throw InvalidArgument("mc_quantile: need at least one reference sample");
  if (y >= rewards.size()) throw LookupError("mc_quantile: outcome out of range");
  McQuantileEstimate est;
  est.k = ref_samples.size();
  for (std::size_t s : ref_samples) {
    if (rewards[s] <= rewards[y]) ++est.raw_count;
  }
  est.value = static_cast<double>(std::max<std::size_t>(est.raw_count, 1)) / static_cast<double>(est.k);
  return est;
}

QuantileModel::QuantileModel(const PromptSet& prompts) {
  for (const Prompt& p : prompts.prompts()) {
    logits_.emplace_back(p.outcome_count(), 0.0);
    sq_grad_.emplace_back(p.outcome_count(), 0.0);
  }
}

double QuantileModel::logit(std::size_t prompt, std::size_t y) const {
  if (prompt >= logits_.size() || y >= logits_[prompt].size()) {
    throw LookupError("quantile model: unknown (prompt, outcome)");
  }
  return logits_[prompt][y];
}

double QuantileModel::predict(std::size_t prompt, std::size_t y) const {
  return sigmoid(logit(prompt, y));
}

void QuantileModel::update(std::size_t prompt, std::size_t y, bool label, double learning_rate) {
  if (!(learning_rate > 0.0)) throw InvalidArgument("quantile model: learning rate must be > 0");
  double& theta = logits_.at(prompt).at(y);
  double& acc = sq_grad_[prompt][y];
  // d/dtheta of -[l log s(theta) + (1 - l) log(1 - s(theta))].
  const double grad = sigmoid(theta) - (label ? 1.0 : 0.0);
  acc += grad * grad;
  theta -= learning_rate * grad / (std::sqrt(acc) + 1e-12);
  theta = std::clamp(theta, -kLogitCap, kLogitCap);
}

QuantileModel train_quantile_model(QuantileModel model, const PromptSet& prompts,
                                   const QuantileStream& stream, double learning_rate,
                                   std::size_t steps) {
  if (!(learning_rate > 0.0)) throw InvalidArgument("train_quantile_model: learning rate must be > 0");
  for (std::size_t t = 0; t < steps; ++t) {
    const QuantileSample s = stream(t);
    const auto& r = prompts[s.prompt].rewards;
    model.update(s.prompt, s.y, r.at(s.y_ref) <= r.at(s.y), learning_rate);
  }
  return model;
}

double quantile_abs_error(const QuantileModel& model, std::size_t prompt,
                          std::span<const QuantilePair> exact, std::span<const double> ref) {
  if (exact.size() != ref.size()) throw ShapeMismatch("quantile_abs_error: size mismatch");
  double err = 0.0;
  for (std::size_t y = 0; y < exact.size(); ++y) {
    err += ref[y] * std::abs(model.predict(prompt, y) - exact[y].p_leq);
  }
  return err;
}

}  // namespace bond
