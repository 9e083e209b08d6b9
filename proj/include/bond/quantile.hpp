#pragma once

// Stochastic estimates of the reward quantile p_leq(y) = P_ref[r(y') <= r(y)].

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "bond/bon_exact.hpp"
#include "bond/outcome_space.hpp"

namespace bond {

struct McQuantileEstimate {
  double value = 1.0;  // max(raw_count, 1) / k
  std::size_t k = 0;
  std::size_t raw_count = 0;
};

/// Counts reference samples whose reward is <= r(y). The estimate is floored
/// at 1/k so that its logarithm stays finite.
McQuantileEstimate mc_quantile(std::span<const double> rewards, std::size_t y,
                               std::span<const std::size_t> ref_samples);

/// Tabular quantile classifier: one logit per (prompt, outcome), prediction
/// sigmoid(logit). Trained with binary cross-entropy; each entry scales its
/// step by the root of its accumulated squared gradients (AdaGrad), and
/// logits are clipped to [-kLogitCap, kLogitCap].
class QuantileModel {
 public:
  static constexpr double kLogitCap = 6.0;

  QuantileModel() = default;
  explicit QuantileModel(const PromptSet& prompts);

  bool empty() const { return logits_.empty(); }
  double logit(std::size_t prompt, std::size_t y) const;
  double predict(std::size_t prompt, std::size_t y) const;

  /// One stochastic BCE step on label 1{r(y') <= r(y)}.
  void update(std::size_t prompt, std::size_t y, bool label, double learning_rate);

 private:
  std::vector<std::vector<double>> logits_;
  std::vector<std::vector<double>> sq_grad_;
};

/// One element of the training stream: a policy sample y and a single
/// reference sample y' for the same prompt.
struct QuantileSample {
  std::size_t prompt = 0;
  std::size_t y = 0;
  std::size_t y_ref = 0;
};

using QuantileStream = std::function<QuantileSample(std::size_t step)>;

QuantileModel train_quantile_model(QuantileModel model, const PromptSet& prompts,
                                   const QuantileStream& stream, double learning_rate,
                                   std::size_t steps);

/// sum_y ref(y) |predict(y) - p_leq(y)| for one prompt.
double quantile_abs_error(const QuantileModel& model, std::size_t prompt,
                          std::span<const QuantilePair> exact, std::span<const double> ref);

}  // namespace bond
