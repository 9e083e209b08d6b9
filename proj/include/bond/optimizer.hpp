#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace bond {

enum class OptimizerKind { adam, sgd };

OptimizerKind parse_optimizer_kind(std::string_view name);
const char* to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moments; empty until the first update.
struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
};

/// One descent step: params -= update(grad).
void apply_update(const OptimizerConfig& config, OptimizerState& state, std::span<double> params,
                  std::span<const double> grad);

}  // namespace bond
