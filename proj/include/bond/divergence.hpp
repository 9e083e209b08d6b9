#pragma once

// KL and Jeffreys divergences between distributions on one outcome space.
// Natural log throughout.

#include <cstddef>
#include <span>

#include "bond/bon_exact.hpp"
#include "bond/policy.hpp"

namespace bond {

/// sum_y p(y) (log p(y) - log q(y)); terms with p(y) = 0 are dropped.
/// Throws DivergenceInfinite if q(y) = 0 where p(y) > 0.
double exact_kl(std::span<const double> p, std::span<const double> q);

enum class DivergenceMode { exact, sampled };

struct DivergenceReport {
  double forward_kl = 0.0;   // KL(q || p)
  double backward_kl = 0.0;  // KL(p || q)
  double jeffreys_beta = 0.5;
  double jeffreys = 0.0;     // (1 - beta) forward + beta backward
  DivergenceMode mode = DivergenceMode::exact;
  std::size_t sample_count = 0;
};

/// Generalized Jeffreys divergence J^beta(p || q); beta in [0, 1].
DivergenceReport jeffreys(std::span<const double> p, std::span<const double> q, double beta);

/// Mean of log pi(y) - log pi_BoN(y) over policy samples of one prompt, with
/// log pi_BoN from the exact closed form.
double sampled_backward_kl(const Policy& policy, std::size_t prompt, const BonDistribution& bon,
                           std::span<const std::size_t> policy_samples);

}  // namespace bond
