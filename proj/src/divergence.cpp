#include "bond/divergence.hpp"

#include <cmath>

#include "bond/error.hpp"

namespace bond {

double exact_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeMismatch("exact_kl: distributions differ in size");
  double kl = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y) {
    if (p[y] <= 0.0) continue;
    if (q[y] <= 0.0) throw DivergenceInfinite("KL is infinite: q(y) = 0 where p(y) > 0");
    kl += p[y] * (std::log(p[y]) - std::log(q[y]));
  }
  // Rounding can leave a tiny negative value for p ~ q.
  return kl < 0.0 ? 0.0 : kl;
}

DivergenceReport jeffreys(std::span<const double> p, std::span<const double> q, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidArgument("jeffreys: beta must lie in [0, 1]");
  DivergenceReport r;
  r.forward_kl = exact_kl(q, p);
  r.backward_kl = exact_kl(p, q);
  r.jeffreys_beta = beta;
  r.jeffreys = (1.0 - beta) * r.forward_kl + beta * r.backward_kl;
  return r;
}

double sampled_backward_kl(const Policy& policy, std::size_t prompt, const BonDistribution& bon,
                           std::span<const std::size_t> policy_samples) {
  if (policy_samples.empty()) throw InvalidArgument("sampled_backward_kl: need at least one sample");
  const int n = bon.n;
  double total = 0.0;
  for (std::size_t y : policy_samples) {
    const QuantilePair& q = bon.quantiles.at(y);
    const double log_bon =
        std::log(bon.base[y]) + (n - 1) * std::log(q.p_leq) + std::log(bon.correction[y]);
    total += policy.log_prob(prompt, y) - log_bon;
  }
  return total / static_cast<double>(policy_samples.size());
}

}  // namespace bond
