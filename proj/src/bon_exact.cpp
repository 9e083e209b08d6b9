#include "bond/bon_exact.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bond/error.hpp"
#include "bond/outcome_space.hpp"

namespace bond {

namespace {

void check_sizes(std::span<const double> base, std::span<const double> rewards) {
  if (base.size() != rewards.size() || base.empty()) {
    throw InvalidArgument("distribution and reward table must cover the same non-empty space");
  }
}

std::vector<std::size_t> strict_ranking(std::span<const double> rewards) {
  std::vector<std::size_t> order(rewards.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return outcome_less(rewards, a, b); });
  return order;
}

}  // namespace

void check_normalized(std::span<const double> dist, double tol) {
  double total = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0)) throw InvalidArgument("distribution has a negative or NaN entry");
    total += p;
  }
  if (std::abs(total - 1.0) > tol) {
    throw InvalidArgument("distribution is not normalized (sum = " + std::to_string(total) + ")");
  }
}

std::vector<QuantilePair> exact_quantiles(std::span<const double> base,
                                          std::span<const double> rewards, TieMode mode) {
  check_sizes(base, rewards);
  check_normalized(base);
  const auto order = strict_ranking(rewards);
  std::vector<QuantilePair> q(base.size());
  double below = 0.0;
  if (mode == TieMode::strict) {
    for (std::size_t y : order) {
      q[y].p_less = below;
      below += base[y];
      q[y].p_leq = below;
    }
    return q;
  }
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double group = 0.0;
    while (j < order.size() && rewards[order[j]] == rewards[order[i]]) group += base[order[j++]];
    for (std::size_t k = i; k < j; ++k) q[order[k]] = {below, below + group};
    below += group;
    i = j;
  }
  return q;
}

double geometric_correction(double gap, int n) {
  if (n < 1) throw InvalidArgument("geometric_correction: n must be >= 1");
  if (gap <= 0.0) return static_cast<double>(n);
  if (gap >= 1.0) return 1.0;
  // Horner keeps the result inside [1, n] exactly; the closed form can
  // round just below 1 when gap is close to 1.
  if (n <= 1024) {
    const double rho = 1.0 - gap;
    double s = 1.0;
    for (int i = 1; i < n; ++i) s = 1.0 + rho * s;
    return s;
  }
  const double s = -std::expm1(static_cast<double>(n) * std::log1p(-gap)) / gap;
  return std::clamp(s, 1.0, static_cast<double>(n));
}

BonDistribution bon_distribution(std::span<const double> base, std::span<const double> rewards,
                                 int n) {
  if (n < 1) throw InvalidArgument("bon_distribution: n must be >= 1");
  BonDistribution bd;
  bd.n = n;
  bd.base.assign(base.begin(), base.end());
  bd.quantiles = exact_quantiles(base, rewards, TieMode::strict);
  bd.probs.resize(base.size());
  bd.correction.resize(base.size());
  for (std::size_t y = 0; y < base.size(); ++y) {
    const QuantilePair& q = bd.quantiles[y];
    // Strict quantiles: p_leq - p_less is exactly base(y).
    const double gap = q.p_leq > 0.0 ? base[y] / q.p_leq : 1.0;
    bd.correction[y] = geometric_correction(gap, n);
    bd.probs[y] = base[y] * std::pow(q.p_leq, n - 1) * bd.correction[y];
  }
  return bd;
}

std::vector<double> brute_force_bon(std::span<const double> base, std::span<const double> rewards,
                                    int n, std::size_t tuple_cap) {
  check_sizes(base, rewards);
  if (n < 1) throw InvalidArgument("brute_force_bon: n must be >= 1");
  const std::size_t m = base.size();
  std::size_t tuples = 1;
  for (int i = 0; i < n; ++i) {
    if (tuples > tuple_cap / m) throw CapExceeded("brute_force_bon: more than " + std::to_string(tuple_cap) + " tuples");
    tuples *= m;
  }
  std::vector<double> out(m, 0.0);
  std::vector<std::size_t> tuple(static_cast<std::size_t>(n), 0);
  for (std::size_t t = 0; t < tuples; ++t) {
    double weight = 1.0;
    for (std::size_t y : tuple) weight *= base[y];
    out[best_of(rewards, tuple)] += weight;
    for (std::size_t pos = 0; pos < tuple.size(); ++pos) {
      if (++tuple[pos] < m) break;
      tuple[pos] = 0;
    }
  }
  return out;
}

double bond_beta(int n) {
  if (n < 2) throw InvalidArgument("beta_BOND is undefined for n < 2");
  return 1.0 / static_cast<double>(n - 1);
}

double bond_reward(const BonDistribution& bd, std::size_t y) {
  if (bd.n < 2) throw InvalidArgument("r_BOND is undefined for n < 2");
  if (y >= bd.size()) throw LookupError("bond_reward: outcome out of range");
  return std::log(bd.quantiles[y].p_leq) + std::log(bd.correction[y]) / static_cast<double>(bd.n - 1);
}

std::vector<double> bond_rewards(const BonDistribution& bd) {
  std::vector<double> r(bd.size());
  for (std::size_t y = 0; y < r.size(); ++y) r[y] = bond_reward(bd, y);
  return r;
}

double tilt_equivalence_check(std::span<const double> base, std::span<const double> rewards, int n) {
  const BonDistribution bd = bon_distribution(base, rewards, n);
  const double beta = bond_beta(n);
  std::vector<double> logits(base.size());
  for (std::size_t y = 0; y < base.size(); ++y) {
    logits[y] = std::log(base[y]) + bond_reward(bd, y) / beta;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - top);
    total += l;
  }
  double dev = 0.0;
  for (std::size_t y = 0; y < base.size(); ++y) dev = std::max(dev, std::abs(logits[y] / total - bd.probs[y]));
  return dev;
}

std::vector<double> compose_bon(std::span<const double> base, std::span<const double> rewards,
                                int n, int m, std::size_t cap) {
  if (n < 1 || m < 1) throw InvalidArgument("compose_bon: n and m must be >= 1");
  double total = 1.0;
  for (int i = 0; i < m; ++i) total *= n;
  if (total > static_cast<double>(cap)) throw CapExceeded("compose_bon: n^m exceeds " + std::to_string(cap));
  std::vector<double> dist(base.begin(), base.end());
  for (int i = 0; i < m; ++i) dist = bon_distribution(dist, rewards, n).probs;
  return dist;
}

}  // namespace bond
