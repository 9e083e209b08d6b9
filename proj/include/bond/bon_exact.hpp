#pragma once

// Exact Best-of-N analytics over an enumerated outcome space.
//
// Distributions are dense vectors indexed by outcome index; rewards are the
// prompt's reward table. Winner selection uses the strict order of
// outcome_less (reward, then index).

#include <cstddef>
#include <span>
#include <vector>

namespace bond {

inline constexpr std::size_t kDefaultTupleCap = 10'000'000;

struct QuantilePair {
  double p_less = 0.0;  // P[y' worse than y]
  double p_leq = 0.0;   // P[y' not better than y]
};

/// pooled: compare raw rewards, tied outcomes share their mass in p_leq.
/// strict: compare with outcome_less, so p_leq - p_less = base(y).
enum class TieMode { pooled, strict };

/// Throws InvalidArgument unless `dist` sums to 1 within `tol` with no
/// negative entries.
void check_normalized(std::span<const double> dist, double tol = 1e-9);

std::vector<QuantilePair> exact_quantiles(std::span<const double> base,
                                          std::span<const double> rewards,
                                          TieMode mode = TieMode::pooled);

/// sum_{i=1..n} rho^(i-1) with rho = 1 - gap; n when gap = 0. Summed by
/// Horner for n <= 1024, else (1 - rho^n) / (1 - rho) via expm1/log1p.
double geometric_correction(double gap, int n);

struct BonDistribution {
  int n = 1;
  std::vector<double> base;
  std::vector<double> probs;
  std::vector<QuantilePair> quantiles;  // strict-order quantiles of `base`
  std::vector<double> correction;       // in [1, n]

  std::size_t size() const { return probs.size(); }
};

/// probs(y) = base(y) * p_leq(y)^(n-1) * correction(y).
BonDistribution bon_distribution(std::span<const double> base, std::span<const double> rewards,
                                 int n);

/// Law of the strict_order winner of n i.i.d. draws from `base`, by
/// enumerating all |Y|^n tuples. Throws CapExceeded above `tuple_cap`.
std::vector<double> brute_force_bon(std::span<const double> base, std::span<const double> rewards,
                                    int n, std::size_t tuple_cap = kDefaultTupleCap);

/// 1 / (n - 1); InvalidArgument for n < 2.
double bond_beta(int n);

/// log p_leq(y) + log(correction(y)) / (n - 1).
double bond_reward(const BonDistribution& bd, std::size_t y);
std::vector<double> bond_rewards(const BonDistribution& bd);

/// max_y |normalize(base * exp(r_BOND / beta_BOND))(y) - bon(y)|.
double tilt_equivalence_check(std::span<const double> base, std::span<const double> rewards, int n);

/// Best-of-n applied m times, each pass using the previous output as base.
/// Throws CapExceeded if n^m is above `cap`.
std::vector<double> compose_bon(std::span<const double> base, std::span<const double> rewards,
                                int n, int m, std::size_t cap = 65536);

}  // namespace bond
