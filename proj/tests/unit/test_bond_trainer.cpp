#include <cmath>
#include <vector>

#include "bond/bond_trainer.hpp"
#include "bond/divergence.hpp"
#include "bond/error.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace bond;
using doctest::Approx;

namespace {

std::vector<double> log_of(const std::vector<double>& p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::log(p[i]);
  return out;
}

double backward_kl(const Policy& policy, const Policy& anchor, const PromptSet& prompts,
                   std::size_t prompt, int n) {
  const auto bd = bon_distribution(anchor.probabilities(prompt), prompts[prompt].rewards, n);
  return exact_kl(policy.probabilities(prompt), bd.probs);
}

double jeffreys_to_bon(const Policy& policy, const Policy& anchor, const PromptSet& prompts,
                       int n, double beta) {
  double total = 0.0;
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    const auto bd = bon_distribution(anchor.probabilities(p), prompts[p].rewards, n);
    total += jeffreys(policy.probabilities(p), bd.probs, beta).jeffreys;
  }
  return total / prompts.size();
}

// Accumulates per-coordinate mean and standard error of a vector stream.
struct Moments {
  std::vector<double> sum, sum_sq;
  std::size_t count = 0;
  void add(const std::vector<double>& x) {
    if (sum.empty()) sum.assign(x.size(), 0.0), sum_sq.assign(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) sum[i] += x[i], sum_sq[i] += x[i] * x[i];
    ++count;
  }
  double mean(std::size_t i) const { return sum[i] / count; }
  double se(std::size_t i) const {
    const double m = mean(i);
    return std::sqrt(std::max(0.0, sum_sq[i] / count - m * m) / (count - 1));
  }
};

double binomial_pmf(int k, int c, double p) {
  return std::exp(std::lgamma(k + 1.0) - std::lgamma(c + 1.0) - std::lgamma(k - c + 1.0) +
                  (c > 0 ? c * std::log(p) : 0.0) + (k - c > 0 ? (k - c) * std::log1p(-p) : 0.0));
}

// E[log(max(C, 1) / k)] for C ~ Binomial(k, p).
double expected_log_mc_quantile(int k, double p) {
  if (p >= 1.0) return 0.0;
  double e = 0.0;
  for (int c = 0; c <= k; ++c) e += binomial_pmf(k, c, p) * std::log(std::max(c, 1) / double(k));
  return e;
}

struct Toy {
  PromptSet prompts;
  Policy reference;
};

Toy four_outcome_toy(std::uint64_t seed, PolicyKind kind = PolicyKind::categorical) {
  Rng rng(seed);
  auto prompts = testing::single_prompt(testing::random_rewards(rng, 4, false), Vocab{2, 2});
  const auto base = testing::random_distribution(rng, 4, 0.7);
  Policy ref = kind == PolicyKind::categorical ? Policy::categorical(prompts, {log_of(base)})
                                               : Policy::autoregressive_from(prompts, {base});
  return {prompts, ref};
}

}  // namespace

TEST_CASE("both exact terms vanish at the Best-of-n target") {
  for (auto kind : {PolicyKind::categorical, PolicyKind::autoregressive}) {
    for (int n : {2, 4, 8}) {
      auto toy = four_outcome_toy(3 + n, kind);
      const auto bd = bon_distribution(toy.reference.probabilities(0), toy.prompts[0].rewards, n);
      Policy at = Policy::autoregressive_from(toy.prompts, {bd.probs});
      if (kind == PolicyKind::categorical) at = Policy::categorical(toy.prompts, {log_bon_probs(bd)});
      CHECK(testing::sup_norm(forward_kl_grad(at, toy.reference, toy.prompts, 0, n).values) <= 1e-10);
      CHECK(testing::sup_norm(backward_kl_grad(at, toy.reference, toy.prompts, 0, n).values) <= 1e-10);
    }
  }
}

TEST_CASE("exact backward gradient matches finite differences and the REINFORCE form") {
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const auto kind = trial % 2 == 0 ? PolicyKind::categorical : PolicyKind::autoregressive;
    auto toy = four_outcome_toy(100 + trial, kind);
    Rng rng(trial);
    Policy pi = toy.reference;
    for (double& v : pi.mutable_params()) v += rng.normal();
    const int n = 2 + trial % 4;
    const auto g = backward_kl_grad(pi, toy.reference, toy.prompts, 0, n);
    const auto rf = reinforce_form_backward_grad(pi, toy.reference, toy.prompts, 0, n);
    CHECK(testing::max_abs_diff(g.values, rf.values) <= 1e-12);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      Policy plus = pi, minus = pi;
      plus.mutable_params()[i] += h;
      minus.mutable_params()[i] -= h;
      const double fd = (backward_kl(plus, toy.reference, toy.prompts, 0, n) -
                         backward_kl(minus, toy.reference, toy.prompts, 0, n)) / (2 * h);
      CHECK(std::abs(fd - g.values[i]) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("exact forward gradient matches finite differences of the forward KL") {
  auto toy = four_outcome_toy(9);
  Policy pi = toy.reference;
  Rng rng(9);
  for (double& v : pi.mutable_params()) v += rng.normal();
  const auto bd = bon_distribution(toy.reference.probabilities(0), toy.prompts[0].rewards, 4);
  const auto g = forward_kl_grad(pi, toy.reference, toy.prompts, 0, 4);
  const double h = 1e-5;
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    Policy plus = pi, minus = pi;
    plus.mutable_params()[i] += h;
    minus.mutable_params()[i] -= h;
    const double fd = (exact_kl(bd.probs, plus.probabilities(0)) - exact_kl(bd.probs, minus.probabilities(0))) / (2 * h);
    CHECK(std::abs(fd - g.values[i]) <= 1e-6);
  }
}

TEST_CASE("sampled forward gradient is unbiased and reduces to SFT for n = 1") {
  auto toy = four_outcome_toy(21);
  Policy pi = toy.reference;
  Rng rng(21);
  for (double& v : pi.mutable_params()) v += rng.normal();

  Rng a(5), b(5);
  const auto sft = forward_kl_grad(pi, toy.reference, toy.prompts, 0, 1, a);
  const auto drawn = toy.reference.sample_one(0, b);
  auto expected = pi.score(0, drawn);
  for (double& v : expected.values) v = -v;
  CHECK(sft.values == expected.values);

  const int n = 4;
  const auto exact = forward_kl_grad(pi, toy.reference, toy.prompts, 0, n);
  Moments mo;
  for (int i = 0; i < 100000; ++i) mo.add(forward_kl_grad(pi, toy.reference, toy.prompts, 0, n, rng).values);
  for (std::size_t i = 0; i < exact.values.size(); ++i)
    CHECK(std::abs(mo.mean(i) - exact.values[i]) <= 3 * mo.se(i) + 1e-12);
}

TEST_CASE("sampled backward gradient is unbiased for its MC-quantile surrogate") {
  auto toy = four_outcome_toy(33);
  Policy pi = toy.reference;
  Rng rng(33);
  for (double& v : pi.mutable_params()) v += 0.5 * rng.normal();
  const int n = 4, k = 16;
  const auto& rewards = toy.prompts[0].rewards;
  const auto anchor_q = exact_quantiles(toy.reference.probabilities(0), rewards, TieMode::pooled);
  const auto log_pi = pi.log_probabilities(0);
  const auto log_anchor = toy.reference.log_probabilities(0);
  std::vector<double> w(4);
  for (std::size_t y = 0; y < 4; ++y) {
    const double ret = expected_log_mc_quantile(k, anchor_q[y].p_leq) - bond_beta(n) * (log_pi[y] - log_anchor[y]);
    w[y] = -(n - 1) * std::exp(log_pi[y]) * ret;
  }
  std::vector<double> target(pi.layout().total, 0.0);
  pi.add_weighted_scores(0, w, target);

  for (auto baseline : {Baseline::none, Baseline::batch_mean}) {
    SampledBackwardOptions opt{k, RewardForm::log_quantile, baseline, 2};
    Moments mo;
    for (int i = 0; i < 100000; ++i) mo.add(backward_kl_grad(pi, toy.reference, toy.prompts, 0, n, opt, rng).values);
    for (std::size_t i = 0; i < target.size(); ++i) CHECK(std::abs(mo.mean(i) - target[i]) <= 3.5 * mo.se(i) + 1e-12);
  }
}

TEST_CASE("exact-mode Jeffreys is non-increasing with a small step") {
  for (int trial = 0; trial < 5; ++trial) {
    auto toy = four_outcome_toy(200 + trial);
    BondConfig config;
    config.n = 4;
    config.beta = 0.5;
    config.optimizer.kind = OptimizerKind::sgd;
    config.optimizer.learning_rate = 0.01;
    TrainState state = TrainState::start(toy.reference);
    double previous = jeffreys_to_bon(state.policy, state.anchor, toy.prompts, 4, 0.5);
    for (int step = 0; step < 500; ++step) {
      const auto row = bond_step(state, config, toy.prompts);
      CHECK(*row.jeffreys <= previous + 1e-9);
      previous = *row.jeffreys;
    }
  }
}

TEST_CASE("exact trajectories are invariant under monotone reward transforms") {
  auto toy = four_outcome_toy(44);
  std::vector<double> r2 = toy.prompts[0].rewards;
  for (double& v : r2) v = std::exp(4.0 * v) - 7.0;
  auto transformed = testing::single_prompt(r2, Vocab{2, 2});
  BondConfig config;
  config.n = 4;
  TrainState a = TrainState::start(toy.reference), b = a;
  run_bond(a, config, toy.prompts, 300);
  run_bond(b, config, transformed, 300);
  CHECK(std::vector<double>(a.policy.params().begin(), a.policy.params().end()) ==
        std::vector<double>(b.policy.params().begin(), b.policy.params().end()));
}

TEST_CASE("zero learning rate leaves the policy and still logs metrics") {
  auto toy = four_outcome_toy(50);
  BondConfig config;
  config.optimizer.learning_rate = 0.0;
  config.grad_mode = GradMode::sampled;
  config.batch_size = 4;
  TrainState state = TrainState::start(toy.reference);
  const auto row = bond_step(state, config, toy.prompts);
  CHECK(state.policy.param_vector().values == toy.reference.param_vector().values);
  CHECK(row.step == 1);
  CHECK(row.kl_to_ref == 0.0);
  CHECK(row.jeffreys.has_value());
  CHECK(row.kl_to_anchor.has_value());
}

TEST_CASE("exact BOND converges to Best-of-8 on 4-outcome toys") {
  for (int trial = 0; trial < 3; ++trial) {
    auto toy = four_outcome_toy(300 + trial);
    BondConfig config;
    config.n = 8;
    config.beta = 0.5;
    config.optimizer.learning_rate = 0.1;
    TrainState state = TrainState::start(toy.reference);
    const auto rows = run_bond(state, config, toy.prompts, 5000, {1000, {}});
    CHECK(rows.size() == 5);
    CHECK(*rows.back().jeffreys <= 1e-4);
  }
}

TEST_CASE("iterative BOND with n = 2 and three anchor updates reaches Best-of-8") {
  auto toy = four_outcome_toy(400);
  BondConfig config;
  config.n = 2;
  config.anchor_update_period = 2000;
  TrainState state = TrainState::start(toy.reference);
  iterative_bond(state, config, toy.prompts, 6000, {6000, {}});
  const auto bo8 = bon_distribution(toy.reference.probabilities(0), toy.prompts[0].rewards, 8);
  CHECK(jeffreys(state.policy.probabilities(0), bo8.probs, 0.5).jeffreys <= 1e-3);
}

TEST_CASE("a period beyond the run length equals non-iterative BOND") {
  auto toy = four_outcome_toy(401);
  BondConfig config;
  config.n = 4;
  config.anchor_update_period = 500;
  TrainState a = TrainState::start(toy.reference), b = a;
  const auto ra = iterative_bond(a, config, toy.prompts, 400);
  const auto rb = run_bond(b, config, toy.prompts, 400);
  CHECK(a.policy.param_vector().values == b.policy.param_vector().values);
  REQUIRE(ra.size() == rb.size());
  CHECK(ra.back().jeffreys == rb.back().jeffreys);
}

TEST_CASE("sampled BOND is deterministic per seed and honors config bounds") {
  auto toy = four_outcome_toy(60);
  BondConfig config;
  config.grad_mode = GradMode::sampled;
  config.batch_size = 8;
  config.seed = 77;
  TrainState a = TrainState::start(toy.reference), b = a;
  const auto ra = run_bond(a, config, toy.prompts, 50);
  const auto rb = run_bond(b, config, toy.prompts, 50);
  CHECK(a.policy.param_vector().values == b.policy.param_vector().values);
  CHECK(ra.back().jeffreys == rb.back().jeffreys);

  config.quantile_source = QuantileSource::learned;
  TrainState c = TrainState::start(toy.reference);
  run_bond(c, config, toy.prompts, 20);
  CHECK_FALSE(c.quantile_model.empty());

  BondConfig bad = config;
  bad.batch_size = 1;
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  bad = config;
  bad.n = 1;
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  bad = config;
  bad.beta = 1.5;
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  CHECK_THROWS_AS(parse_reward_form("logq"), InvalidArgument);
  CHECK(parse_baseline(to_string(Baseline::none)) == Baseline::none);
}

TEST_CASE("training helpers") {
  CHECK(batch_prompts(3, 4, 5) == std::vector<std::size_t>{2, 3, 4, 0});
  CHECK(leave_one_out_means({1.0, 2.0, 6.0}) == std::vector<double>{4.0, 3.5, 1.5});
  CHECK(leave_one_out_means({5.0}) == std::vector<double>{0.0});
  CHECK(is_eval_step(10, 25, 5));
  CHECK_FALSE(is_eval_step(11, 25, 5));
  CHECK(is_eval_step(25, 25, 10));

  std::vector<double> x{1.0, -2.0};
  OptimizerState st;
  OptimizerConfig sgd{OptimizerKind::sgd, 0.5};
  apply_update(sgd, st, x, std::vector<double>{2.0, -2.0});
  CHECK(x == std::vector<double>{0.0, -1.0});
  OptimizerState adam_state;
  std::vector<double> y{0.0};
  apply_update(OptimizerConfig{}, adam_state, y, std::vector<double>{3.0});
  // first bias-corrected Adam step moves by lr * sign(grad)
  CHECK(y[0] == Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("metrics on the two-outcome instance") {
  auto prompts = testing::flat_prompt({0.0, 1.0});
  Policy ref = Policy::categorical(prompts, {{std::log(0.3), std::log(0.7)}});
  MetricOptions opt;
  opt.bon_n = 2;
  const auto row = compute_metrics(prompts, ref, ref, ref, 0, opt);
  CHECK(row.reward_mean == Approx(0.7));
  CHECK(row.log_quantile_mean == Approx(0.3 * std::log(0.3)));
  CHECK(row.kl_to_ref == 0.0);
  CHECK(*row.kl_to_anchor == 0.0);
  const std::vector<double> pi{0.3, 0.7}, bo2{0.09, 0.91};
  CHECK(*row.bwd_kl_to_bon == Approx(exact_kl(pi, bo2)).epsilon(1e-12));
  CHECK(*row.fwd_kl_to_bon == Approx(exact_kl(bo2, pi)).epsilon(1e-12));
  CHECK(*row.jeffreys == Approx(0.5 * (*row.bwd_kl_to_bon + *row.fwd_kl_to_bon)));
}
