#include <algorithm>
#include <cmath>
#include <numeric>

#include "bond/bon_exact.hpp"
#include "bond/divergence.hpp"
#include "bond/error.hpp"
#include "bond/jbond.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace bond;
using doctest::Approx;

namespace {

JBondSample sample_with(double ry, double r1, double r2) {
  JBondSample s;
  s.reward_y = ry;
  s.reward_anchor1 = r1;
  s.reward_anchor2 = r2;
  return s;
}

struct Toy {
  PromptSet prompts;
  Policy reference;
};

Toy toy(std::uint64_t seed, std::size_t prompts_count = 1) {
  Rng rng(seed);
  std::vector<Prompt> ps;
  std::vector<std::vector<double>> logits;
  for (std::size_t p = 0; p < prompts_count; ++p) {
    ps.push_back(Prompt{static_cast<PromptId>(p), Vocab{4, 1}, testing::random_rewards(rng, 4, false)});
    logits.push_back(testing::random_logits(rng, 4, 0.7));
  }
  PromptSet set(ps);
  return {set, Policy::categorical(set, logits)};
}

}  // namespace

TEST_CASE("jbond_reward cases") {
  CHECK(jbond_reward(sample_with(0.1, 0.5, 0.9)) == Approx(-std::log(16.0)).epsilon(1e-15));
  CHECK(jbond_reward(sample_with(0.7, 0.5, 0.9)) == 0.0);
  CHECK(jbond_reward(sample_with(0.5, 0.5, 0.9)) == 0.0);
  CHECK(jbond_reward(sample_with(0.5, 0.5, 0.9), kJBondPenalty, true) == kJBondPenalty);
  CHECK(kJBondPenalty == -std::log(16.0));
}

TEST_CASE("jbond_reward_expectation") {
  CHECK(jbond_reward_expectation(0.5) == Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(std::abs(jbond_reward_expectation(0.5) - std::log(0.5)) <= 1e-15);
  CHECK(jbond_reward_expectation(1.0) == 0.0);
  CHECK(jbond_reward_expectation(0.0) == kJBondPenalty);
  CHECK_THROWS_AS(jbond_reward_expectation(1.5), InvalidArgument);
}

TEST_CASE("empirical reward calibration over 1e5 anchor pairs") {
  // ten tie-free outcomes, uniform anchor: outcome i has p_leq = (i + 1) / 10
  std::vector<double> base(10, 0.1), r(10);
  std::iota(r.begin(), r.end(), 0.0);
  Rng rng(12);
  for (std::size_t y : {0, 4, 8}) {
    const double p_leq = (y + 1) / 10.0;
    const int draws = 100000;
    double total = 0.0;
    for (int i = 0; i < draws; ++i) {
      total += jbond_reward(sample_with(r[y], r[rng.categorical(base)], r[rng.categorical(base)]));
    }
    const double expected = jbond_reward_expectation(p_leq);
    const double q = (1 - p_leq) * (1 - p_leq);
    const double sd = std::abs(kJBondPenalty) * std::sqrt(q * (1 - q) / draws);
    CHECK(std::abs(total / draws - expected) <= 3 * sd);
  }
}

TEST_CASE("gradient with eta = gamma = 0 is unbiased for the calibrated Bo2 Jeffreys gradient") {
  auto t = toy(5);
  TrainState state = TrainState::start(t.reference);
  Rng rng(5);
  for (double& v : state.policy.mutable_params()) v += 0.5 * rng.normal();
  JBondConfig config;
  config.beta = 0.4;
  config.eta = 0.0;
  config.gamma = 0.0;
  config.batch_size = 1;

  const Policy& pi = state.policy;
  const auto anchor_probs = state.anchor.probabilities(0);
  const auto& rewards = t.prompts[0].rewards;
  const auto bo2 = bon_distribution(anchor_probs, rewards, 2);
  const auto q = exact_quantiles(anchor_probs, rewards, TieMode::pooled);
  const auto log_pi = pi.log_probabilities(0);
  const auto log_anchor = state.anchor.log_probabilities(0);
  std::vector<double> w(4);
  for (std::size_t y = 0; y < 4; ++y) {
    const double ret = jbond_reward_expectation(q[y].p_leq) - (log_pi[y] - log_anchor[y]);
    w[y] = -(1 - config.beta) * bo2.probs[y] - config.beta * std::exp(log_pi[y]) * ret;
  }
  std::vector<double> target(pi.layout().total, 0.0);
  pi.add_weighted_scores(0, w, target);

  const std::size_t dim = target.size();
  std::vector<double> sum(dim, 0.0), sum_sq(dim, 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    state.step = i;
    const auto g = jbond_gradient(state, config, t.prompts);
    for (std::size_t k = 0; k < dim; ++k) sum[k] += g.values[k], sum_sq[k] += g.values[k] * g.values[k];
  }
  for (std::size_t k = 0; k < dim; ++k) {
    const double mean = sum[k] / draws;
    const double se = std::sqrt((sum_sq[k] / draws - mean * mean) / (draws - 1));
    CHECK(std::abs(mean - target[k]) <= 3.5 * se);
  }
}

TEST_CASE("EMA anchor stays in the envelope of past iterates") {
  auto t = toy(8, 3);
  JBondConfig config;
  config.eta = 0.1;
  config.gamma = 0.5;
  config.batch_size = 6;
  config.steps = 300;
  TrainState state = TrainState::start(t.reference);
  const std::size_t dim = state.policy.layout().total;
  std::vector<double> lo(state.anchor.params().begin(), state.anchor.params().end());
  std::vector<double> hi = lo;
  for (int step = 0; step < config.steps; ++step) {
    jbond_update(state, config, t.prompts);
    for (std::size_t k = 0; k < dim; ++k) {
      lo[k] = std::min(lo[k], state.policy.params()[k]);
      hi[k] = std::max(hi[k], state.policy.params()[k]);
      CHECK(state.anchor.params()[k] >= lo[k] - 1e-12);
      CHECK(state.anchor.params()[k] <= hi[k] + 1e-12);
    }
  }
}

TEST_CASE("degenerate config only shrinks KL to the anchor") {
  auto t = toy(9);
  TrainState state = TrainState::start(t.reference);
  Rng rng(9);
  for (double& v : state.policy.mutable_params()) v += rng.normal();
  JBondConfig config;
  config.beta = 1.0;
  config.eta = 0.0;
  config.gamma = 0.0;
  config.alpha = 0.0;
  config.batch_size = 32;
  config.optimizer.learning_rate = 0.05;
  const double before = exact_kl(state.policy.probabilities(0), state.anchor.probabilities(0));
  for (int i = 0; i < 100; ++i) jbond_update(state, config, t.prompts);
  const double after = exact_kl(state.policy.probabilities(0), state.anchor.probabilities(0));
  CHECK(after < 0.5 * before);
  CHECK(state.anchor.param_vector().values == t.reference.param_vector().values);
}

TEST_CASE("hard anchor updates replace the anchor on schedule") {
  auto t = toy(10);
  JBondConfig config;
  config.anchor_update_period = 5;
  config.batch_size = 4;
  TrainState state = TrainState::start(t.reference);
  for (int i = 1; i <= 5; ++i) {
    jbond_update(state, config, t.prompts);
    if (i < 5) CHECK(state.anchor.param_vector().values == t.reference.param_vector().values);
  }
  CHECK(state.anchor.param_vector().values == state.policy.param_vector().values);
}

TEST_CASE("run_jbond determinism and empty runs") {
  auto t = toy(11, 2);
  JBondConfig config;
  config.steps = 0;
  TrainState empty = TrainState::start(t.reference);
  CHECK(run_jbond(empty, config, t.prompts).empty());
  CHECK(empty.policy.param_vector().values == t.reference.param_vector().values);

  config.steps = 60;
  config.batch_size = 4;
  config.seed = 3;
  const auto a = run_jbond(config, t.prompts, t.reference);
  const auto b = run_jbond(config, t.prompts, t.reference);
  REQUIRE(a.size() == 60);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].reward_mean == b[i].reward_mean);
    CHECK(a[i].kl_to_ref == b[i].kl_to_ref);
    CHECK(a[i].jeffreys == b[i].jeffreys);
  }
  config.seed = 4;
  const auto c = run_jbond(config, t.prompts, t.reference);
  CHECK(c.back().kl_to_ref != a.back().kl_to_ref);

  JBondConfig bad;
  bad.eta = 2.0;
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  bad = JBondConfig{};
  bad.gamma = -1.0;
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
}
