#include <cmath>
#include <numeric>
#include <sstream>

#include "bond/error.hpp"
#include "bond/policy.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace bond;
using doctest::Approx;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

Policy random_policy(const PromptSet& prompts, PolicyKind kind, Rng& rng, double scale = 1.0) {
  Policy p = Policy::uniform(prompts, kind);
  for (double& v : p.mutable_params()) v = scale * rng.normal();
  return p;
}

PromptSet two_prompts(Vocab vocab) {
  const std::size_t m = vocab.outcome_count();
  std::vector<double> r(m);
  std::iota(r.begin(), r.end(), 0.0);
  return PromptSet({Prompt{4, vocab, r}, Prompt{10, vocab, r}});
}

}  // namespace

TEST_CASE("log_prob hand values") {
  auto four = testing::flat_prompt({0, 1, 2, 3});
  Policy u = Policy::uniform(four, PolicyKind::categorical);
  for (std::size_t y = 0; y < 4; ++y) CHECK(u.log_prob(0, y) == Approx(std::log(0.25)).epsilon(1e-15));

  auto two = testing::flat_prompt({0, 1});
  Policy c = Policy::categorical(two, {{0.0, std::log(3.0)}});
  CHECK(c.log_prob(0, 0) == Approx(std::log(0.25)).epsilon(1e-14));
  CHECK(c.log_prob(0, 1) == Approx(std::log(0.75)).epsilon(1e-14));

  auto seq = testing::single_prompt({0, 1, 2, 3}, Vocab{2, 2});
  Policy ar = Policy::uniform(seq, PolicyKind::autoregressive);
  CHECK(ar.layout().total == 6);  // 3 prefixes x 2 tokens
  for (std::size_t y = 0; y < 4; ++y) CHECK(ar.log_prob(0, y) == Approx(std::log(0.25)).epsilon(1e-15));
  CHECK_THROWS_AS(ar.log_prob(0, 4), LookupError);
  CHECK_THROWS_AS(ar.log_prob(1, 0), LookupError);
}

TEST_CASE("probabilities are normalized and positive") {
  Rng rng(3);
  const auto prompts = two_prompts(Vocab{3, 3});
  for (int trial = 0; trial < 20; ++trial) {
    for (auto kind : {PolicyKind::categorical, PolicyKind::autoregressive}) {
      Policy p = random_policy(prompts, kind, rng, 3.0);
      for (std::size_t i = 0; i < 2; ++i) {
        const auto probs = p.probabilities(i);
        CHECK(std::abs(sum(probs) - 1.0) <= (kind == PolicyKind::categorical ? 1e-12 : 1e-9));
        for (double v : probs) CHECK(v > 0.0);
        const auto logs = p.log_probabilities(i);
        for (std::size_t y = 0; y < probs.size(); ++y) CHECK(std::exp(logs[y]) == Approx(probs[y]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("sampling: point mass, determinism, frequencies") {
  auto four = testing::flat_prompt({0, 1, 2, 3});
  Policy peaked = Policy::categorical(four, {{0.0, 40.0, 0.0, 0.0}});
  for (const auto& o : peaked.sample(0, std::uint64_t{9}, 1000)) CHECK(o.index == 1);

  Rng rng(1);
  Policy p = random_policy(four, PolicyKind::categorical, rng);
  const auto a = p.sample(0, std::uint64_t{42}, 500);
  const auto b = p.sample(0, std::uint64_t{42}, 500);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].index == b[i].index);

  Policy u = Policy::uniform(four, PolicyKind::categorical);
  std::vector<int> counts(4, 0);
  for (const auto& o : u.sample(0, std::uint64_t{7}, 100000)) ++counts[o.index];
  for (int c : counts) CHECK(std::abs(c / 100000.0 - 0.25) <= 0.01);

  auto seq = testing::single_prompt({0, 1, 2, 3, 4, 5, 6, 7}, Vocab{2, 3});
  Policy ar = random_policy(seq, PolicyKind::autoregressive, rng);
  const auto probs = ar.probabilities(0);
  std::vector<int> ar_counts(8, 0);
  const int draws = 200000;
  for (const auto& o : ar.sample(0, std::uint64_t{8}, draws)) {
    ++ar_counts[o.index];
    CHECK(o.tokens == outcome_at(Vocab{2, 3}, o.index).tokens);
  }
  for (std::size_t y = 0; y < 8; ++y) {
    const double sd = std::sqrt(probs[y] * (1 - probs[y]) / draws);
    CHECK(std::abs(ar_counts[y] / double(draws) - probs[y]) <= 5 * sd);
  }
  CHECK_THROWS_AS(u.sample(0, std::uint64_t{1}, 0), InvalidArgument);
}

TEST_CASE("score of uniform two-outcome policy") {
  auto two = testing::flat_prompt({0, 1});
  Policy u = Policy::uniform(two, PolicyKind::categorical);
  const auto s = u.score(0, 0);
  REQUIRE(s.values.size() == 2);
  CHECK(s.values[0] == Approx(0.5).epsilon(1e-15));
  CHECK(s.values[1] == Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("score matches central finite differences on 100 random pairs") {
  Rng rng(17);
  const auto prompts = two_prompts(Vocab{2, 3});
  const double h = 1e-5;
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    for (auto kind : {PolicyKind::categorical, PolicyKind::autoregressive}) {
      Policy p = random_policy(prompts, kind, rng);
      const std::size_t prompt = rng.uniform() < 0.5 ? 0 : 1;
      const std::size_t y = static_cast<std::size_t>(rng.uniform() * 8);
      const auto s = p.score(prompt, y);
      for (std::size_t i = 0; i < p.layout().total; ++i) {
        Policy plus = p, minus = p;
        plus.mutable_params()[i] += h;
        minus.mutable_params()[i] -= h;
        const double fd = (plus.log_prob(prompt, y) - minus.log_prob(prompt, y)) / (2 * h);
        CHECK(std::abs(fd - s.values[i]) <= 1e-6 * std::max(1.0, std::abs(fd)));
      }
      ++checked;
    }
  }
  CHECK(checked == 100);
}

TEST_CASE("expected score vanishes and weighted scores agree with add_score") {
  Rng rng(23);
  const auto prompts = two_prompts(Vocab{3, 2});
  for (auto kind : {PolicyKind::categorical, PolicyKind::autoregressive}) {
    for (int trial = 0; trial < 10; ++trial) {
      Policy p = random_policy(prompts, kind, rng, 2.0);
      const auto probs = p.probabilities(1);
      std::vector<double> g(p.layout().total, 0.0);
      p.add_weighted_scores(1, probs, g);
      CHECK(testing::sup_norm(g) <= 1e-12);

      const auto w = testing::random_logits(rng, probs.size());
      std::vector<double> fast(p.layout().total, 0.0), slow(p.layout().total, 0.0);
      p.add_weighted_scores(1, w, fast);
      for (std::size_t y = 0; y < w.size(); ++y) p.add_score(1, y, w[y], slow);
      CHECK(testing::max_abs_diff(fast, slow) <= 1e-12);
      // prompt 0's block is untouched
      for (std::size_t i = 0; i < p.block(0).size(); ++i) CHECK(fast[i] == 0.0);
    }
  }
}

TEST_CASE("autoregressive_from reproduces a categorical distribution") {
  Rng rng(31);
  const auto prompts = two_prompts(Vocab{3, 3});
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> probs, logits;
    for (int p = 0; p < 2; ++p) {
      logits.push_back(testing::random_logits(rng, 27, 2.0));
      probs.push_back(std::vector<double>(27));
      softmax(logits.back(), probs.back());
    }
    Policy flat = Policy::categorical(prompts, logits);
    Policy ar = Policy::autoregressive_from(prompts, probs);
    for (std::size_t p = 0; p < 2; ++p)
      for (std::size_t y = 0; y < 27; ++y) CHECK(std::abs(flat.log_prob(p, y) - ar.log_prob(p, y)) <= 1e-9);
  }
}

TEST_CASE("constant logit shifts leave probabilities unchanged") {
  Rng rng(37);
  const auto prompts = two_prompts(Vocab{2, 2});
  Policy p = random_policy(prompts, PolicyKind::autoregressive, rng);
  Policy q = p;
  // shift every row of prompt 1 by its own constant
  const auto& blk = q.layout().blocks[1];
  for (std::size_t row = 0; row < blk.rows; ++row) {
    const double c = 10.0 * rng.normal();
    for (std::size_t k = 0; k < blk.width; ++k) q.mutable_params()[blk.offset + row * blk.width + k] += c;
  }
  CHECK(testing::max_abs_diff(p.probabilities(1), q.probabilities(1)) <= 1e-12);
}

TEST_CASE("ema_blend") {
  auto two = testing::flat_prompt({0, 1});
  Policy a = Policy::categorical(two, {{0.0, 0.0}});
  Policy b = Policy::categorical(two, {{1.0, 3.0}});
  const auto half = ema_blend(a.param_vector(), b.param_vector(), 0.25);
  CHECK(half.values == std::vector<double>{0.25, 0.75});
  CHECK(ema_blend(a.param_vector(), b.param_vector(), 0.0).values == a.param_vector().values);
  CHECK(ema_blend(a.param_vector(), b.param_vector(), 1.0).values == b.param_vector().values);
  CHECK_THROWS_AS(ema_blend(a.param_vector(), b.param_vector(), 1.5), InvalidArgument);
  Policy c = Policy::uniform(testing::flat_prompt({0, 1, 2}), PolicyKind::categorical);
  CHECK_THROWS_AS(ema_blend(a.param_vector(), c.param_vector(), 0.5), ShapeMismatch);
  CHECK_THROWS_AS(a.set_params(c.param_vector()), ShapeMismatch);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(41);
  const auto prompts = two_prompts(Vocab{3, 2});
  for (auto kind : {PolicyKind::categorical, PolicyKind::autoregressive}) {
    Policy p = random_policy(prompts, kind, rng, 3.0);
    std::stringstream ss;
    write_policy(ss, p);
    Policy back = read_policy(ss, prompts);
    CHECK(back.kind() == kind);
    CHECK(back.layout() == p.layout());
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t y = 0; y < 9; ++y) CHECK(back.log_prob(i, y) == p.log_prob(i, y));
  }
  std::stringstream garbage("# kind=categorical\nnot,a,header\n");
  CHECK_THROWS(read_policy(garbage, prompts));
  std::stringstream truncated("# kind=categorical\nprompt_id,prefix_or_flat_index,token_index,logit\n4,0,-1,0.5\n");
  CHECK_THROWS(read_policy(truncated, prompts));
}
