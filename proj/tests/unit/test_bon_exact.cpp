#include <cmath>
#include <numeric>

#include "bond/bon_exact.hpp"
#include "bond/error.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace bond;
using doctest::Approx;

TEST_CASE("quantiles of the two-outcome instance") {
  const std::vector<double> base{0.3, 0.7}, r{0.0, 1.0};
  const auto q = exact_quantiles(base, r);
  CHECK(q[0].p_less == 0.0);
  CHECK(q[0].p_leq == Approx(0.3).epsilon(1e-15));
  CHECK(q[1].p_less == Approx(0.3).epsilon(1e-15));
  CHECK(q[1].p_leq == Approx(1.0).epsilon(1e-15));
}

TEST_CASE("quantile tie modes") {
  const std::vector<double> base{0.2, 0.3, 0.5}, r{1.0, 1.0, 0.0};
  const auto pooled = exact_quantiles(base, r, TieMode::pooled);
  CHECK(pooled[0].p_less == Approx(0.5));
  CHECK(pooled[0].p_leq == Approx(1.0));
  CHECK(pooled[1].p_leq == Approx(1.0));
  const auto strict = exact_quantiles(base, r, TieMode::strict);
  // index 0 loses the tie to index 1
  CHECK(strict[0].p_less == Approx(0.5));
  CHECK(strict[0].p_leq == Approx(0.7));
  CHECK(strict[1].p_less == Approx(0.7));
  CHECK(strict[1].p_leq == Approx(1.0));
  CHECK(strict[2].p_less == 0.0);
}

TEST_CASE("bon_distribution hand values") {
  const std::vector<double> base{0.3, 0.7}, r{0.0, 1.0};
  const auto bd = bon_distribution(base, r, 2);
  CHECK(bd.probs[0] == Approx(0.09).epsilon(1e-14));
  CHECK(bd.probs[1] == Approx(0.91).epsilon(1e-14));
  CHECK(bd.correction[0] == Approx(1.0).epsilon(1e-15));
  CHECK(bd.correction[1] == Approx(1.3).epsilon(1e-14));
  CHECK(bon_distribution(base, r, 1).probs == base);
  CHECK(bond_reward(bd, 1) == Approx(0.26236426446749106).epsilon(1e-14));
  CHECK(bond_reward(bd, 0) == Approx(std::log(0.3)).epsilon(1e-14));
  for (int n = 1; n <= 8; ++n)
    CHECK(bon_distribution(base, r, n).probs[0] == Approx(std::pow(0.3, n)).epsilon(1e-13));
  CHECK_THROWS_AS(bon_distribution(base, r, 0), InvalidArgument);
  CHECK_THROWS_AS(bon_distribution(std::vector<double>{0.5, 0.6}, r, 2), InvalidArgument);
  CHECK_THROWS_AS(bon_distribution(base, std::vector<double>{1.0}, 2), InvalidArgument);
}

TEST_CASE("closed form matches brute force on random instances with ties") {
  Rng rng(101);
  int instances = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(rng.uniform() * 5);
    const int n = 1 + static_cast<int>(rng.uniform() * 4);
    const auto base = testing::random_distribution(rng, m);
    const auto r = testing::random_rewards(rng, m, trial % 2 == 0);
    const auto bd = bon_distribution(base, r, n);
    CHECK(testing::max_abs_diff(bd.probs, brute_force_bon(base, r, n)) <= 1e-12);
    CHECK(std::abs(std::accumulate(bd.probs.begin(), bd.probs.end(), 0.0) - 1.0) <= 1e-12);
    for (std::size_t y = 0; y < m; ++y) {
      CHECK(bd.correction[y] >= 1.0);
      CHECK(bd.correction[y] <= n + 1e-12);
      CHECK(bd.probs[y] == Approx(base[y] * std::pow(bd.quantiles[y].p_leq, n - 1) * bd.correction[y]).epsilon(1e-12));
    }
    ++instances;
  }
  CHECK(instances >= 100);
  CHECK_THROWS_AS(brute_force_bon(std::vector<double>(10, 0.1), std::vector<double>(10, 0.0), 8),
                  CapExceeded);
}

TEST_CASE("tilt equivalence and beta_BOND") {
  CHECK(bond_beta(2) == 1.0);
  CHECK(bond_beta(4) == 1.0 / 3.0);
  CHECK_THROWS_AS(bond_beta(1), InvalidArgument);
  CHECK(tilt_equivalence_check(std::vector<double>{0.3, 0.7}, std::vector<double>{0.0, 1.0}, 2) <= 1e-12);
  CHECK(tilt_equivalence_check(std::vector<double>(6, 1.0 / 6), std::vector<double>{0, 1, 2, 3, 4, 5}, 3) <= 1e-12);
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto base = testing::random_distribution(rng, 6);
    const auto r = testing::random_rewards(rng, 6, trial % 3 == 0);
    for (int n = 2; n <= 4; ++n) CHECK(tilt_equivalence_check(base, r, n) <= 1e-12);
  }
}

TEST_CASE("bond_reward is invariant under monotone reward transforms") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto base = testing::random_distribution(rng, 5);
    auto r = testing::random_rewards(rng, 5, true);
    std::vector<double> r2(5), r3(5);
    for (std::size_t i = 0; i < 5; ++i) {
      r2[i] = 2.0 * r[i] + 1.0;
      r3[i] = std::exp(3.0 * r[i]);
    }
    const auto a = bond_rewards(bon_distribution(base, r, 3));
    CHECK(a == bond_rewards(bon_distribution(base, r2, 3)));
    CHECK(a == bond_rewards(bon_distribution(base, r3, 3)));
  }
}

TEST_CASE("monotonicity in reward at equal base mass") {
  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    auto base = testing::random_distribution(rng, 6);
    base[1] = base[4];
    double s = std::accumulate(base.begin(), base.end(), 0.0);
    for (double& v : base) v /= s;
    const auto r = testing::random_rewards(rng, 6, false);
    const auto bd = bon_distribution(base, r, 3);
    if (r[1] < r[4]) CHECK(bd.probs[1] <= bd.probs[4]);
    if (r[4] < r[1]) CHECK(bd.probs[4] <= bd.probs[1]);
  }
}

TEST_CASE("continuous limit of the correction term") {
  const int n = 4;
  const double expected[] = {2.734375, 3.9072227478027344, 3.994144438765943};
  const int sizes[] = {4, 64, 1024};
  double previous = 0.0;
  for (int i = 0; i < 3; ++i) {
    const int m = sizes[i];
    std::vector<double> base(m, 1.0 / m), r(m);
    std::iota(r.begin(), r.end(), 0.0);
    const double c = bon_distribution(base, r, n).correction.back();
    CHECK(c == Approx(expected[i]).epsilon(1e-12));
    CHECK(c > previous);
    CHECK(c < n);
    previous = c;
  }
}

TEST_CASE("geometric_correction edge branches") {
  CHECK(geometric_correction(0.0, 5) == 5.0);
  CHECK(geometric_correction(1.0, 5) == 1.0);
  CHECK(geometric_correction(0.5, 3) == Approx(1.75).epsilon(1e-15));
  CHECK(geometric_correction(1e-14, 4) == Approx(4.0).epsilon(1e-12));
}

TEST_CASE("composition") {
  const std::vector<double> base{0.3, 0.7}, r{0.0, 1.0};
  const auto bo4 = compose_bon(base, r, 2, 2);
  CHECK(bo4[0] == Approx(0.0081).epsilon(1e-13));
  CHECK(bo4[1] == Approx(0.9919).epsilon(1e-13));
  CHECK(compose_bon(base, r, 2, 3)[0] == Approx(6.561e-5).epsilon(1e-12));
  CHECK(compose_bon(base, r, 3, 1) == bon_distribution(base, r, 3).probs);
  Rng rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const auto b = testing::random_distribution(rng, 5);
    const auto rr = testing::random_rewards(rng, 5, trial % 2 == 1);
    CHECK(testing::max_abs_diff(compose_bon(b, rr, 2, 3), bon_distribution(b, rr, 8).probs) <= 1e-10);
  }
  CHECK_THROWS_AS(compose_bon(base, r, 4, 9), CapExceeded);
}
