#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "splitshield/errors.hpp"
#include "splitshield/metrics.hpp"
#include "support/oracles.hpp"

using namespace splitshield;

TEST_CASE("auc: perfect separation and all-ties") {
  CHECK(auc({{0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}}) == 1.0);
  CHECK(auc({{0.3, 0.3, 0.3, 0.3}, {1, 0, 1, 0}}) == 0.5);
}

TEST_CASE("auc: hand example via pairwise definition") {
  ScoredLabels data{{0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}};
  CHECK(auc(data) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(oracle::auc_brute_force(data.scores, data.labels) == doctest::Approx(0.75));
}

TEST_CASE("auc: single-class input is an error") {
  CHECK_THROWS_AS(auc({{0.1, 0.2}, {1, 1}}), DegenerateDataError);
}

TEST_CASE("auc: matches the O(n^2) brute force, including ties") {
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    std::size_t n = 5 + rng.uniform_below(200);
    Vec scores(n);
    std::vector<int> labels(n);
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse quantization forces plenty of ties.
      scores[i] = std::floor(rng.uniform() * 8.0) / 8.0;
      labels[i] = rng.uniform() < 0.4 ? 1 : 0;
      (labels[i] ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    CHECK(auc({scores, labels}) ==
          doctest::Approx(oracle::auc_brute_force(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("auc: complement and monotone-transform invariance") {
  Rng rng(32);
  std::size_t n = 64;
  Vec scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.normal();  // ties have measure zero
    labels[i] = i % 3 == 0 ? 1 : 0;
  }
  double a = auc({scores, labels});
  Vec neg = scores, warped = scores;
  for (auto& s : neg) s = -s;
  for (auto& s : warped) s = std::exp(2.0 * s) + 3.0;
  CHECK(auc({neg, labels}) == doctest::Approx(1.0 - a).epsilon(1e-12));
  CHECK(auc({warped, labels}) == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("ace: two-bin hand example") {
  CHECK(ace({0.2, 0.2, 0.8, 0.8}, {0, 0, 1, 1}, {2}) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("ace: calibrated constant predictor scores zero") {
  Vec probs(8, 0.25);
  std::vector<int> labels{1, 0, 0, 0, 1, 0, 0, 0};
  CHECK(ace(probs, labels, {1}) == doctest::Approx(0.0).epsilon(1e-12));
  // With several bins the same holds whenever every bin hits the base rate.
  Vec half(8, 0.5);
  std::vector<int> alternating{1, 0, 1, 0, 1, 0, 1, 0};
  CHECK(ace(half, alternating, {4}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ace: single bin is |mean prob - positive fraction|") {
  Vec probs{0.1, 0.5, 0.9};
  std::vector<int> labels{0, 1, 1};
  double m = (0.1 + 0.5 + 0.9) / 3.0;
  double f = 2.0 / 3.0;
  CHECK(ace(probs, labels, {1}) == doctest::Approx(std::abs(m - f)).epsilon(1e-12));
}

TEST_CASE("ace: permutation invariance and bin-count validation") {
  Rng rng(33);
  std::size_t n = 41;  // exercises the remainder-spread path
  Vec probs(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    probs[i] = rng.uniform();
    labels[i] = rng.uniform() < probs[i] ? 1 : 0;
  }
  double base = ace(probs, labels, {10});
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  Vec probs2(n);
  std::vector<int> labels2(n);
  for (std::size_t i = 0; i < n; ++i) {
    probs2[i] = probs[order[i]];
    labels2[i] = labels[order[i]];
  }
  CHECK(ace(probs2, labels2, {10}) == doctest::Approx(base).epsilon(1e-12));
  CHECK_THROWS_AS(ace({0.5, 0.5}, {0, 1}, {3}), ArgumentError);
}

TEST_CASE("gaussian_sum_kl: identical specs give zero") {
  GaussianSpec g{{1.0, 2.0, 3.0}, 2.0, 0.5, {1, 0, 0}};
  CHECK(gaussian_sum_kl(g, g) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("gaussian_sum_kl: unit-variance 1-D pair") {
  GaussianSpec a{{0.0}, 1.0, 1.0, {}};
  GaussianSpec b{{1.0}, 1.0, 1.0, {}};
  CHECK(gaussian_sum_kl(a, b) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gaussian_sum_kl: symmetric, nonnegative, zero iff equal") {
  Rng rng(34);
  Vec dir{0.6, 0.8, 0.0};
  for (int trial = 0; trial < 10; ++trial) {
    GaussianSpec a{{rng.normal(), rng.normal(), rng.normal()},
                   0.3 + rng.uniform(), 0.3 + rng.uniform(), dir};
    GaussianSpec b{{rng.normal(), rng.normal(), rng.normal()},
                   0.3 + rng.uniform(), 0.3 + rng.uniform(), dir};
    double ab = gaussian_sum_kl(a, b);
    double ba = gaussian_sum_kl(b, a);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(ab >= 0.0);
  }
  CHECK_THROWS_AS(gaussian_sum_kl(GaussianSpec{{0.0}, 0.0, 0.0, {}},
                                  GaussianSpec{{1.0}, 1.0, 1.0, {}}),
                  SingularDivergenceError);
}

TEST_CASE("gaussian_sum_kl: matches Monte Carlo on a random commuting pair") {
  Rng rng(35);
  Vec dir{1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)};
  GaussianSpec a{{0.3, -0.2, 0.5}, 1.7, 0.6, dir};
  GaussianSpec b{{-0.4, 0.1, 0.2}, 0.9, 1.3, dir};
  double closed = gaussian_sum_kl(a, b);
  auto mc = oracle::mc_sum_kl(a, b, 400000, rng);
  CHECK(std::abs(closed - mc.estimate) <= 3.5 * mc.stderr_);
}

TEST_CASE("tv bound and detection error") {
  CHECK(tv_upper_bound(0.0) == 0.0);
  CHECK(detection_error_lower_bound(0.0) == 0.5);
  double skl = (2.0 - 4.0 * 0.3) * (2.0 - 4.0 * 0.3);  // 0.64
  CHECK(tv_upper_bound(skl) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(detection_error_lower_bound(skl) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(tv_upper_bound(4.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(detection_error_lower_bound(4.0) == 0.0);
  CHECK(detection_error_lower_bound(100.0) == 0.0);
}

TEST_CASE("mc_tv_estimate: identical distributions give zero") {
  Rng rng(36);
  GaussianSpec g{{0.0, 0.0}, 1.0, 1.0, {}};
  auto tv = mc_tv_estimate(g, g, 10000, rng);
  CHECK(tv.estimate == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mc_tv_estimate: 1-D pair matches the quadrature oracle") {
  Rng rng(37);
  GaussianSpec a{{0.0}, 1.0, 1.0, {}};
  GaussianSpec b{{2.0}, 1.0, 1.0, {}};
  double truth = oracle::tv_1d_quadrature(0.0, 1.0, 2.0, 1.0);
  CHECK(truth == doctest::Approx(0.6826894921).epsilon(1e-4));  // P(|Z| <= 1)
  auto tv = mc_tv_estimate(a, b, 200000, rng);
  CHECK(std::abs(tv.estimate - truth) <= 3.0 * tv.stderr_ + 1e-3);
}

TEST_CASE("mc_tv_estimate: requires at least 1e4 samples") {
  Rng rng(38);
  GaussianSpec g{{0.0}, 1.0, 1.0, {}};
  CHECK_THROWS_AS(mc_tv_estimate(g, g, 100, rng), ArgumentError);
}

TEST_CASE("pinsker chain: TV estimate below the sumKL bound") {
  Rng rng(39);
  for (int trial = 0; trial < 10; ++trial) {
    Vec dir{0.0, 0.6, 0.8};
    GaussianSpec a{{rng.normal(), rng.normal(), rng.normal()},
                   0.4 + rng.uniform(), 0.4 + rng.uniform(), dir};
    GaussianSpec b{{rng.normal(), rng.normal(), rng.normal()},
                   0.4 + rng.uniform(), 0.4 + rng.uniform(), dir};
    auto tv = mc_tv_estimate(a, b, 20000, rng);
    double bound = tv_upper_bound(gaussian_sum_kl(a, b));
    CHECK(tv.estimate <= bound + 3.0 * tv.stderr_);
  }
}

TEST_CASE("fit_spherical_pair: degenerate identical rows") {
  Mat pos(2, 2), neg(2, 2);
  pos.set_row(0, {1, 0});
  pos.set_row(1, {1, 0});
  neg.set_row(0, {0, 0});
  neg.set_row(1, {0, 0});
  SphericalFit fit = fit_spherical_pair(pos, neg);
  CHECK(fit.pos.mean[0] == 1.0);
  CHECK(fit.neg.mean[0] == 0.0);
  CHECK(fit.pos.var_iso == 0.0);
  CHECK(fit.neg.var_iso == 0.0);
  CHECK(fit.degenerate);
}

TEST_CASE("fit_spherical_pair: hand MLE value") {
  Mat pos(2, 2), neg(2, 2);
  pos.set_row(0, {2, 0});
  pos.set_row(1, {0, 0});
  neg.set_row(0, {0, 1});
  neg.set_row(1, {0, -1});
  SphericalFit fit = fit_spherical_pair(pos, neg);
  CHECK(fit.pos.mean[0] == doctest::Approx(1.0));
  CHECK(fit.pos.var_iso == doctest::Approx(0.5));  // (1 + 1) / (2 * 2)
}

TEST_CASE("fit_spherical_pair: class swap negates the direction") {
  Mat pos(2, 2), neg(2, 2);
  pos.set_row(0, {2, 1});
  pos.set_row(1, {2, -1});
  neg.set_row(0, {0, 1});
  neg.set_row(1, {0, -1});
  SphericalFit ab = fit_spherical_pair(pos, neg);
  SphericalFit ba = fit_spherical_pair(neg, pos);
  CHECK(ab.pos.mean == ba.neg.mean);
  CHECK(ab.neg.var_iso == ba.pos.var_iso);
  for (std::size_t j = 0; j < 2; ++j)
    CHECK(ab.pos.dir[j] == doctest::Approx(-ba.pos.dir[j]));
  CHECK_THROWS_AS(fit_spherical_pair(Mat(0, 2), neg), ArgumentError);
}
