#include <doctest.h>

#include <cmath>

#include "splitshield/errors.hpp"
#include "splitshield/linalg.hpp"
#include "splitshield/rng.hpp"
#include "support/oracles.hpp"

using namespace splitshield;

TEST_CASE("rng: identical seeds give bit-identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng c(42), d(43);
  bool differ = false;
  for (int i = 0; i < 16; ++i) differ |= c.next_u64() != d.next_u64();
  CHECK(differ);
}

TEST_CASE("rng: uniform in range and normal has sane moments") {
  Rng rng(7);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sum_sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("basic linalg examples") {
  CHECK(dot({1, 2}, {3, 4}) == 11.0);
  CHECK(norm2({3, 4}) == 5.0);
  Mat m(2, 2);
  m.set_row(0, {0, 0});
  m.set_row(1, {2, 4});
  Vec mu = mean_rows(m);
  CHECK(mu[0] == 1.0);
  CHECK(mu[1] == 2.0);
  CHECK_THROWS_AS(dot({1, 2}, {1}), ArgumentError);
}

TEST_CASE("structured gaussian: zero covariance returns the mean") {
  Rng rng(1);
  Vec mean{1.5, -2.0, 0.25};
  StructuredCov cov{0.0, 0.0, {1, 0, 0}};
  Mat s = sample_structured_gaussian(mean, cov, 8, rng);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) CHECK(s(i, j) == mean[j]);
}

TEST_CASE("structured gaussian: isotropic trace matches") {
  Rng rng(2);
  Vec mean(4, 0.0);
  StructuredCov cov{1.0, 1.0, {1, 0, 0, 0}};
  Mat s = sample_structured_gaussian(mean, cov, 100000, rng);
  CHECK(centered_cov_trace(s) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("structured gaussian: anisotropic variances split along dir") {
  Rng rng(3);
  Vec mean(3, 0.0);
  Vec e1{1, 0, 0};
  StructuredCov cov{4.0, 1.0, e1};
  Mat s = sample_structured_gaussian(mean, cov, 100000, rng);
  double v_along = 0.0, v_orth = 0.0;
  for (std::size_t i = 0; i < s.rows; ++i) {
    v_along += s(i, 0) * s(i, 0);
    v_orth += s(i, 1) * s(i, 1);
  }
  v_along /= static_cast<double>(s.rows);
  v_orth /= static_cast<double>(s.rows);
  CHECK(v_along == doctest::Approx(4.0).epsilon(0.05));
  CHECK(v_orth == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("structured gaussian: equal variances reduce to isotropic sampling") {
  Rng a(11), b(11);
  Vec mean{0.5, -0.5};
  Vec dir{std::sqrt(0.5), std::sqrt(0.5)};
  Mat s1 = sample_structured_gaussian(mean, {2.0, 2.0, dir}, 64, a);
  Mat s2 = sample_structured_gaussian(mean, {2.0, 2.0, {1.0, 0.0}}, 64, b);
  for (std::size_t i = 0; i < s1.a.size(); ++i) CHECK(s1.a[i] == s2.a[i]);
}

TEST_CASE("structured gaussian: argument errors") {
  Rng rng(1);
  CHECK_THROWS_AS(sample_structured_gaussian({0, 0}, {1.0, 1.0, {2.0, 0.0}}, 1, rng),
                  ArgumentError);
  CHECK_THROWS_AS(sample_structured_gaussian({0, 0}, {-1.0, 1.0, {1.0, 0.0}}, 1, rng),
                  ArgumentError);
}

TEST_CASE("top singular direction: diagonal covariance example") {
  Mat x(4, 2);
  x.set_row(0, {2, 0});
  x.set_row(1, {-2, 0});
  x.set_row(2, {0, 1});
  x.set_row(3, {0, -1});
  Vec v = top_singular_direction(x);
  CHECK(std::abs(v[0]) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(v[0] > 0.0);  // sign canonicalization
  CHECK(std::abs(v[1]) < 1e-6);
}

TEST_CASE("top singular direction: identical rows are degenerate") {
  Mat x(3, 2);
  for (int i = 0; i < 3; ++i) x.set_row(static_cast<std::size_t>(i), {1.0, 2.0});
  CHECK_THROWS_AS(top_singular_direction(x), DegenerateDataError);
}

TEST_CASE("top singular direction: matches 3x3 eigendecomposition oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    Mat x(6, 3);
    for (auto& v : x.a) v = rng.normal() * (1.0 + rng.uniform());
    Vec v = top_singular_direction(x, 5000, 1e-13);
    CHECK(norm2(v) == doctest::Approx(1.0).epsilon(1e-9));

    // Build the same biased covariance the implementation uses.
    Vec mu = mean_rows(x);
    std::array<std::array<double, 3>, 3> cov{};
    for (std::size_t i = 0; i < x.rows; ++i)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          cov[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] +=
              (x(i, static_cast<std::size_t>(a)) - mu[static_cast<std::size_t>(a)]) *
              (x(i, static_cast<std::size_t>(b)) - mu[static_cast<std::size_t>(b)]) /
              static_cast<double>(x.rows);
    auto eig = oracle::eigen3_symmetric(cov);
    Vec top{eig.vectors[0][0], eig.vectors[0][1], eig.vectors[0][2]};
    CHECK(std::abs(dot(v, top)) >= 1.0 - 1e-6);
  }
}

TEST_CASE("top singular direction: rayleigh quotient is non-decreasing") {
  // Re-run the iteration by hand and track v^T C v.
  Rng rng(5);
  Mat x(32, 4);
  for (auto& v : x.a) v = rng.normal();
  Vec mu = mean_rows(x);
  Mat cov(4, 4);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b)
        cov(a, b) += (x(i, a) - mu[a]) * (x(i, b) - mu[b]) / static_cast<double>(x.rows);
  Vec v(4, 0.5);
  double prev = -1.0;
  for (int it = 0; it < 50; ++it) {
    Vec w(4, 0.0);
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) w[a] += cov(a, b) * v[b];
    double nw = norm2(w);
    for (auto& c : w) c /= nw;
    double rayleigh = 0.0;
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) rayleigh += w[a] * cov(a, b) * w[b];
    CHECK(rayleigh >= prev - 1e-12);
    prev = rayleigh;
    v = w;
  }
}
