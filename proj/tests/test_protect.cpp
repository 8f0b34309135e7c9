#include <doctest.h>

#include <cmath>

#include "splitshield/errors.hpp"
#include "splitshield/protect.hpp"
#include "support/oracles.hpp"

using namespace splitshield;

namespace {

GradStats stats_of(double u, double v, double delta_sq, double p, std::size_t d) {
  GradStats s;
  s.u = u;
  s.v = v;
  s.delta_norm_sq = delta_sq;
  s.p = p;
  s.d = d;
  s.mean_pos = Vec(d, 0.0);
  s.mean_neg = Vec(d, 0.0);
  if (delta_sq > 0.0) s.mean_pos[0] = std::sqrt(delta_sq);
  return s;
}

double budget_of(const MarvellSolution& sol, const GradStats& s) {
  double dm1 = static_cast<double>(s.d) - 1.0;
  return s.p * (sol.lam1_pos + dm1 * sol.lam2_pos) +
         (1.0 - s.p) * (sol.lam1_neg + dm1 * sol.lam2_neg);
}

}  // namespace

TEST_CASE("marvell_objective: hand-evaluated value") {
  GradStats s = stats_of(1.0, 1.0, 1.0, 0.5, 2);
  double obj = marvell_objective({0, 0, 0, 0}, s);
  CHECK(obj == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(obj - 2.0 * 2 == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("marvell_objective: identical classes with no gap give sumKL zero") {
  GradStats s = stats_of(0.7, 0.7, 0.0, 0.3, 5);
  double obj = marvell_objective({0.2, 0.1, 0.2, 0.1}, s);
  CHECK(obj == doctest::Approx(2.0 * 5).epsilon(1e-12));
}

TEST_CASE("marvell_objective: equals twice the induced-pair sumKL plus 2d") {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t d = 2 + rng.uniform_below(6);
    GradStats s = stats_of(0.2 + rng.uniform(), 0.2 + rng.uniform(), 2.0 * rng.uniform(),
                           0.05 + 0.4 * rng.uniform(), d);
    double lam1_pos = rng.uniform(), lam2_pos = lam1_pos * rng.uniform();
    double lam1_neg = rng.uniform(), lam2_neg = lam1_neg * rng.uniform();
    double obj = marvell_objective({lam1_pos, lam2_pos, lam1_neg, lam2_neg}, s);

    // The induced pair: perturbed positive and negative class distributions.
    Vec dir(d, 0.0);
    dir[0] = 1.0;
    Vec mean_pos(d, 0.0);
    mean_pos[0] = std::sqrt(s.delta_norm_sq);
    GaussianSpec pos{mean_pos, lam1_pos + s.u, lam2_pos + s.u, dir};
    GaussianSpec neg{Vec(d, 0.0), lam1_neg + s.v, lam2_neg + s.v, dir};
    CHECK(obj == doctest::Approx(2.0 * gaussian_sum_kl(pos, neg) + 2.0 * d).epsilon(1e-9));
  }
}

TEST_CASE("marvell_solve: P = 0 has the singleton solution") {
  GradStats s = stats_of(0.5, 1.5, 2.0, 0.2, 4);
  MarvellSolution sol = marvell_solve(s, 0.0);
  CHECK(sol.lam1_pos == 0.0);
  CHECK(sol.lam2_pos == 0.0);
  CHECK(sol.lam1_neg == 0.0);
  CHECK(sol.lam2_neg == 0.0);
  CHECK(sol.objective == doctest::Approx(marvell_objective({0, 0, 0, 0}, s)));
  CHECK_THROWS_AS(marvell_solve(s, -1.0), ArgumentError);
}

TEST_CASE("marvell_solve: class symmetry when u = v and p = 1/2") {
  GradStats s = stats_of(0.8, 0.8, 1.5, 0.5, 6);
  for (double power : {0.3, 1.0, 4.0}) {
    MarvellSolution sol = marvell_solve(s, power);
    CHECK(std::abs(sol.lam1_pos - sol.lam1_neg) < 1e-6 * (1.0 + sol.lam1_pos));
    CHECK(std::abs(sol.lam2_pos - sol.lam2_neg) < 1e-6 * (1.0 + sol.lam2_pos));
  }
}

TEST_CASE("marvell_solve: budget active and Remark zero pattern") {
  Rng rng(42);
  for (int trial = 0; trial < 15; ++trial) {
    std::size_t d = 2 + rng.uniform_below(15);
    GradStats s = stats_of(0.1 + 1.9 * rng.uniform(), 0.1 + 1.9 * rng.uniform(),
                           4.0 * rng.uniform(), 0.05 + 0.45 * rng.uniform(), d);
    double power = 0.1 + 9.9 * rng.uniform();
    MarvellSolution sol = marvell_solve(s, power);
    CHECK(budget_of(sol, s) == doctest::Approx(power).epsilon(1e-6));
    if (s.u >= s.v)
      CHECK(sol.lam2_pos == 0.0);
    else
      CHECK(sol.lam2_neg == 0.0);
    CHECK(sol.lam2_pos <= sol.lam1_pos + 1e-12);
    CHECK(sol.lam2_neg <= sol.lam1_neg + 1e-12);
    CHECK(sol.sum_kl_star == doctest::Approx(sol.objective - 2.0 * d));
  }
}

TEST_CASE("marvell_solve: matches the grid-search oracle") {
  Rng rng(43);
  for (int trial = 0; trial < 6; ++trial) {
    std::size_t d = 2 + rng.uniform_below(15);
    GradStats s = stats_of(0.1 + 1.9 * rng.uniform(), 0.1 + 1.9 * rng.uniform(),
                           4.0 * rng.uniform(), 0.05 + 0.45 * rng.uniform(), d);
    double power = 0.1 + 9.9 * rng.uniform();
    MarvellSolution sol = marvell_solve(s, power);
    auto grid = oracle::marvell_grid_oracle(s, power, 200);
    CHECK(sol.objective <= grid.objective + 1e-4 * grid.objective);
    CHECK(std::abs(sol.objective - grid.objective) <= 1e-4 * grid.objective);
  }
}

TEST_CASE("tune_power: already-satisfied target returns without growth") {
  GradStats s = stats_of(1.0, 1.0, 1.0, 0.5, 2);
  double at_zero = marvell_objective({0, 0, 0, 0}, s) - 2.0 * 2;
  PowerTuneResult r = tune_power(s, at_zero, 1.0);
  CHECK(r.power == 0.0);
  CHECK(r.solution.sum_kl_star <= at_zero);
  CHECK(r.trajectory.size() == 1);
}

TEST_CASE("tune_power: L targets are met and sumKL decreases in P") {
  GradStats s = stats_of(0.6, 1.1, 3.0, 0.15, 8);
  for (double l : {0.1, 0.2, 0.3, 0.4}) {
    double target = (2.0 - 4.0 * l) * (2.0 - 4.0 * l);
    PowerTuneResult r = tune_power(s, target, 0.25 * (s.u + s.v) * 8);
    CHECK(r.solution.sum_kl_star <= target);
    // Along the visited trajectory, sorted by power, sumKL* never increases.
    auto traj = r.trajectory;
    std::sort(traj.begin(), traj.end());
    for (std::size_t i = 1; i < traj.size(); ++i)
      CHECK(traj[i].second <= traj[i - 1].second + 1e-9 * (1.0 + traj[i - 1].second));
  }
  CHECK_THROWS_AS(tune_power(s, 1e-9, 1e-12, 1.0001, 3), ConvergenceError);
}

TEST_CASE("iso_protect: s = 0 and all-zero batches pass through") {
  Rng rng(44);
  Mat g(3, 2);
  g.set_row(0, {1, 2});
  g.set_row(1, {-1, 0});
  g.set_row(2, {0.5, 0.5});
  Mat out = iso_protect(g, 0.0, rng);
  CHECK(out.a == g.a);
  Mat zeros(4, 2);
  CHECK(iso_protect(zeros, 2.0, rng).a == zeros.a);
  CHECK_THROWS_AS(iso_protect(g, -0.5, rng), ArgumentError);
}

TEST_CASE("iso_protect: mean added squared norm matches s * max norm^2") {
  Rng rng(45);
  Mat g(2, 4);
  g.set_row(0, {2, 0, 0, 0});  // max ||g||^2 = 4
  g.set_row(1, {0, 1, 0, 0});
  double acc = 0.0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    Mat out = iso_protect(g, 1.0, rng);
    for (std::size_t j = 0; j < 4; ++j) {
      double dlt = out(0, j) - g(0, j);
      acc += dlt * dlt;
    }
  }
  CHECK(acc / trials == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("max_norm_protect: equal-norm rows pass through, noise is collinear") {
  Rng rng(46);
  Mat g(2, 2);
  g.set_row(0, {3, 4});
  g.set_row(1, {-4, 3});  // same norm
  Mat out = max_norm_protect(g, rng);
  CHECK(out.a == g.a);

  Mat g2(2, 2);
  g2.set_row(0, {4, 0});
  g2.set_row(1, {0, 1});
  Mat out2 = max_norm_protect(g2, rng);
  // Row 1 noise must be collinear with (0, 1): first coordinate unchanged.
  CHECK(out2(1, 0) == 0.0);
  // Zero rows pass through.
  Mat g3(2, 2);
  g3.set_row(0, {1, 0});
  Mat out3 = max_norm_protect(g3, rng);
  CHECK(out3(1, 0) == 0.0);
  CHECK(out3(1, 1) == 0.0);
}

TEST_CASE("max_norm_protect: expected squared norm is lifted to the max") {
  Rng rng(47);
  Mat g(2, 2);
  g.set_row(0, {2, 0});   // M = 2
  g.set_row(1, {0, 1});   // ||g|| = M/2
  double acc = 0.0;
  const int trials = 40000;
  for (int t = 0; t < trials; ++t) {
    Mat out = max_norm_protect(g, rng);
    acc += out(1, 0) * out(1, 0) + out(1, 1) * out(1, 1);
  }
  CHECK(acc / trials == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("protections add zero-mean noise") {
  Rng rng(48);
  Mat g(4, 3);
  g.set_row(0, {1, 0, 0});
  g.set_row(1, {0, 2, 0});
  g.set_row(2, {-1, 0, 1});
  g.set_row(3, {0.5, -0.5, 0});
  std::vector<int> labels{1, 0, 0, 1};

  auto check_zero_mean = [&](auto&& protect_fn) {
    const int trials = 20000;
    Vec mean_delta(g.a.size(), 0.0);
    Vec sq(g.a.size(), 0.0);
    for (int t = 0; t < trials; ++t) {
      Mat out = protect_fn();
      for (std::size_t i = 0; i < g.a.size(); ++i) {
        double dlt = out.a[i] - g.a[i];
        mean_delta[i] += dlt;
        sq[i] += dlt * dlt;
      }
    }
    for (std::size_t i = 0; i < g.a.size(); ++i) {
      double m = mean_delta[i] / trials;
      double var = sq[i] / trials - m * m;
      double se = std::sqrt(std::max(var, 1e-30) / trials);
      CHECK(std::abs(m) <= 3.5 * se + 1e-12);
    }
  };
  check_zero_mean([&] { return iso_protect(g, 1.0, rng); });
  check_zero_mean([&] { return max_norm_protect(g, rng); });
  check_zero_mean([&] { return marvell_protect(g, labels, 1.0, rng); });
}

TEST_CASE("marvell_protect: huge target adds no noise") {
  Rng rng(49);
  Mat g(4, 2);
  g.set_row(0, {1, 0});
  g.set_row(1, {0.9, 0.1});
  g.set_row(2, {-1, 0});
  g.set_row(3, {-0.9, -0.1});
  std::vector<int> labels{1, 1, 0, 0};
  Mat out = marvell_protect(g, labels, 1e6, rng);
  CHECK(out.a == g.a);
}

TEST_CASE("marvell_protect: noise covariance matches the solution per class") {
  // Fixed stats so we can compare against the tuned solution directly.
  Rng rng(50);
  const std::size_t d = 4;
  const double target = 1.0;

  // A large synthetic batch with known structure.
  Vec mean_pos(d, 0.0), mean_neg(d, 0.0);
  mean_pos[0] = 2.0;
  StructuredCov pos_cov{0.25, 0.25, {1, 0, 0, 0}};
  StructuredCov neg_cov{0.16, 0.16, {1, 0, 0, 0}};
  const std::size_t n_pos = 2000, n_neg = 6000;
  Mat pos = sample_structured_gaussian(mean_pos, pos_cov, n_pos, rng);
  Mat neg = sample_structured_gaussian(mean_neg, neg_cov, n_neg, rng);
  Mat g(n_pos + n_neg, d);
  std::vector<int> labels(n_pos + n_neg);
  for (std::size_t i = 0; i < n_pos; ++i) {
    g.set_row(i, pos.row(i));
    labels[i] = 1;
  }
  for (std::size_t i = 0; i < n_neg; ++i) {
    g.set_row(n_pos + i, neg.row(i));
    labels[n_pos + i] = 0;
  }

  GradStats s = fit_grad_stats(g, labels);
  PowerTuneResult tuned = tune_power(s, target, 0.25 * (s.u + s.v) * d);
  const MarvellSolution& sol = tuned.solution;
  Vec dir = scale(sub(s.mean_pos, s.mean_neg), 1.0 / std::sqrt(s.delta_norm_sq));

  // Empirical covariance of the added noise on positive rows over repetitions.
  const int reps = 60;
  double var_along = 0.0, var_orth = 0.0;
  std::size_t count = 0;
  Vec orth(d, 0.0);
  orth[1] = 1.0;
  orth = sub(orth, scale(dir, dir[1]));
  orth = scale(orth, 1.0 / norm2(orth));
  for (int r = 0; r < reps; ++r) {
    Mat out = marvell_protect(g, labels, target, rng);
    for (std::size_t i = 0; i < n_pos; ++i) {
      Vec delta = sub(out.row(i), g.row(i));
      double along = dot(delta, dir);
      double across = dot(delta, orth);
      var_along += along * along;
      var_orth += across * across;
      ++count;
    }
  }
  var_along /= static_cast<double>(count);
  var_orth /= static_cast<double>(count);
  CHECK(var_along == doctest::Approx(sol.lam1_pos).epsilon(0.05));
  if (sol.lam2_pos > 1e-9)
    CHECK(var_orth == doctest::Approx(sol.lam2_pos).epsilon(0.05));
  else
    CHECK(var_orth <= 0.05 * sol.lam1_pos);
}

TEST_CASE("marvell_protect: refit sumKL of the perturbed population meets the target") {
  Rng rng(51);
  const std::size_t d = 4;
  const double target = 0.64;
  Vec mean_pos(d, 0.0), mean_neg(d, 0.0);
  mean_pos[0] = 1.5;
  const std::size_t n_pos = 1000, n_neg = 9000;
  Mat pos = sample_structured_gaussian(mean_pos, {0.3, 0.3, {1, 0, 0, 0}}, n_pos, rng);
  Mat neg = sample_structured_gaussian(mean_neg, {0.2, 0.2, {1, 0, 0, 0}}, n_neg, rng);
  Mat g(n_pos + n_neg, d);
  std::vector<int> labels(n_pos + n_neg);
  for (std::size_t i = 0; i < n_pos; ++i) {
    g.set_row(i, pos.row(i));
    labels[i] = 1;
  }
  for (std::size_t i = 0; i < n_neg; ++i) {
    g.set_row(n_pos + i, neg.row(i));
    labels[n_pos + i] = 0;
  }

  Mat out = marvell_protect(g, labels, target, rng);

  // Refit a structured pair to the perturbed rows: variance along the fitted
  // mean-gap direction and the average orthogonal variance, per class.
  auto refit = [&](int label) {
    Mat rows(label == 1 ? n_pos : n_neg, d);
    std::size_t at = 0;
    for (std::size_t i = 0; i < out.rows; ++i)
      if (labels[i] == label) rows.set_row(at++, out.row(i));
    return rows;
  };
  Mat pos2 = refit(1), neg2 = refit(0);
  Vec mu_p = mean_rows(pos2), mu_n = mean_rows(neg2);
  Vec delta = sub(mu_p, mu_n);
  Vec dir = scale(delta, 1.0 / norm2(delta));
  auto structured = [&](const Mat& rows, const Vec& mu) {
    double along = 0.0, total = 0.0;
    for (std::size_t i = 0; i < rows.rows; ++i) {
      Vec dv = sub(rows.row(i), mu);
      double a = dot(dv, dir);
      along += a * a;
      total += dot(dv, dv);
    }
    along /= static_cast<double>(rows.rows);
    double orth = (total / static_cast<double>(rows.rows) - along) /
                  (static_cast<double>(d) - 1.0);
    return GaussianSpec{mu, along, orth, dir};
  };
  GaussianSpec sp = structured(pos2, mu_p), sn = structured(neg2, mu_n);
  double fitted_sum_kl_star = 2.0 * gaussian_sum_kl(sp, sn);  // paper-objective units
  CHECK(fitted_sum_kl_star <= 1.2 * target);
}

TEST_CASE("protector: single-class batch passes through for marvell and max_norm") {
  Rng rng(52);
  Mat g(2, 2);
  g.set_row(0, {1, 1});
  g.set_row(1, {2, 2});
  std::vector<int> ones{1, 1};
  ProtectionConfig cfg;
  cfg.kind = ProtectionConfig::Kind::marvell;
  cfg.marvell_L = 0.3;
  Protector prot(cfg);
  CHECK(prot.apply(g, ones, rng).a == g.a);
  ProtectionConfig cfg2;
  cfg2.kind = ProtectionConfig::Kind::max_norm;
  Protector prot2(cfg2);
  CHECK(prot2.apply(g, ones, rng).a == g.a);
}

TEST_CASE("protection config: target resolution") {
  ProtectionConfig cfg;
  cfg.kind = ProtectionConfig::Kind::marvell;
  cfg.marvell_L = 0.3;
  CHECK(marvell_target_sum_kl(cfg) == doctest::Approx(0.64));
  cfg.marvell_L.reset();
  cfg.marvell_sum_kl = 0.25;
  CHECK(marvell_target_sum_kl(cfg) == 0.25);
  cfg.marvell_L = 0.3;
  CHECK_THROWS_AS(marvell_target_sum_kl(cfg), ArgumentError);
  cfg.marvell_L.reset();
  cfg.marvell_sum_kl.reset();
  CHECK_THROWS_AS(marvell_target_sum_kl(cfg), ArgumentError);
}
