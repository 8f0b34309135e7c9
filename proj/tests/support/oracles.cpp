#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "splitshield/errors.hpp"

namespace splitshield::oracle {

double auc_brute_force(const Vec& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  if (pairs == 0) throw DegenerateDataError("auc_brute_force: one class missing");
  return wins / static_cast<double>(pairs);
}

namespace {

std::array<double, 3> solve_cubic_eigenvalues(const std::array<std::array<double, 3>, 3>& m) {
  // Characteristic roots of a symmetric 3x3 via the trigonometric method.
  const double p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
  const double tr = m[0][0] + m[1][1] + m[2][2];
  if (p1 == 0.0) {
    std::array<double, 3> diag{m[0][0], m[1][1], m[2][2]};
    std::sort(diag.begin(), diag.end(), std::greater<>());
    return diag;
  }
  const double q = tr / 3.0;
  const double p2 = (m[0][0] - q) * (m[0][0] - q) + (m[1][1] - q) * (m[1][1] - q) +
                    (m[2][2] - q) * (m[2][2] - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  std::array<std::array<double, 3>, 3> b;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b[i][j] = (m[i][j] - (i == j ? q : 0.0)) / p;
  double detb = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
  double r = detb / 2.0;
  r = std::min(1.0, std::max(-1.0, r));
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
  const double e2 = tr - e1 - e3;
  std::array<double, 3> out{e1, e2, e3};
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

std::array<double, 3> cross(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double norm3(const std::array<double, 3>& a) {
  return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
}

std::array<double, 3> eigenvector_for(const std::array<std::array<double, 3>, 3>& m,
                                      double lambda) {
  std::array<std::array<double, 3>, 3> a = m;
  for (int i = 0; i < 3; ++i) a[i][i] -= lambda;
  // Null vector of (m - lambda I): best cross product of two rows.
  std::array<std::array<double, 3>, 3> rows = a;
  std::array<double, 3> best{0, 0, 0};
  double best_norm = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      auto c = cross(rows[i], rows[j]);
      double n = norm3(c);
      if (n > best_norm) {
        best_norm = n;
        best = c;
      }
    }
  if (best_norm == 0.0) {
    // Degenerate eigenspace; any unit vector orthogonal to the other
    // eigenvectors would do, fall back to an axis.
    return {1.0, 0.0, 0.0};
  }
  for (auto& v : best) v /= best_norm;
  return best;
}

}  // namespace

Eigen3 eigen3_symmetric(const std::array<std::array<double, 3>, 3>& m) {
  Eigen3 out;
  out.values = solve_cubic_eigenvalues(m);
  for (int i = 0; i < 3; ++i) out.vectors[i] = eigenvector_for(m, out.values[i]);
  return out;
}

double tv_1d_quadrature(double mean_a, double var_a, double mean_b, double var_b) {
  auto pdf = [](double x, double mu, double var) {
    return std::exp(-(x - mu) * (x - mu) / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
  };
  const double sd = std::sqrt(std::max(var_a, var_b));
  const double lo = std::min(mean_a, mean_b) - 12.0 * sd;
  const double hi = std::max(mean_a, mean_b) + 12.0 * sd;
  const std::size_t n = 400000;
  const double h = (hi - lo) / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    double x = lo + h * static_cast<double>(i);
    double w = (i == 0 || i == n) ? 0.5 : 1.0;
    acc += w * std::abs(pdf(x, mean_a, var_a) - pdf(x, mean_b, var_b));
  }
  return 0.5 * acc * h;
}

McKl mc_sum_kl(const GaussianSpec& a, const GaussianSpec& b, std::size_t n, Rng& rng) {
  auto cov_of = [](const GaussianSpec& g) {
    StructuredCov c;
    c.lam_along = g.var_along;
    c.lam_iso = g.var_iso;
    c.dir = g.dir;
    if (c.dir.empty()) {
      c.dir = Vec(g.mean.size(), 0.0);
      c.dir[0] = 1.0;
    }
    return c;
  };
  StructuredCov ca = cov_of(a), cb = cov_of(b);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec xa = sample_structured_gaussian(a.mean, ca, 1, rng).row(0);
    Vec xb = sample_structured_gaussian(b.mean, cb, 1, rng).row(0);
    double term = (gaussian_log_pdf(xa, a) - gaussian_log_pdf(xa, b)) +
                  (gaussian_log_pdf(xb, b) - gaussian_log_pdf(xb, a));
    sum += term;
    sum_sq += term * term;
  }
  McKl out;
  double mean = sum / static_cast<double>(n);
  double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
  out.estimate = mean;
  out.stderr_ = std::sqrt(var / static_cast<double>(n));
  return out;
}

GridSolution marvell_grid_oracle(const GradStats& stats, double power, std::size_t ticks) {
  const bool lam2_pos_zeroed = stats.u >= stats.v;
  const double dm1 = static_cast<double>(stats.d) - 1.0;
  const std::array<double, 3> w = {
      stats.p, 1.0 - stats.p, lam2_pos_zeroed ? (1.0 - stats.p) * dm1 : stats.p * dm1};

  auto lams_of = [&](double x0, double x1, double x2) -> std::array<double, 4> {
    if (lam2_pos_zeroed) return {x0, 0.0, x1, x2};
    return {x0, x2, x1, 0.0};
  };
  auto feasible = [&](double x0, double x1, double x2) {
    return lam2_pos_zeroed ? x2 <= x1 + 1e-15 : x2 <= x0 + 1e-15;
  };

  GridSolution best;
  best.objective = std::numeric_limits<double>::infinity();
  best.lams = lams_of(0.0, 0.0, 0.0);
  if (power == 0.0) {
    best.objective = marvell_objective(best.lams, stats);
    return best;
  }

  // Budget shares s0 + s1 + s2 = power mapped to x_i = s_i / w_i.
  auto scan = [&](double s0_lo, double s0_hi, double s1_lo, double s1_hi) {
    for (std::size_t i = 0; i <= ticks; ++i) {
      double s0 = s0_lo + (s0_hi - s0_lo) * static_cast<double>(i) / static_cast<double>(ticks);
      for (std::size_t j = 0; j <= ticks; ++j) {
        double s1 =
            s1_lo + (s1_hi - s1_lo) * static_cast<double>(j) / static_cast<double>(ticks);
        double s2 = power - s0 - s1;
        if (s2 < -1e-12 || s0 < 0.0 || s1 < 0.0) continue;
        s2 = std::max(0.0, s2);
        double x0 = s0 / w[0], x1 = s1 / w[1], x2 = s2 / w[2];
        if (!feasible(x0, x1, x2)) continue;
        double obj = marvell_objective(lams_of(x0, x1, x2), stats);
        if (obj < best.objective) {
          best.objective = obj;
          best.lams = lams_of(x0, x1, x2);
        }
      }
    }
  };

  scan(0.0, power, 0.0, power);
  // One refinement pass around the best cell.
  double s0_best = best.lams[0] * w[0];
  double s1_best = best.lams[2] * w[1];
  double step = power / static_cast<double>(ticks);
  scan(std::max(0.0, s0_best - 2.0 * step), std::min(power, s0_best + 2.0 * step),
       std::max(0.0, s1_best - 2.0 * step), std::min(power, s1_best + 2.0 * step));
  return best;
}

double discrete_kl_to_product(const Mat& joint, const Vec& p, const Vec& q) {
  double kl = 0.0;
  for (std::size_t x = 0; x < joint.rows; ++x)
    for (std::size_t y = 0; y < joint.cols; ++y) {
      double dxy = joint(x, y);
      if (dxy == 0.0) continue;
      double denom = p[x] * q[y];
      if (denom == 0.0) return std::numeric_limits<double>::infinity();
      kl += dxy * std::log(dxy / denom);
    }
  return kl;
}

}  // namespace splitshield::oracle
