#include "splitshield/protect.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>

namespace splitshield {

double marvell_target_sum_kl(const ProtectionConfig& cfg) {
  if (cfg.marvell_sum_kl && cfg.marvell_L)
    throw ArgumentError("marvell target: set either sum_kl or L, not both");
  if (cfg.marvell_sum_kl) {
    if (*cfg.marvell_sum_kl <= 0.0) throw ArgumentError("marvell target: sum_kl must be > 0");
    return *cfg.marvell_sum_kl;
  }
  if (cfg.marvell_L) {
    double l = *cfg.marvell_L;
    if (!(l > 0.0 && l < 0.5)) throw ArgumentError("marvell target: L must be in (0, 0.5)");
    double t = 2.0 - 4.0 * l;
    return t * t;
  }
  throw ArgumentError("marvell target: neither sum_kl nor L configured");
}

GradStats fit_grad_stats(const Mat& grads, const std::vector<int>& labels) {
  if (grads.rows != labels.size()) throw ArgumentError("fit_grad_stats: row/label mismatch");
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += static_cast<std::size_t>(y != 0);
  std::size_t n_neg = grads.rows - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw ArgumentError("fit_grad_stats: both classes required");

  Mat pos(n_pos, grads.cols), neg(n_neg, grads.cols);
  std::size_t ip = 0, in = 0;
  for (std::size_t i = 0; i < grads.rows; ++i) {
    if (labels[i] != 0)
      pos.set_row(ip++, grads.row(i));
    else
      neg.set_row(in++, grads.row(i));
  }
  SphericalFit fit = fit_spherical_pair(pos, neg);

  GradStats s;
  s.mean_pos = fit.pos.mean;
  s.mean_neg = fit.neg.mean;
  s.u = std::max(fit.pos.var_iso, 1e-12);
  s.v = std::max(fit.neg.var_iso, 1e-12);
  Vec delta = sub(s.mean_pos, s.mean_neg);
  s.delta_norm_sq = dot(delta, delta);
  s.p = static_cast<double>(n_pos) / static_cast<double>(grads.rows);
  s.d = grads.cols;
  return s;
}

double marvell_objective(const std::array<double, 4>& lams, const GradStats& stats) {
  const double lam1_pos = lams[0], lam2_pos = lams[1];
  const double lam1_neg = lams[2], lam2_neg = lams[3];
  for (double l : lams)
    if (l < 0.0) throw ArgumentError("marvell_objective: negative eigenvalue");
  const double u = stats.u, v = stats.v, dg = stats.delta_norm_sq;
  const double dm1 = static_cast<double>(stats.d) - 1.0;
  // Perturbed spectra are (lam^(1) + u) and (lam^(0) + v); the objective is
  // 2 * sumKL(perturbed pair) + 2d and reaches 2d when the spectra equalize.
  const double a = lam2_pos + u;
  const double b = lam2_neg + v;
  const double c = lam1_pos + u;
  const double e = lam1_neg + v;
  if (!(a > 0.0) || !(b > 0.0) || !(c > 0.0) || !(e > 0.0))
    throw SingularDivergenceError("marvell_objective: zero denominator");
  return dm1 * (a / b) + dm1 * (b / a) + (c + dg) / e + (e + dg) / c;
}

namespace {

// Reduced 3-variable problem on the active budget hyperplane. x = (lam1_pos,
// lam1_neg, other_lam2) with the lam2 of the smaller-variance class pinned
// at zero per the optimality structure.
struct Reduced {
  const GradStats* stats;
  double power;
  std::array<double, 3> w;  // budget weights
  bool lam2_pos_zeroed;     // u >= v
  int hi;                   // index whose value must dominate x[2] (lam2 <= lam1)

  std::array<double, 4> lams(const std::array<double, 3>& x) const {
    if (lam2_pos_zeroed) return {x[0], 0.0, x[1], x[2]};
    return {x[0], x[2], x[1], 0.0};
  }

  double eval(const std::array<double, 3>& x) const {
    return marvell_objective(lams(x), *stats);
  }
};

double golden_min(const std::function<double(double)>& f, double lo, double hi) {
  // Coarse bracket first; the objective is smooth and unimodal along budget
  // lines but the scan makes the search robust to flat stretches.
  const int scan = 32;
  double best_s = lo, best_f = f(lo);
  for (int i = 1; i <= scan; ++i) {
    double s = lo + (hi - lo) * static_cast<double>(i) / scan;
    double fs = f(s);
    if (fs < best_f) {
      best_f = fs;
      best_s = s;
    }
  }
  double step = (hi - lo) / scan;
  double a = std::max(lo, best_s - step);
  double b = std::min(hi, best_s + step);
  const double inv_phi = 0.6180339887498949;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 90 && (b - a) > 1e-15 * std::max(1.0, hi); ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  double mid = 0.5 * (a + b);
  double fm = f(mid);
  return fm < best_f ? mid : best_s;
}

// Optimize the two free coordinates along the budget line with x[k] fixed.
void optimize_pair(const Reduced& r, std::array<double, 3>& x, int k) {
  int i = (k + 1) % 3, j = (k + 2) % 3;
  if (i > j) std::swap(i, j);
  const double remain = r.power - r.w[k] * x[k];
  if (remain < 0.0) return;
  double lo = 0.0, hi = remain / r.w[i];

  // lam2 <= lam1 constraint: x[2] <= x[r.hi].
  if (k == 2) {
    if (r.hi == i) lo = std::max(lo, x[2]);
    if (r.hi == j) hi = std::min(hi, (remain - r.w[j] * x[2]) / r.w[i]);
  } else if (i == 2) {
    if (r.hi == k) hi = std::min(hi, x[k]);
    if (r.hi == j) hi = std::min(hi, remain / (r.w[i] + r.w[j]));
  } else {  // j == 2
    if (r.hi == k) lo = std::max(lo, (remain - r.w[j] * x[k]) / r.w[i]);
    if (r.hi == i) lo = std::max(lo, remain / (r.w[i] + r.w[j]));
  }
  if (lo > hi) return;

  auto f = [&](double s) {
    std::array<double, 3> y = x;
    y[i] = s;
    y[j] = (remain - r.w[i] * s) / r.w[j];
    if (y[j] < 0.0) y[j] = 0.0;
    return r.eval(y);
  };
  double s = golden_min(f, lo, hi);
  x[i] = s;
  x[j] = std::max(0.0, (remain - r.w[i] * s) / r.w[j]);
}

MarvellSolution to_solution(const Reduced& r, const std::array<double, 3>& x) {
  auto lams = r.lams(x);
  MarvellSolution sol;
  sol.lam1_pos = lams[0];
  sol.lam2_pos = lams[1];
  sol.lam1_neg = lams[2];
  sol.lam2_neg = lams[3];
  sol.power = r.power;
  sol.objective = marvell_objective(lams, *r.stats);
  sol.sum_kl_star = sol.objective - 2.0 * static_cast<double>(r.stats->d);
  return sol;
}

}  // namespace

MarvellSolution marvell_solve(const GradStats& stats, double power) {
  if (!(stats.u > 0.0) || !(stats.v > 0.0))
    throw ArgumentError("marvell_solve: u, v must be positive (apply the variance floor)");
  if (!(stats.p > 0.0 && stats.p < 1.0))
    throw ArgumentError("marvell_solve: p must be in (0, 1)");
  if (stats.d < 2) throw ArgumentError("marvell_solve: d must be >= 2");
  if (power < 0.0) throw ArgumentError("marvell_solve: negative power budget");

  Reduced r;
  r.stats = &stats;
  r.power = power;
  r.lam2_pos_zeroed = stats.u >= stats.v;
  const double dm1 = static_cast<double>(stats.d) - 1.0;
  r.w = {stats.p, 1.0 - stats.p,
         r.lam2_pos_zeroed ? (1.0 - stats.p) * dm1 : stats.p * dm1};
  r.hi = r.lam2_pos_zeroed ? 1 : 0;

  if (power == 0.0) return to_solution(r, {0.0, 0.0, 0.0});

  // Alternating line searches from a few corners of the budget simplex.
  std::vector<std::array<double, 3>> starts;
  starts.push_back({power / r.w[0], 0.0, 0.0});
  starts.push_back({0.0, power / r.w[1], 0.0});
  {
    double t = power / 3.0;
    std::array<double, 3> x = {t / r.w[0], t / r.w[1], t / r.w[2]};
    if (x[2] > x[r.hi]) {
      double merged = 2.0 * t / (r.w[r.hi] + r.w[2]);
      x[r.hi] = merged;
      x[2] = merged;
    }
    starts.push_back(x);
  }

  MarvellSolution best;
  best.objective = std::numeric_limits<double>::infinity();
  bool converged_any = false;
  for (auto x : starts) {
    double prev = r.eval(x);
    bool converged = false;
    for (int round = 0; round < 200; ++round) {
      for (int k = 0; k < 3; ++k) optimize_pair(r, x, k);
      double cur = r.eval(x);
      if (prev - cur < 1e-10) {
        converged = true;
        break;
      }
      prev = cur;
    }
    converged_any = converged_any || converged;
    MarvellSolution sol = to_solution(r, x);
    if (sol.objective < best.objective) best = sol;
  }
  if (!converged_any)
    throw MarvellConvergenceError("marvell_solve: no start converged in 200 rounds", best);
  return best;
}

PowerTuneResult tune_power(const GradStats& stats, double target_sum_kl, double p0,
                           double growth, std::size_t max_iters) {
  if (!(target_sum_kl > 0.0)) throw ArgumentError("tune_power: target must be > 0");
  if (!(p0 > 0.0)) throw ArgumentError("tune_power: P0 must be > 0");
  if (!(growth > 1.0)) throw ArgumentError("tune_power: growth must be > 1");

  PowerTuneResult out;
  auto solve_at = [&](double p) {
    MarvellSolution s = marvell_solve(stats, p);
    out.trajectory.emplace_back(p, s.sum_kl_star);
    return s;
  };

  MarvellSolution at_zero = solve_at(0.0);
  if (at_zero.sum_kl_star <= target_sum_kl) {
    out.power = 0.0;
    out.solution = at_zero;
    return out;
  }

  double lo = 0.0;  // largest power known to miss the target
  double p = p0;
  MarvellSolution sol;
  bool found = false;
  for (std::size_t it = 0; it < max_iters; ++it) {
    sol = solve_at(p);
    if (sol.sum_kl_star <= target_sum_kl) {
      found = true;
      break;
    }
    lo = p;
    p *= growth;
  }
  if (!found)
    throw ConvergenceError("tune_power: target sumKL not reached within max_iters");

  // Bisection pass: shrink [lo, hi] to within 1% of the minimal satisfying P.
  double hi = p;
  MarvellSolution hi_sol = sol;
  while (hi - lo > 0.01 * hi) {
    double mid = 0.5 * (lo + hi);
    MarvellSolution m = solve_at(mid);
    if (m.sum_kl_star <= target_sum_kl) {
      hi = mid;
      hi_sol = m;
    } else {
      lo = mid;
    }
  }
  out.power = hi;
  out.solution = hi_sol;
  return out;
}

Mat iso_protect(const Mat& grads, double s, Rng& rng) {
  if (s < 0.0) throw ArgumentError("iso_protect: s must be >= 0");
  double max_sq = 0.0;
  for (std::size_t i = 0; i < grads.rows; ++i) {
    double nsq = dot(grads.row(i), grads.row(i));
    max_sq = std::max(max_sq, nsq);
  }
  double var = s / static_cast<double>(grads.cols) * max_sq;
  Mat out = grads;
  if (var == 0.0) return out;
  double sd = std::sqrt(var);
  for (auto& g : out.a) g += sd * rng.normal();
  return out;
}

Mat max_norm_protect(const Mat& grads, Rng& rng) {
  double max_sq = 0.0;
  for (std::size_t i = 0; i < grads.rows; ++i)
    max_sq = std::max(max_sq, dot(grads.row(i), grads.row(i)));
  Mat out = grads;
  if (max_sq == 0.0) return out;
  for (std::size_t i = 0; i < grads.rows; ++i) {
    double nsq = dot(grads.row(i), grads.row(i));
    if (nsq == 0.0) continue;  // zero rows pass through
    double sigma = std::sqrt(std::max(0.0, max_sq / nsq - 1.0));
    double lam = sigma * rng.normal();
    for (std::size_t j = 0; j < grads.cols; ++j) out(i, j) += lam * grads(i, j);
  }
  return out;
}

namespace {

Mat add_class_noise(const Mat& grads, const std::vector<int>& labels, const GradStats& stats,
                    const MarvellSolution& sol, Rng& rng) {
  const std::size_t d = grads.cols;
  StructuredCov pos_cov, neg_cov;
  if (stats.delta_norm_sq > 0.0) {
    Vec dir = scale(sub(stats.mean_pos, stats.mean_neg),
                    1.0 / std::sqrt(stats.delta_norm_sq));
    double dn = norm2(dir);
    dir = scale(dir, 1.0 / dn);
    pos_cov = {sol.lam1_pos, sol.lam2_pos, dir};
    neg_cov = {sol.lam1_neg, sol.lam2_neg, dir};
  } else {
    // No mean gap: spread each class budget isotropically.
    Vec e1(d, 0.0);
    e1[0] = 1.0;
    double dm1 = static_cast<double>(d) - 1.0;
    double pos_var = (sol.lam1_pos + dm1 * sol.lam2_pos) / static_cast<double>(d);
    double neg_var = (sol.lam1_neg + dm1 * sol.lam2_neg) / static_cast<double>(d);
    pos_cov = {pos_var, pos_var, e1};
    neg_cov = {neg_var, neg_var, e1};
  }

  Vec zero(d, 0.0);
  Mat out = grads;
  for (std::size_t i = 0; i < grads.rows; ++i) {
    const StructuredCov& cov = labels[i] != 0 ? pos_cov : neg_cov;
    Mat noise = sample_structured_gaussian(zero, cov, 1, rng);
    for (std::size_t j = 0; j < d; ++j) out(i, j) += noise(0, j);
  }
  return out;
}

bool single_class(const std::vector<int>& labels) {
  bool has0 = false, has1 = false;
  for (int y : labels) (y != 0 ? has1 : has0) = true;
  return !(has0 && has1);
}

double default_p0(const GradStats& stats) {
  return 0.25 * (stats.u + stats.v) * static_cast<double>(stats.d);
}

}  // namespace

Mat marvell_protect(const Mat& grads, const std::vector<int>& labels, double target_sum_kl,
                    Rng& rng) {
  if (grads.rows != labels.size()) throw ArgumentError("marvell_protect: row/label mismatch");
  if (single_class(labels)) {
    std::cerr << "[protect] marvell: single-class batch, passing gradients through\n";
    return grads;
  }
  GradStats stats = fit_grad_stats(grads, labels);
  PowerTuneResult tuned = tune_power(stats, target_sum_kl, default_p0(stats));
  return add_class_noise(grads, labels, stats, tuned.solution, rng);
}

Mat Protector::apply(const Mat& grads, const std::vector<int>& labels, Rng& rng) {
  switch (cfg_.kind) {
    case ProtectionConfig::Kind::none:
      return grads;
    case ProtectionConfig::Kind::iso:
      return iso_protect(grads, cfg_.iso_s, rng);
    case ProtectionConfig::Kind::max_norm:
      if (single_class(labels)) {
        std::cerr << "[protect] max_norm: single-class batch, passing gradients through\n";
        return grads;
      }
      return max_norm_protect(grads, rng);
    case ProtectionConfig::Kind::marvell: {
      double target = marvell_target_sum_kl(cfg_);
      if (single_class(labels)) {
        std::cerr << "[protect] marvell: single-class batch, passing gradients through\n";
        return grads;
      }
      GradStats stats = fit_grad_stats(grads, labels);
      if (cfg_.reuse_power && last_power_) {
        MarvellSolution sol = marvell_solve(stats, *last_power_);
        if (sol.sum_kl_star <= target)
          return add_class_noise(grads, labels, stats, sol, rng);
        // Previous budget no longer reaches the target; grow from it.
        PowerTuneResult tuned = tune_power(stats, target, *last_power_);
        last_power_ = tuned.power;
        return add_class_noise(grads, labels, stats, tuned.solution, rng);
      }
      PowerTuneResult tuned = tune_power(stats, target, default_p0(stats));
      if (cfg_.reuse_power) last_power_ = tuned.power;
      return add_class_noise(grads, labels, stats, tuned.solution, rng);
    }
  }
  throw ArgumentError("Protector: unknown protection kind");
}

}  // namespace splitshield
