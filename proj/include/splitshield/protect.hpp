#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "splitshield/errors.hpp"
#include "splitshield/linalg.hpp"
#include "splitshield/metrics.hpp"

namespace splitshield {

// Active-party gradient protection applied to the per-example gradient
// matrix before it is communicated.
struct ProtectionConfig {
  enum class Kind { none, iso, max_norm, marvell };
  Kind kind = Kind::none;

  double iso_s = 1.0;  // iso: noise scale s

  // marvell target: either a sumKL* value directly or a worst-case detection
  // error lower bound L in (0, 0.5), which maps to sumKL* <= (2 - 4L)^2.
  std::optional<double> marvell_sum_kl;
  std::optional<double> marvell_L;
  bool reuse_power = false;  // reuse the previously tuned P instead of re-tuning from scratch

  std::uint64_t seed = 0;
};

double marvell_target_sum_kl(const ProtectionConfig& cfg);

// Per-batch Gaussian fit feeding the solver: spherical per-class variances
// u (positive) and v (negative), mean gap, positive fraction.
struct GradStats {
  Vec mean_pos;
  Vec mean_neg;
  double u = 0.0;
  double v = 0.0;
  double delta_norm_sq = 0.0;
  double p = 0.5;
  std::size_t d = 0;
};

// MLE fit over a labeled gradient batch; u and v are floored at 1e-12 so the
// solver's denominators stay positive on identical-gradient batches.
GradStats fit_grad_stats(const Mat& grads, const std::vector<int>& labels);

// The four eigenvalues of the optimal noise covariances
//   Sigma_1 = ((lam1_pos - lam2_pos)/||dg||^2) dg dg^T + lam2_pos I   (positive rows)
//   Sigma_0 = ((lam1_neg - lam2_neg)/||dg||^2) dg dg^T + lam2_neg I   (negative rows)
// plus the achieved objective. sum_kl_star = objective - 2d, which is 0 for
// identical perturbed distributions.
struct MarvellSolution {
  double lam1_pos = 0.0;
  double lam2_pos = 0.0;
  double lam1_neg = 0.0;
  double lam2_neg = 0.0;
  double power = 0.0;
  double objective = 0.0;
  double sum_kl_star = 0.0;
};

// The 4-variable objective
//   (d-1)(lam2_pos + u)/(lam2_neg + v) + (d-1)(lam2_neg + v)/(lam2_pos + u)
//   + (lam1_pos + u + ||dg||^2)/(lam1_neg + v) + (lam1_neg + v + ||dg||^2)/(lam1_pos + u),
// i.e. twice the symmetric KL between the perturbed class distributions
// N(mean_pos, Sigma_1 + uI) and N(mean_neg, Sigma_0 + vI), plus 2d.
// lams order: {lam1_pos, lam2_pos, lam1_neg, lam2_neg}.
double marvell_objective(const std::array<double, 4>& lams, const GradStats& stats);

// Minimize marvell_objective subject to
//   p*lam1_pos + p(d-1)*lam2_pos + (1-p)*lam1_neg + (1-p)(d-1)*lam2_neg <= P,
//   lam >= 0, lam2 <= lam1 per class.
// The budget is active at the optimum, and the smaller-variance class keeps
// its isotropic eigenvalue at zero (lam2_pos = 0 if u >= v, lam2_neg = 0
// otherwise); the solver works on that reduced 3-variable problem with
// alternating golden-section line searches along the budget hyperplane.
MarvellSolution marvell_solve(const GradStats& stats, double power);

struct MarvellConvergenceError : ConvergenceError {
  MarvellConvergenceError(const std::string& what, MarvellSolution best_iterate)
      : ConvergenceError(what), best(best_iterate) {}
  MarvellSolution best;
};

struct PowerTuneResult {
  double power = 0.0;
  MarvellSolution solution;
  // Every (P, sumKL*) pair visited, in visit order.
  std::vector<std::pair<double, double>> trajectory;
};

// Geometric search P <- P*growth until sumKL* <= target, then bisection down
// to within 1% of the minimal satisfying P. Checks P = 0 first, so an
// unconstraining target yields zero noise.
PowerTuneResult tune_power(const GradStats& stats, double target_sum_kl, double p0,
                           double growth = 2.0, std::size_t max_iters = 60);

// i.i.d. isotropic noise N(0, (s/d) * max_i ||g_i||^2 * I) added to every row.
Mat iso_protect(const Mat& grads, double s, Rng& rng);

// Gradient-collinear noise scaling every row's expected squared norm to the
// batch max: row += lam * row with lam ~ N(0, M^2/||row||^2 - 1).
Mat max_norm_protect(const Mat& grads, Rng& rng);

// Full Marvell step: fit stats from the batch, tune the power budget for the
// target, sample class-dependent structured noise. Single-class batches pass
// through unchanged; a zero mean gap falls back to an isotropic split of the
// per-class budget.
Mat marvell_protect(const Mat& grads, const std::vector<int>& labels, double target_sum_kl,
                    Rng& rng);

// Stateful dispatcher used by the training engine; carries the last tuned
// power across batches when cfg.reuse_power is set.
class Protector {
 public:
  explicit Protector(ProtectionConfig cfg) : cfg_(std::move(cfg)) {}

  Mat apply(const Mat& grads, const std::vector<int>& labels, Rng& rng);

  const ProtectionConfig& config() const { return cfg_; }

 private:
  ProtectionConfig cfg_;
  std::optional<double> last_power_;
};

}  // namespace splitshield
