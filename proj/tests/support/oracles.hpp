#pragma once

// Test-only oracles, kept independent of the library code paths they check.

#include <array>
#include <cstddef>
#include <vector>

#include "splitshield/linalg.hpp"
#include "splitshield/metrics.hpp"
#include "splitshield/protect.hpp"

namespace splitshield::oracle {

// O(n^2) pairwise AUC with ties counted 0.5.
double auc_brute_force(const Vec& scores, const std::vector<int>& labels);

// All eigenvalue/eigenvector pairs of a symmetric 3x3 matrix via the cubic
// characteristic polynomial (trigonometric solution) plus null-space vectors.
struct Eigen3 {
  std::array<double, 3> values;           // descending
  std::array<std::array<double, 3>, 3> vectors;  // vectors[i] pairs with values[i]
};
Eigen3 eigen3_symmetric(const std::array<std::array<double, 3>, 3>& m);

// TV distance between two 1-D Gaussians by adaptive trapezoid quadrature.
double tv_1d_quadrature(double mean_a, double var_a, double mean_b, double var_b);

// Monte Carlo estimate of KL(a||b) + KL(b||a) with a standard error.
struct McKl {
  double estimate;
  double stderr_;
};
McKl mc_sum_kl(const GaussianSpec& a, const GaussianSpec& b, std::size_t n, Rng& rng);

// Dense grid search for the reduced 3-variable Marvell problem on the active
// budget hyperplane (with the Remark's lambda_2 zeroed), `ticks` points per
// simplex axis plus one local refinement pass around the best cell.
struct GridSolution {
  std::array<double, 4> lams;  // lam1_pos, lam2_pos, lam1_neg, lam2_neg
  double objective;
};
GridSolution marvell_grid_oracle(const GradStats& stats, double power, std::size_t ticks = 200);

// KL(D || p (x) q) for small discrete joints, 0 log 0 = 0.
double discrete_kl_to_product(const Mat& joint, const Vec& p, const Vec& q);

}  // namespace splitshield::oracle
