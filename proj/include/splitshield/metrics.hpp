#pragma once

#include <cstddef>
#include <vector>

#include "splitshield/linalg.hpp"
#include "splitshield/rng.hpp"

namespace splitshield {

struct ScoredLabels {
  Vec scores;
  std::vector<int> labels;  // 0/1
};

// Mann-Whitney AUC with ties counted 0.5 (midranks), O(n log n).
// Throws DegenerateDataError unless both classes are present.
double auc(const ScoredLabels& data);

struct AceConfig {
  std::size_t n_bins = 10;
};

// Adaptive calibration error: sort by predicted probability, split into
// n_bins contiguous equal-mass bins (remainder spread over the leading bins),
// mean over bins of |mean predicted prob - empirical positive fraction|.
double ace(const Vec& pred_probs, const std::vector<int>& labels, const AceConfig& cfg);

// Gaussian with covariance (var_along - var_iso) dir dir^T + var_iso I.
// dir and var_along are ignored when spherical (var_along == var_iso).
struct GaussianSpec {
  Vec mean;
  double var_along = 1.0;
  double var_iso = 1.0;
  Vec dir;

  bool spherical() const { return var_along == var_iso; }
};

double gaussian_log_pdf(const Vec& x, const GaussianSpec& g);

// KL(a||b) + KL(b||a) in closed form, decomposed into the dir-aligned 1-D
// component and the (d-1) isotropic components. Non-spherical inputs must
// share dir. Zero variance raises SingularDivergenceError.
double gaussian_sum_kl(const GaussianSpec& a, const GaussianSpec& b);

// Pinsker/Jensen bound: TV <= 0.5 * sqrt(sumKL).
double tv_upper_bound(double sum_kl);

// Worst-case detection error lower bound (1 - tv_bound) / 2, clamped to [0, 0.5].
double detection_error_lower_bound(double sum_kl);

struct TvEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
};

// Monte Carlo TV via importance sampling from the equal mixture:
// TV = E_mix[ |p_a - p_b| / p_mix ] / 2, with per-sample weights bounded in [0, 2].
TvEstimate mc_tv_estimate(const GaussianSpec& a, const GaussianSpec& b, std::size_t n,
                          Rng& rng);

struct SphericalFit {
  GaussianSpec pos;
  GaussianSpec neg;
  bool degenerate = false;  // zero fitted variance or zero mean gap
};

// Per-class spherical MLE: mean = row mean, variance = sum ||g_i - mean||^2 / (n d).
// Both specs carry dir = (mean_pos - mean_neg) normalized.
SphericalFit fit_spherical_pair(const Mat& g_pos, const Mat& g_neg);

}  // namespace splitshield
