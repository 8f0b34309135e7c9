#include "splitshield/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "splitshield/errors.hpp"

namespace splitshield {

double auc(const ScoredLabels& data) {
  const std::size_t n = data.scores.size();
  if (data.labels.size() != n) throw ArgumentError("auc: length mismatch");
  std::size_t n_pos = 0;
  for (int y : data.labels) {
    if (y != 0 && y != 1) throw ArgumentError("auc: labels must be 0/1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw DegenerateDataError("auc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return data.scores[i] < data.scores[j];
  });

  // Midranks over tie groups, then the rank-sum form of Mann-Whitney U.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && data.scores[order[j]] == data.scores[order[i]]) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (data.labels[order[k]] == 1) pos_rank_sum += midrank;
    i = j;
  }
  double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double ace(const Vec& pred_probs, const std::vector<int>& labels, const AceConfig& cfg) {
  const std::size_t n = pred_probs.size();
  if (labels.size() != n) throw ArgumentError("ace: length mismatch");
  if (cfg.n_bins < 1) throw ArgumentError("ace: n_bins must be >= 1");
  if (cfg.n_bins > n) throw ArgumentError("ace: n_bins exceeds sample count");
  for (double p : pred_probs)
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("ace: probability outside [0,1]");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return pred_probs[i] < pred_probs[j];
  });

  const std::size_t base = n / cfg.n_bins;
  const std::size_t rem = n % cfg.n_bins;
  double total = 0.0;
  std::size_t at = 0;
  for (std::size_t b = 0; b < cfg.n_bins; ++b) {
    std::size_t len = base + (b < rem ? 1 : 0);
    double mean_p = 0.0, frac_pos = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      mean_p += pred_probs[order[at + k]];
      frac_pos += static_cast<double>(labels[order[at + k]]);
    }
    mean_p /= static_cast<double>(len);
    frac_pos /= static_cast<double>(len);
    total += std::abs(mean_p - frac_pos);
    at += len;
  }
  return total / static_cast<double>(cfg.n_bins);
}

namespace {

// 1-D symmetric KL between N(m1, v1) and N(m2, v2), times one dimension.
double sum_kl_1d(double delta_sq, double v1, double v2) {
  return 0.5 * (v1 / v2 + v2 / v1 - 2.0) + 0.5 * delta_sq * (1.0 / v1 + 1.0 / v2);
}

struct Decomposed {
  double delta_par_sq = 0.0;  // squared mean gap along dir
  double delta_orth_sq = 0.0;
  Vec dir;
};

Decomposed decompose(const GaussianSpec& a, const GaussianSpec& b) {
  Decomposed out;
  if (a.mean.size() != b.mean.size())
    throw ArgumentError("gaussian pair: dimension mismatch");
  Vec delta = sub(a.mean, b.mean);
  const bool a_sph = a.spherical();
  const bool b_sph = b.spherical();
  if (a_sph && b_sph) {
    out.delta_par_sq = dot(delta, delta);
    out.delta_orth_sq = 0.0;
    return out;  // dir unused, split is arbitrary for spherical pairs
  }
  Vec dir = a_sph ? b.dir : a.dir;
  if (dir.size() != a.mean.size() || std::abs(norm2(dir) - 1.0) > 1e-6)
    throw ArgumentError("gaussian pair: dir must be unit norm");
  if (!a_sph && !b_sph) {
    Vec diff = sub(a.dir, b.dir);
    if (norm2(diff) > 1e-6)
      throw ArgumentError("gaussian pair: non-spherical specs must share dir");
  }
  double par = dot(delta, dir);
  out.delta_par_sq = par * par;
  out.delta_orth_sq = std::max(0.0, dot(delta, delta) - out.delta_par_sq);
  out.dir = std::move(dir);
  return out;
}

}  // namespace

double gaussian_sum_kl(const GaussianSpec& a, const GaussianSpec& b) {
  const double va = a.spherical() ? a.var_iso : a.var_along;
  const double vb = b.spherical() ? b.var_iso : b.var_along;
  if (!(va > 0.0) || !(vb > 0.0) || !(a.var_iso > 0.0) || !(b.var_iso > 0.0))
    throw SingularDivergenceError("gaussian_sum_kl: zero variance component");
  const std::size_t d = a.mean.size();
  Decomposed dec = decompose(a, b);
  double along = sum_kl_1d(dec.delta_par_sq, va, vb);
  double orth = 0.0;
  if (d > 1) {
    orth = 0.5 * static_cast<double>(d - 1) *
               (a.var_iso / b.var_iso + b.var_iso / a.var_iso - 2.0) +
           0.5 * dec.delta_orth_sq * (1.0 / a.var_iso + 1.0 / b.var_iso);
  } else {
    along += 0.5 * dec.delta_orth_sq * (1.0 / va + 1.0 / vb);
  }
  return along + orth;
}

double tv_upper_bound(double sum_kl) {
  if (sum_kl < 0.0) throw ArgumentError("tv_upper_bound: sum_kl must be >= 0");
  return 0.5 * std::sqrt(sum_kl);
}

double detection_error_lower_bound(double sum_kl) {
  double b = tv_upper_bound(sum_kl);
  double e = 0.5 * (1.0 - b);
  return std::min(0.5, std::max(0.0, e));
}

double gaussian_log_pdf(const Vec& x, const GaussianSpec& g) {
  const std::size_t d = g.mean.size();
  if (x.size() != d) throw ArgumentError("gaussian_log_pdf: dimension mismatch");
  static const double log2pi = std::log(2.0 * M_PI);
  Vec delta = sub(x, g.mean);
  if (g.spherical() || g.dir.empty()) {
    double v = g.var_iso;
    return -0.5 * static_cast<double>(d) * (log2pi + std::log(v)) -
           0.5 * dot(delta, delta) / v;
  }
  double par = dot(delta, g.dir);
  double orth_sq = std::max(0.0, dot(delta, delta) - par * par);
  return -0.5 * static_cast<double>(d) * log2pi -
         0.5 * (std::log(g.var_along) + static_cast<double>(d - 1) * std::log(g.var_iso)) -
         0.5 * (par * par / g.var_along + orth_sq / g.var_iso);
}

TvEstimate mc_tv_estimate(const GaussianSpec& a, const GaussianSpec& b, std::size_t n,
                          Rng& rng) {
  if (n < 10000) throw ArgumentError("mc_tv_estimate: n must be >= 1e4");
  const std::size_t d = a.mean.size();
  auto to_cov = [d](const GaussianSpec& g) {
    StructuredCov c;
    c.lam_along = g.var_along;
    c.lam_iso = g.var_iso;
    c.dir = g.dir.empty() ? [&] {
      Vec e(d, 0.0);
      e[0] = 1.0;
      return e;
    }() : g.dir;
    return c;
  };
  StructuredCov ca = to_cov(a), cb = to_cov(b);

  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    bool from_a = rng.uniform() < 0.5;
    Mat z = sample_structured_gaussian(from_a ? a.mean : b.mean, from_a ? ca : cb, 1, rng);
    Vec x = z.row(0);
    double la = gaussian_log_pdf(x, a);
    double lb = gaussian_log_pdf(x, b);
    // |p_a - p_b| / mix = 2 |1 - r| / (1 + r) with r = exp(lb - la); bounded by 2.
    double r = std::exp(lb - la);
    double w = std::isinf(r) ? 2.0 : 2.0 * std::abs(1.0 - r) / (1.0 + r);
    sum += w;
    sum_sq += w * w;
  }
  double mean = sum / static_cast<double>(n);
  double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
  TvEstimate out;
  out.estimate = 0.5 * mean;
  out.stderr_ = 0.5 * std::sqrt(var / static_cast<double>(n));
  return out;
}

SphericalFit fit_spherical_pair(const Mat& g_pos, const Mat& g_neg) {
  if (g_pos.rows == 0 || g_neg.rows == 0)
    throw ArgumentError("fit_spherical_pair: a class is empty");
  if (g_pos.cols != g_neg.cols)
    throw ArgumentError("fit_spherical_pair: dimension mismatch");
  const std::size_t d = g_pos.cols;

  auto fit_one = [d](const Mat& m) {
    GaussianSpec g;
    g.mean = mean_rows(m);
    double ss = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double dv = m(i, j) - g.mean[j];
        ss += dv * dv;
      }
    double v = ss / (static_cast<double>(m.rows) * static_cast<double>(d));
    g.var_along = g.var_iso = v;
    return g;
  };

  SphericalFit fit;
  fit.pos = fit_one(g_pos);
  fit.neg = fit_one(g_neg);
  Vec delta = sub(fit.pos.mean, fit.neg.mean);
  double dn = norm2(delta);
  Vec dir(d, 0.0);
  if (dn > 0.0) {
    dir = scale(delta, 1.0 / dn);
  } else {
    dir[0] = 1.0;
  }
  fit.pos.dir = dir;
  fit.neg.dir = dir;
  fit.degenerate = fit.pos.var_iso == 0.0 || fit.neg.var_iso == 0.0 || dn == 0.0;
  return fit;
}

}  // namespace splitshield
