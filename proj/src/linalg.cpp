#include "splitshield/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "splitshield/errors.hpp"

namespace splitshield {

namespace {

void require_same_length(const Vec& x, const Vec& y, const char* who) {
  if (x.size() != y.size())
    throw ArgumentError(std::string(who) + ": length mismatch");
}

}  // namespace

void Mat::set_row(std::size_t i, const Vec& v) {
  if (v.size() != cols) throw ArgumentError("Mat::set_row: length mismatch");
  std::copy(v.begin(), v.end(), a.begin() + static_cast<std::ptrdiff_t>(i * cols));
}

double dot(const Vec& x, const Vec& y) {
  require_same_length(x, y, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

Vec add(const Vec& x, const Vec& y) {
  require_same_length(x, y, "add");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return out;
}

Vec sub(const Vec& x, const Vec& y) {
  require_same_length(x, y, "sub");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return out;
}

Vec scale(const Vec& x, double c) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = c * x[i];
  return out;
}

Vec mean_rows(const Mat& m) {
  if (m.rows == 0) throw ArgumentError("mean_rows: empty matrix");
  Vec mu(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) mu[j] += m(i, j);
  for (auto& v : mu) v /= static_cast<double>(m.rows);
  return mu;
}

double centered_cov_trace(const Mat& m) {
  Vec mu = mean_rows(m);
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) {
      double d = m(i, j) - mu[j];
      s += d * d;
    }
  return s / static_cast<double>(m.rows);
}

Mat sample_structured_gaussian(const Vec& mean, const StructuredCov& cov, std::size_t n,
                               Rng& rng) {
  const std::size_t d = mean.size();
  if (n < 1) throw ArgumentError("sample_structured_gaussian: n must be >= 1");
  if (cov.lam_along < 0.0 || cov.lam_iso < 0.0)
    throw ArgumentError("sample_structured_gaussian: negative variance");
  if (cov.dir.size() != d)
    throw ArgumentError("sample_structured_gaussian: dir length mismatch");
  if (std::abs(norm2(cov.dir) - 1.0) > 1e-9)
    throw ArgumentError("sample_structured_gaussian: dir must be unit norm");

  const double s_iso = std::sqrt(cov.lam_iso);
  const double s_along = std::sqrt(cov.lam_along);
  Mat out(n, d);
  Vec z(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) z[j] = rng.normal();
    const double along = (s_along - s_iso) * dot(cov.dir, z);
    for (std::size_t j = 0; j < d; ++j)
      out(i, j) = mean[j] + s_iso * z[j] + along * cov.dir[j];
  }
  return out;
}

Vec top_singular_direction(const Mat& x, std::size_t max_iters, double tol) {
  if (x.rows < 2) throw ArgumentError("top_singular_direction: need >= 2 rows");
  const std::size_t d = x.cols;
  Vec mu = mean_rows(x);

  // d x d biased covariance; d is small by construction.
  Mat cov(d, d);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double dj = x(i, j) - mu[j];
      for (std::size_t k = j; k < d; ++k) cov(j, k) += dj * (x(i, k) - mu[k]);
    }
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = j; k < d; ++k) {
      cov(j, k) /= static_cast<double>(x.rows);
      cov(k, j) = cov(j, k);
    }

  double trace = 0.0;
  for (std::size_t j = 0; j < d; ++j) trace += cov(j, j);
  if (!(trace > 0.0))
    throw DegenerateDataError("top_singular_direction: zero covariance");

  // Start at the highest-variance axis, dithered so a symmetric start can
  // never be exactly orthogonal to the top eigenvector.
  std::size_t jmax = 0;
  for (std::size_t j = 1; j < d; ++j)
    if (cov(j, j) > cov(jmax, jmax)) jmax = j;
  Vec v(d, 0.0);
  v[jmax] = 1.0;
  for (std::size_t j = 0; j < d; ++j) v[j] += 1e-7 + 1e-9 * static_cast<double>(j);
  double nv = norm2(v);
  for (auto& c : v) c /= nv;

  Vec w(d);
  for (std::size_t it = 0; it < max_iters; ++it) {
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += cov(j, k) * v[k];
      w[j] = s;
    }
    double nw = norm2(w);
    if (!(nw > 0.0))
      throw DegenerateDataError("top_singular_direction: iterate collapsed");
    for (auto& c : w) c /= nw;
    double cos = std::abs(dot(v, w));
    v = w;
    if (1.0 - cos <= tol) break;
  }

  std::size_t imax = 0;
  for (std::size_t j = 1; j < d; ++j)
    if (std::abs(v[j]) > std::abs(v[imax])) imax = j;
  if (v[imax] < 0.0)
    for (auto& c : v) c = -c;
  return v;
}

}  // namespace splitshield
