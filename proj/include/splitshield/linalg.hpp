#pragma once

#include <cstddef>
#include <vector>

#include "splitshield/rng.hpp"

namespace splitshield {

using Vec = std::vector<double>;

// Dense row-major matrix. Small and value-semantic; everything in this
// library is desk scale (d <= 256, B <= a few thousand).
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  Vec row(std::size_t i) const {
    return Vec(a.begin() + static_cast<std::ptrdiff_t>(i * cols),
               a.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols));
  }
  void set_row(std::size_t i, const Vec& v);
};

// Covariance of the form (lam_along - lam_iso) * dir dir^T + lam_iso * I,
// i.e. variance lam_along in the unit direction `dir` and lam_iso in every
// orthogonal direction. lam_along = lam_iso is plain isotropic.
struct StructuredCov {
  double lam_along = 0.0;
  double lam_iso = 0.0;
  Vec dir;
};

double dot(const Vec& x, const Vec& y);
double norm2(const Vec& x);
Vec add(const Vec& x, const Vec& y);
Vec sub(const Vec& x, const Vec& y);
Vec scale(const Vec& x, double c);
Vec mean_rows(const Mat& m);

// Trace of the (biased, 1/n) covariance of the rows.
double centered_cov_trace(const Mat& m);

// Draw n rows from N(mean, (lam_along - lam_iso) dir dir^T + lam_iso I),
// realized as mean + sqrt(lam_iso) z + (sqrt(lam_along) - sqrt(lam_iso)) (dir.z) dir.
Mat sample_structured_gaussian(const Vec& mean, const StructuredCov& cov, std::size_t n,
                               Rng& rng);

// Unit top eigenvector of the row covariance of X via power iteration on the
// d x d covariance; sign fixed so the largest-magnitude coordinate is positive.
// tol is on the cosine between successive iterates.
Vec top_singular_direction(const Mat& x, std::size_t max_iters = 1000, double tol = 1e-9);

}  // namespace splitshield
