#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "tidysim/errors.hpp"
#include "tidysim/rng.hpp"

namespace tidysim {

using Vec = std::vector<double>;

// Dense row-major matrix. Everything here is tiny (d <= 32), so the naive
// loops are the whole implementation.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Vec matvec(const Mat& m, const Vec& x) {
  if (x.size() != m.cols) throw Error("matvec: shape mismatch");
  Vec y(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += m(r, c) * x[c];
    y[r] = acc;
  }
  return y;
}

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw Error("dot: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline void axpy(double alpha, const Vec& x, Vec& y) {
  if (x.size() != y.size()) throw Error("axpy: shape mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// Numerically stable softmax (max-shifted).
inline Vec softmax(const Vec& z) {
  Vec p(z.size());
  double mx = z.empty() ? 0.0 : z[0];
  for (double x : z) mx = std::max(mx, x);
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - mx);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

inline Mat random_gaussian(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Mat m(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) m.a[i] = normal(rng) * scale;
  return m;
}

// Rows made unit-norm after Gram-Schmidt against earlier rows; with
// rows <= cols this yields an orthonormal-ish generator.
inline Mat random_orthonormalish(Rng& rng, std::size_t rows, std::size_t cols) {
  Mat m = random_gaussian(rng, rows, cols, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t p = 0; p < r; ++p) {
      double proj = 0.0;
      for (std::size_t c = 0; c < cols; ++c) proj += m(r, c) * m(p, c);
      for (std::size_t c = 0; c < cols; ++c) m(r, c) -= proj * m(p, c);
    }
    double norm = 0.0;
    for (std::size_t c = 0; c < cols; ++c) norm += m(r, c) * m(r, c);
    norm = std::sqrt(norm);
    if (norm > 1e-12)
      for (std::size_t c = 0; c < cols; ++c) m(r, c) /= norm;
  }
  return m;
}

}  // namespace tidysim
