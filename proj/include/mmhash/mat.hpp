#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mmhash {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. All training math runs in double;
/// file formats quantize to f32 at the I/O boundary.
struct Mat {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(size_t r, size_t c) { return a[r * cols + c]; }
  double operator()(size_t r, size_t c) const { return a[r * cols + c]; }

  std::span<double> row(size_t r) { return {a.data() + r * cols, cols}; }
  std::span<const double> row(size_t r) const { return {a.data() + r * cols, cols}; }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

/// out[j] = bias[j] + sum_i z[i] * w(i, j). Weights are stored input x output,
/// acting on row vectors. Accumulation order is fixed (i ascending) so results
/// are bitwise reproducible.
inline void affine_row(std::span<const double> z, const Mat& w,
                       std::span<const double> bias, std::span<double> out) {
  for (size_t j = 0; j < out.size(); ++j) out[j] = bias[j];
  for (size_t i = 0; i < z.size(); ++i) {
    const double zi = z[i];
    const double* wrow = w.a.data() + i * w.cols;
    for (size_t j = 0; j < out.size(); ++j) out[j] += zi * wrow[j];
  }
}

/// g_in[i] = sum_j g_out[j] * w(i, j) — the transpose product used when
/// pushing gradients back through an affine_row.
inline void backprop_row(std::span<const double> g_out, const Mat& w,
                         std::span<double> g_in) {
  for (size_t i = 0; i < g_in.size(); ++i) {
    const double* wrow = w.a.data() + i * w.cols;
    double s = 0.0;
    for (size_t j = 0; j < g_out.size(); ++j) s += g_out[j] * wrow[j];
    g_in[i] = s;
  }
}

/// w_grad(i, j) += z[i] * g[j]
inline void accumulate_outer(Mat& w_grad, std::span<const double> z,
                             std::span<const double> g) {
  for (size_t i = 0; i < z.size(); ++i) {
    const double zi = z[i];
    double* grow = w_grad.a.data() + i * w_grad.cols;
    for (size_t j = 0; j < g.size(); ++j) grow[j] += zi * g[j];
  }
}

/// y += alpha * x
inline void axpy(std::span<double> y, double alpha, std::span<const double> x) {
  for (size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace mmhash
