#include "mmhash/loss.hpp"

#include <cmath>

#include "mmhash/errors.hpp"
#include "mmhash/model.hpp"

namespace mmhash {

int similarity_indicator(std::span<const uint64_t> labels_i,
                         std::span<const uint64_t> labels_j) {
  return labels_intersect(labels_i, labels_j);
}

Mat similarity_matrix(const LabelMatrix& labels, std::span<const uint64_t> batch_ids,
                      double lambda) {
  const size_t b = batch_ids.size();
  const size_t w = pair_window(lambda, b);
  const size_t j0 = b - w;
  Mat phi(w, w);
  for (size_t i = 0; i < w; ++i) {
    const auto li = labels.row(batch_ids[i]);
    for (size_t j = 0; j < w; ++j)
      phi(i, j) = static_cast<double>(similarity_indicator(li, labels.row(batch_ids[j0 + j])));
  }
  return phi;
}

PairwiseTerms compute_pairwise(const Mat& h, const Mat& phi, double lambda) {
  const size_t b = h.rows;
  const size_t w = pair_window(lambda, b);
  if (phi.rows != w || phi.cols != w)
    raise(Err::ShapeMismatch, "phi must be " + std::to_string(w) + "x" + std::to_string(w));
  const size_t j0 = b - w;
  PairwiseTerms t;
  t.theta = Mat(w, w);
  t.phi = phi;
  for (size_t i = 0; i < w; ++i)
    for (size_t j = 0; j < w; ++j) t.theta(i, j) = dot(h.row(i), h.row(j0 + j));
  return t;
}

std::pair<double, Mat> metric_loss(const Mat& h, const Mat& phi, double delta,
                                   double lambda) {
  const size_t b = h.rows;
  const size_t w = pair_window(lambda, b);
  if (phi.rows != w || phi.cols != w)
    raise(Err::ShapeMismatch, "phi must be " + std::to_string(w) + "x" + std::to_string(w));

  const size_t j0 = b - w;
  const double inv_w2 = 1.0 / (static_cast<double>(w) * static_cast<double>(w));

  Mat grad(b, h.cols);
  double value = 0.0;
  for (size_t i = 0; i < w; ++i) {
    for (size_t j = j0; j < b; ++j) {
      const double theta = dot(h.row(i), h.row(j));
      const double phi_ij = phi(i, j - j0);
      value += delta * softplus(theta) - phi_ij * theta;
      // d/dtheta [delta*softplus(theta) - phi*theta] = delta*sigmoid(theta) - phi
      const double dtheta = (delta * sigmoid(theta) - phi_ij) * inv_w2;
      axpy(grad.row(i), dtheta, h.row(j));
      axpy(grad.row(j), dtheta, h.row(i));
    }
  }
  value *= inv_w2;
  return {value, std::move(grad)};
}

std::pair<double, Mat> quantization_loss(const Mat& h, double lambda) {
  const size_t b = h.rows;
  const size_t w = pair_window(lambda, b);
  const size_t j0 = b - w;
  const double inv_b = 1.0 / static_cast<double>(b);

  Mat grad(b, h.cols);
  double value = 0.0;
  for (size_t i = 0; i < b; ++i) {
    if (i >= w && i < j0) continue;  // outside both windows
    double norm2 = 0.0;
    for (size_t j = 0; j < h.cols; ++j) {
      const double gap = std::abs(h(i, j)) - 1.0;
      norm2 += gap * gap;
    }
    const double norm = std::sqrt(norm2);
    value += norm;
    const double denom = static_cast<double>(b) * std::max(norm, 1e-12);
    for (size_t j = 0; j < h.cols; ++j) {
      const double hij = h(i, j);
      const double sign = hij >= 0.0 ? 1.0 : -1.0;
      grad(i, j) = (std::abs(hij) - 1.0) * sign / denom;
    }
  }
  value *= inv_b;
  return {value, std::move(grad)};
}

LossBreakdown total_loss(const Mat& h, const Mat& phi, const TrainConfig& cfg) {
  auto [l_m, grad_m] = metric_loss(h, phi, cfg.delta, cfg.lambda);
  auto [l_q, grad_q] = quantization_loss(h, cfg.lambda);

  LossBreakdown out;
  out.metric = l_m;
  out.quantization = l_q;
  out.total = l_m + cfg.mu * l_q;
  out.grad_h = std::move(grad_m);
  for (size_t i = 0; i < out.grad_h.a.size(); ++i)
    out.grad_h.a[i] += cfg.mu * grad_q.a[i];
  return out;
}

}  // namespace mmhash
