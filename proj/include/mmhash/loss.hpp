#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>

#include "mmhash/config.hpp"
#include "mmhash/dataio.hpp"
#include "mmhash/mat.hpp"

namespace mmhash {

/// Pairwise quantities between the two index windows of a batch: window 1 is
/// the first round(lambda*b) rows, window 2 the last round(lambda*b) rows
/// (they overlap when lambda > 0.5). theta(i, j) is the inner product of
/// relaxed codes h_i and h_{b-w+j}; phi holds the 0/1 similarity indicator
/// for the same pairs.
struct PairwiseTerms {
  Mat theta;
  Mat phi;
};

/// One evaluation of the training objective on a batch.
/// total = metric + mu * quantization; grad_h is d(total)/dh, with zero rows
/// for batch rows outside both windows.
struct LossBreakdown {
  double metric = 0.0;
  double quantization = 0.0;
  double total = 0.0;
  Mat grad_h;  // b x k
};

/// 1 iff the two multi-hot label rows share a category.
int similarity_indicator(std::span<const uint64_t> labels_i,
                         std::span<const uint64_t> labels_j);

/// Window-pair similarity matrix for a batch: phi(i, j) compares batch item
/// ids[i] against ids[b-w+j], w = round(lambda*b).
Mat similarity_matrix(const LabelMatrix& labels, std::span<const uint64_t> batch_ids,
                      double lambda);

/// Inner products and indicators for the window pairs of a batch.
PairwiseTerms compute_pairwise(const Mat& h, const Mat& phi, double lambda);

/// Pairwise metric loss over the two windows:
///   1/w^2 * sum_{i<w, j>=b-w} [delta*softplus(theta_ij) - phi_ij*theta_ij]
/// Returns the value and its exact gradient with respect to h. A row that
/// lies in both windows accumulates both sides' contributions.
std::pair<double, Mat> metric_loss(const Mat& h, const Mat& phi, double delta,
                                   double lambda);

/// Quantization penalty 1/b * sum_{i in I} || |h_i| - 1 ||_2 over the union
/// of the two windows, with an epsilon guard on the norm-zero singularity.
std::pair<double, Mat> quantization_loss(const Mat& h, double lambda);

/// metric + mu * quantization with the combined gradient.
LossBreakdown total_loss(const Mat& h, const Mat& phi, const TrainConfig& cfg);

/// Numerically stable log(1 + e^x).
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace mmhash
