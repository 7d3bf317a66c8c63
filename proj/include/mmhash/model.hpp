#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "mmhash/config.hpp"
#include "mmhash/mat.hpp"

namespace mmhash {

/// Learnable parameters of the fusion gate and hash layer. Weights are stored
/// input x output and act on row vectors: preact = z * W + b. Every entry is
/// exactly representable in f32, matching the checkpoint format, so a
/// save/load round trip reproduces the in-memory model bit for bit.
struct ModelParams {
  size_t input_dim = 0;  // d_c = vision_dim + text_dim
  size_t code_bits = 0;  // k
  uint64_t seed = 0;     // provenance: seed the params were initialized from
  Variant variant = Variant::full;

  Mat w_f;  // d_c x d_c gate weights
  Vec b_f;  // d_c gate bias
  Mat w_h;  // d_c x k hash weights
  Vec b_h;  // k hash bias
};

/// Per-batch forward intermediates, kept for backpropagation.
/// z_f = gate o z_c row by row; for the concat_only variant the gate rows are
/// stored as 1.0 (the gate step is skipped entirely).
struct BatchActivations {
  Mat z_c;   // b x d_c concatenated features
  Mat gate;  // b x d_c sigmoid gate values
  Mat z_f;   // b x d_c fused features
  Mat h;     // b x k relaxed codes in (-1, 1)
};

/// Overflow-safe logistic sigmoid.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Glorot-uniform weights (a = sqrt(6/(fan_in+fan_out)) per matrix), zero
/// biases. Draws are rounded to f32 so fresh params are checkpoint-exact.
ModelParams init_params(size_t d_c, size_t k, uint64_t seed);

/// [vision || text] with the excluded modality zero-filled, so every variant
/// shares one parameter shape.
void concat_features(std::span<const double> vision, std::span<const double> text,
                     Variant variant, std::span<double> out);

/// Context gating: gate = sigmoid(z_c * w_f + b_f), z_f = gate o z_c.
/// concat_only skips the gate (z_f = z_c, gate filled with 1).
void forward_gate(std::span<const double> z_c, const ModelParams& p,
                  std::span<double> z_f, std::span<double> gate);

/// Hash layer: h = tanh(z_f * w_h + b_h), entries strictly inside (-1, 1)
/// for non-saturating preactivations.
void forward_hash(std::span<const double> z_f, const ModelParams& p,
                  std::span<double> h);

/// Row-by-row concat -> gate -> hash over a batch; keeps all intermediates.
/// Each row is computed by the single-vector ops above, so a one-row batch is
/// bitwise identical to composing them.
BatchActivations forward_batch(const Mat& vision, const Mat& text, const ModelParams& p);

}  // namespace mmhash
