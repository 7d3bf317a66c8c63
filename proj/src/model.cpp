#include "mmhash/model.hpp"

#include <cmath>

#include "mmhash/errors.hpp"
#include "mmhash/rng.hpp"

namespace mmhash {

namespace {

void glorot_fill(Mat& w, size_t fan_in, size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w.a) v = static_cast<double>(static_cast<float>(rng.uniform(-a, a)));
}

}  // namespace

ModelParams init_params(size_t d_c, size_t k, uint64_t seed) {
  if (d_c < 1 || k < 1) raise(Err::ShapeMismatch, "init_params needs d_c, k >= 1");
  ModelParams p;
  p.input_dim = d_c;
  p.code_bits = k;
  p.seed = seed;
  p.w_f = Mat(d_c, d_c);
  p.b_f = Vec(d_c, 0.0);
  p.w_h = Mat(d_c, k);
  p.b_h = Vec(k, 0.0);

  Rng rng(seed, kStreamInit);
  glorot_fill(p.w_f, d_c, d_c, rng);
  glorot_fill(p.w_h, d_c, k, rng);
  return p;
}

void concat_features(std::span<const double> vision, std::span<const double> text,
                     Variant variant, std::span<double> out) {
  if (out.size() != vision.size() + text.size())
    raise(Err::DimMismatch, "concat output width " + std::to_string(out.size()) +
                                " != vision+text " +
                                std::to_string(vision.size() + text.size()));
  const bool keep_vision = variant != Variant::text_only;
  const bool keep_text = variant != Variant::vision_only;
  for (size_t i = 0; i < vision.size(); ++i) out[i] = keep_vision ? vision[i] : 0.0;
  for (size_t i = 0; i < text.size(); ++i)
    out[vision.size() + i] = keep_text ? text[i] : 0.0;
}

void forward_gate(std::span<const double> z_c, const ModelParams& p,
                  std::span<double> z_f, std::span<double> gate) {
  const size_t d = p.input_dim;
  if (z_c.size() != d || z_f.size() != d || gate.size() != d)
    raise(Err::DimMismatch, "forward_gate width mismatch");

  if (p.variant == Variant::concat_only) {
    for (size_t i = 0; i < d; ++i) {
      gate[i] = 1.0;
      z_f[i] = z_c[i];
    }
    return;
  }

  Vec pre(d);
  affine_row(z_c, p.w_f, p.b_f, pre);
  for (size_t i = 0; i < d; ++i) {
    gate[i] = sigmoid(pre[i]);
    z_f[i] = gate[i] * z_c[i];
  }
}

void forward_hash(std::span<const double> z_f, const ModelParams& p,
                  std::span<double> h) {
  if (z_f.size() != p.input_dim || h.size() != p.code_bits)
    raise(Err::DimMismatch, "forward_hash width mismatch");
  Vec pre(p.code_bits);
  affine_row(z_f, p.w_h, p.b_h, pre);
  for (size_t j = 0; j < h.size(); ++j) h[j] = std::tanh(pre[j]);
}

BatchActivations forward_batch(const Mat& vision, const Mat& text, const ModelParams& p) {
  if (vision.rows != text.rows)
    raise(Err::DimMismatch, "vision rows " + std::to_string(vision.rows) +
                                " != text rows " + std::to_string(text.rows));
  if (vision.cols + text.cols != p.input_dim)
    raise(Err::DimMismatch, "vision+text dims " +
                                std::to_string(vision.cols + text.cols) +
                                " != model input dim " + std::to_string(p.input_dim));

  const size_t b = vision.rows;
  BatchActivations acts;
  acts.z_c = Mat(b, p.input_dim);
  acts.gate = Mat(b, p.input_dim);
  acts.z_f = Mat(b, p.input_dim);
  acts.h = Mat(b, p.code_bits);

  for (size_t r = 0; r < b; ++r) {
    concat_features(vision.row(r), text.row(r), p.variant, acts.z_c.row(r));
    forward_gate(acts.z_c.row(r), p, acts.z_f.row(r), acts.gate.row(r));
    forward_hash(acts.z_f.row(r), p, acts.h.row(r));
  }
  return acts;
}

}  // namespace mmhash
