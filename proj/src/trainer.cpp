#include "mmhash/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mmhash/binio.hpp"
#include "mmhash/errors.hpp"
#include "mmhash/rng.hpp"

namespace mmhash {

ParamTensors zeros_like(const ModelParams& p) {
  ParamTensors t;
  t.w_f = Mat(p.w_f.rows, p.w_f.cols);
  t.b_f = Vec(p.b_f.size(), 0.0);
  t.w_h = Mat(p.w_h.rows, p.w_h.cols);
  t.b_h = Vec(p.b_h.size(), 0.0);
  return t;
}

OptimizerState make_optimizer(const ModelParams& p) {
  OptimizerState s;
  s.m = zeros_like(p);
  s.v = zeros_like(p);
  return s;
}

ParamTensors backward_batch(const BatchActivations& acts, const Mat& grad_h,
                            const ModelParams& params) {
  const size_t b = acts.h.rows;
  const size_t d = params.input_dim;
  const size_t k = params.code_bits;
  if (!acts.h.same_shape(grad_h))
    raise(Err::ShapeMismatch, "grad_h shape does not match activations");
  if (acts.z_c.rows != b || acts.z_c.cols != d || acts.h.cols != k)
    raise(Err::ShapeMismatch, "activations do not match params shapes");

  ParamTensors g = zeros_like(params);
  Vec g_pre_h(k);
  Vec g_zf(d);
  Vec g_pre_f(d);

  const bool gated = params.variant != Variant::concat_only;

  for (size_t r = 0; r < b; ++r) {
    // tanh backward: dL/dpre = dL/dh * (1 - h^2)
    const auto h_row = acts.h.row(r);
    const auto gh_row = grad_h.row(r);
    for (size_t j = 0; j < k; ++j)
      g_pre_h[j] = gh_row[j] * (1.0 - h_row[j] * h_row[j]);

    accumulate_outer(g.w_h, acts.z_f.row(r), g_pre_h);
    for (size_t j = 0; j < k; ++j) g.b_h[j] += g_pre_h[j];

    if (!gated) continue;

    // into the fused features, then through the multiplicative gate
    backprop_row(g_pre_h, params.w_h, g_zf);
    const auto zc_row = acts.z_c.row(r);
    const auto gate_row = acts.gate.row(r);
    for (size_t i = 0; i < d; ++i)
      g_pre_f[i] = g_zf[i] * zc_row[i] * gate_row[i] * (1.0 - gate_row[i]);

    accumulate_outer(g.w_f, zc_row, g_pre_f);
    for (size_t i = 0; i < d; ++i) g.b_f[i] += g_pre_f[i];
  }
  return g;
}

namespace {

void adam_update(double* p, const double* g, double* m, double* v, size_t n,
                 double lr, double bc1, double bc2) {
  for (size_t i = 0; i < n; ++i) {
    m[i] = OptimizerState::kBeta1 * m[i] + (1.0 - OptimizerState::kBeta1) * g[i];
    v[i] = OptimizerState::kBeta2 * v[i] + (1.0 - OptimizerState::kBeta2) * g[i] * g[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    const double next = p[i] - lr * m_hat / (std::sqrt(v_hat) + OptimizerState::kEpsilon);
    // keep params exactly f32-representable (checkpoint precision)
    p[i] = static_cast<double>(static_cast<float>(next));
  }
}

}  // namespace

void adam_step(ModelParams& params, const ParamTensors& grads, OptimizerState& state,
               double lr) {
  if (!params.w_f.same_shape(grads.w_f) || !params.w_h.same_shape(grads.w_h) ||
      params.b_f.size() != grads.b_f.size() || params.b_h.size() != grads.b_h.size())
    raise(Err::ShapeMismatch, "gradient shapes do not match params");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(OptimizerState::kBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(OptimizerState::kBeta2, static_cast<double>(state.step));

  adam_update(params.w_f.a.data(), grads.w_f.a.data(), state.m.w_f.a.data(),
              state.v.w_f.a.data(), params.w_f.a.size(), lr, bc1, bc2);
  adam_update(params.b_f.data(), grads.b_f.data(), state.m.b_f.data(),
              state.v.b_f.data(), params.b_f.size(), lr, bc1, bc2);
  adam_update(params.w_h.a.data(), grads.w_h.a.data(), state.m.w_h.a.data(),
              state.v.w_h.a.data(), params.w_h.a.size(), lr, bc1, bc2);
  adam_update(params.b_h.data(), grads.b_h.data(), state.m.b_h.data(),
              state.v.b_h.data(), params.b_h.size(), lr, bc1, bc2);
}

TrainResult train(const Dataset& data, const TrainConfig& cfg, const EvalCallback& eval_cb) {
  data.validate();
  if (data.vision.dim != static_cast<uint32_t>(cfg.vision_dim) ||
      data.text.dim != static_cast<uint32_t>(cfg.text_dim))
    raise(Err::DimMismatch,
          "dataset dims " + std::to_string(data.vision.dim) + "/" +
              std::to_string(data.text.dim) + " do not match config " +
              std::to_string(cfg.vision_dim) + "/" + std::to_string(cfg.text_dim));

  const size_t b = static_cast<size_t>(cfg.batch_size);
  const size_t n_train = data.split.train_ids.size();
  if (n_train < b)
    raise(Err::TrainTooSmall, "train split has " + std::to_string(n_train) +
                                  " items, batch size is " + std::to_string(b));
  pair_window(cfg.lambda, b);  // fail fast on a non-integral window

  TrainResult out;
  out.params = init_params(static_cast<size_t>(cfg.concat_dim()),
                           static_cast<size_t>(cfg.code_bits), cfg.seed);
  out.params.variant = cfg.variant;
  out.opt = make_optimizer(out.params);

  Rng shuffle_rng(cfg.seed, kStreamShuffle);
  std::vector<uint64_t> ids = data.split.train_ids;
  const size_t batches = n_train / b;

  Mat vision_b(b, data.vision.dim);
  Mat text_b(b, data.text.dim);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(ids);

    double sum_total = 0.0, sum_metric = 0.0, sum_quant = 0.0;
    for (size_t bi = 0; bi < batches; ++bi) {
      const std::span<const uint64_t> batch_ids(ids.data() + bi * b, b);
      for (size_t r = 0; r < b; ++r) {
        const auto vrow = data.vision.row(batch_ids[r]);
        const auto trow = data.text.row(batch_ids[r]);
        for (size_t j = 0; j < vision_b.cols; ++j) vision_b(r, j) = vrow[j];
        for (size_t j = 0; j < text_b.cols; ++j) text_b(r, j) = trow[j];
      }

      BatchActivations acts = forward_batch(vision_b, text_b, out.params);
      const Mat phi = similarity_matrix(data.labels, batch_ids, cfg.lambda);
      LossBreakdown lb = total_loss(acts.h, phi, cfg);
      if (!std::isfinite(lb.total))
        raise(Err::NumericFailure, "non-finite loss at epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(bi) +
                                       " (metric=" + std::to_string(lb.metric) +
                                       ", quantization=" + std::to_string(lb.quantization) + ")");

      const ParamTensors grads = backward_batch(acts, lb.grad_h, out.params);
      adam_step(out.params, grads, out.opt, cfg.learning_rate);

      sum_total += lb.total;
      sum_metric += lb.metric;
      sum_quant += lb.quantization;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_total = sum_total / static_cast<double>(batches);
    rec.loss_metric = sum_metric / static_cast<double>(batches);
    rec.loss_quantization = sum_quant / static_cast<double>(batches);
    if (eval_cb) rec.map = eval_cb(out.params);
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    out.log.epochs.push_back(rec);
  }
  return out;
}

void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path) {
  atomic_write_file(path, [&](std::ostream& os) {
    std::ostringstream ss;
    ss << "epoch,loss_total,loss_m,loss_q,map,wall_ms\n";
    ss.precision(12);
    for (const EpochRecord& r : log.epochs) {
      ss << r.epoch << ',' << r.loss_total << ',' << r.loss_metric << ','
         << r.loss_quantization << ',';
      if (r.map) ss << *r.map;
      ss << ',' << r.wall_ms << "\n";
    }
    os << ss.str();
  });
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

void write_f32_tensor(BinaryWriter& w, const std::vector<double>& vals) {
  std::vector<float> f(vals.size());
  for (size_t i = 0; i < vals.size(); ++i) f[i] = static_cast<float>(vals[i]);
  w.f32_array(f);
}

void read_f32_tensor(BinaryReader& r, std::vector<double>& out) {
  std::vector<float> f(out.size());
  r.f32_array(f);
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(f[i]);
}

void write_f64_tensor(BinaryWriter& w, const std::vector<double>& vals) {
  for (double v : vals) w.f64(v);
}

void read_f64_tensor(BinaryReader& r, std::vector<double>& out) {
  for (double& v : out) v = r.f64();
}

}  // namespace

void save_checkpoint(const ModelParams& params, const OptimizerState* state,
                     const std::filesystem::path& path) {
  atomic_write_file(path, [&](std::ostream& os) {
    BinaryWriter w(os);
    w.magic(FileKind::Params);
    w.u32(static_cast<uint32_t>(params.input_dim));
    w.u32(static_cast<uint32_t>(params.code_bits));
    w.u64(params.seed);
    w.u8(static_cast<uint8_t>(params.variant));
    write_f32_tensor(w, params.w_f.a);
    write_f32_tensor(w, params.b_f);
    write_f32_tensor(w, params.w_h.a);
    write_f32_tensor(w, params.b_h);
    w.u8(state != nullptr ? 1 : 0);
    if (state != nullptr) {
      w.u64(state->step);
      write_f64_tensor(w, state->m.w_f.a);
      write_f64_tensor(w, state->m.b_f);
      write_f64_tensor(w, state->m.w_h.a);
      write_f64_tensor(w, state->m.b_h);
      write_f64_tensor(w, state->v.w_f.a);
      write_f64_tensor(w, state->v.b_f);
      write_f64_tensor(w, state->v.w_h.a);
      write_f64_tensor(w, state->v.b_h);
    }
  });
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is = open_input(path);
  BinaryReader r(is, path.string());
  r.expect_magic(FileKind::Params);

  Checkpoint c;
  const uint32_t d_c = r.u32();
  const uint32_t k = r.u32();
  c.params.input_dim = d_c;
  c.params.code_bits = k;
  c.params.seed = r.u64();
  const uint8_t variant = r.u8();
  if (variant > static_cast<uint8_t>(Variant::text_only))
    raise(Err::CorruptFile, path.string() + ": unknown variant byte " +
                                std::to_string(variant));
  c.params.variant = static_cast<Variant>(variant);
  c.params.w_f = Mat(d_c, d_c);
  c.params.b_f = Vec(d_c, 0.0);
  c.params.w_h = Mat(d_c, k);
  c.params.b_h = Vec(k, 0.0);
  read_f32_tensor(r, c.params.w_f.a);
  read_f32_tensor(r, c.params.b_f);
  read_f32_tensor(r, c.params.w_h.a);
  read_f32_tensor(r, c.params.b_h);

  const uint8_t has_opt = r.u8();
  if (has_opt > 1)
    raise(Err::CorruptFile, path.string() + ": bad optimizer flag");
  if (has_opt == 1) {
    OptimizerState s = make_optimizer(c.params);
    s.step = r.u64();
    read_f64_tensor(r, s.m.w_f.a);
    read_f64_tensor(r, s.m.b_f);
    read_f64_tensor(r, s.m.w_h.a);
    read_f64_tensor(r, s.m.b_h);
    read_f64_tensor(r, s.v.w_f.a);
    read_f64_tensor(r, s.v.b_f);
    read_f64_tensor(r, s.v.w_h.a);
    read_f64_tensor(r, s.v.b_h);
    c.opt = std::move(s);
  }
  r.expect_eof();
  return c;
}

}  // namespace mmhash
