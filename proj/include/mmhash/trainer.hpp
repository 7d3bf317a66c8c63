#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "mmhash/config.hpp"
#include "mmhash/dataio.hpp"
#include "mmhash/loss.hpp"
#include "mmhash/model.hpp"

namespace mmhash {

/// One tensor per learnable parameter; used for gradients and Adam moments.
struct ParamTensors {
  Mat w_f;
  Vec b_f;
  Mat w_h;
  Vec b_h;
};

ParamTensors zeros_like(const ModelParams& p);

/// Adam accumulators. Moments are kept in double; the step counter drives
/// bias correction.
struct OptimizerState {
  uint64_t step = 0;
  ParamTensors m;
  ParamTensors v;

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;
};

OptimizerState make_optimizer(const ModelParams& p);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss_total = 0.0;
  double loss_metric = 0.0;
  double loss_quantization = 0.0;
  std::optional<double> map;  // per-epoch test mAP, when enabled
  double wall_ms = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

/// `epoch,loss_total,loss_m,loss_q,map,wall_ms`; map column empty when eval
/// was off.
void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path);

/// Exact analytic gradients of the batch loss with respect to every
/// parameter, chained through tanh, the hash affine, the gate product and the
/// gate affine. For concat_only there is no gate path, so w_f/b_f gradients
/// stay zero.
ParamTensors backward_batch(const BatchActivations& acts, const Mat& grad_h,
                            const ModelParams& params);

/// Standard Adam update with bias correction. Updated parameters are rounded
/// to f32 so the in-memory model always matches its checkpoint encoding.
void adam_step(ModelParams& params, const ParamTensors& grads, OptimizerState& state,
               double lr);

/// Called once per epoch with the current parameters when per-epoch
/// evaluation is enabled; returns the test mAP to log.
using EvalCallback = std::function<double(const ModelParams&)>;

struct TrainResult {
  ModelParams params;
  OptimizerState opt;
  TrainLog log;
};

/// Mini-batch training: per epoch, shuffle the train ids with the seeded RNG,
/// drop the remainder after floor(N/b) full batches (the loss windows need
/// exactly b rows), and for each batch run forward -> phi -> loss -> backward
/// -> adam. Deterministic in (seed, data, config).
TrainResult train(const Dataset& data, const TrainConfig& cfg,
                  const EvalCallback& eval_cb = {});

/// Checkpoint: "MMH1" 'P', u32 d_c, u32 k, u64 seed, variant byte, params as
/// f32 (w_f, b_f, w_h, b_h row-major), then an optimizer block (step counter
/// and f64 moments) when present. Round-trips bit-exactly.
void save_checkpoint(const ModelParams& params, const OptimizerState* state,
                     const std::filesystem::path& path);

struct Checkpoint {
  ModelParams params;
  std::optional<OptimizerState> opt;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mmhash
