#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace mmhash {

/// Forward-pass variants used by the ablation grid. Single-modality variants
/// zero-fill the excluded half of the concatenated input; concat_only skips
/// the fusion gate. Byte values are part of the checkpoint format.
enum class Variant : uint8_t {
  full = 0,
  concat_only = 1,
  vision_only = 2,
  text_only = 3,
};

const char* variant_name(Variant v);
Variant variant_from_string(const std::string& s);  // accepts "concat-only" and "concat_only"

/// Every hyperparameter the engine needs. The paper leaves the training
/// schedule to grid search, so the defaults here are engineering choices
/// sized for desk-scale runs; all of them are overridable per file or flag.
struct TrainConfig {
  int code_bits = 64;         // k, hash width in bits
  int batch_size = 32;        // b
  double lambda = 0.5;        // index-window fraction; lambda*b must be integral
  double delta = 1.0;         // weight on the softplus term of the metric loss
  double mu = 0.01;           // quantization weight
  double learning_rate = 5e-3;
  int epochs = 50;
  uint64_t seed = 42;
  int vision_dim = 512;
  int text_dim = 512;
  Variant variant = Variant::full;

  int concat_dim() const { return vision_dim + text_dim; }
  /// round(lambda * batch_size); validity is checked by validate().
  int window_size() const;
};

/// Window-size helper shared with the loss module: round(lambda * b), raising
/// NonIntegralWindow unless lambda * b is a whole number (tolerance 1e-9) >= 1.
size_t pair_window(double lambda, size_t batch_size);

/// Throws ConfigInvalid naming the first violated field.
void validate(const TrainConfig& cfg);

/// Parses the flat `key = value` text format (one pair per line, `#` starts a
/// comment). Absent keys keep their defaults; the result is validated.
TrainConfig load_config(const std::filesystem::path& path);

/// Writes a config in the same format load_config reads.
void write_config(const TrainConfig& cfg, const std::filesystem::path& path);

}  // namespace mmhash
