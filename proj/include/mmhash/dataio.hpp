#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace mmhash {

/// N x D matrix of f32 embeddings, row per item. Values are stored exactly as
/// the `.emb` format holds them, so read(write(m)) is bit-identical.
struct EmbeddingMatrix {
  uint64_t count = 0;
  uint32_t dim = 0;
  std::vector<float> values;  // count * dim, row-major

  std::span<const float> row(size_t i) const { return {values.data() + i * dim, dim}; }
  std::span<float> row(size_t i) { return {values.data() + i * dim, dim}; }
};

/// Multi-hot label rows packed 64 categories per word, little-endian bit
/// order. Every row carries at least one set bit.
struct LabelMatrix {
  uint64_t count = 0;
  uint32_t categories = 0;
  std::vector<uint64_t> words;  // count * words_per_row

  size_t words_per_row() const { return (static_cast<size_t>(categories) + 63) / 64; }

  std::span<const uint64_t> row(size_t i) const {
    return {words.data() + i * words_per_row(), words_per_row()};
  }

  bool get(size_t i, size_t category) const {
    return (row(i)[category / 64] >> (category % 64)) & 1u;
  }

  void set(size_t i, size_t category) {
    words[i * words_per_row() + category / 64] |= uint64_t{1} << (category % 64);
  }
};

/// 1 iff the two label sets share at least one category. Shared by the
/// training similarity indicator and the retrieval ground truth.
inline int labels_intersect(std::span<const uint64_t> a, std::span<const uint64_t> b) {
  for (size_t w = 0; w < a.size(); ++w)
    if (a[w] & b[w]) return 1;
  return 0;
}

/// Item-id lists for the train / retrieval / query protocol. Query and
/// retrieval must be disjoint; train may overlap either.
struct SplitManifest {
  std::vector<uint64_t> train_ids;
  std::vector<uint64_t> retrieval_ids;
  std::vector<uint64_t> query_ids;

  /// Raises IdOutOfRange if any id >= item_count.
  void validate_against(uint64_t item_count) const;
};

// ---------------------------------------------------------------------------
// File formats (all little-endian, magic "MMH1")
// ---------------------------------------------------------------------------

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

void write_labels(const LabelMatrix& m, const std::filesystem::path& path);
LabelMatrix read_labels(const std::filesystem::path& path);

void write_manifest(const SplitManifest& m, const std::filesystem::path& path);
SplitManifest load_manifest(const std::filesystem::path& path);

/// One dataset: two embedding matrices, labels, and a split, all over the
/// same item ids.
struct Dataset {
  EmbeddingMatrix vision;
  EmbeddingMatrix text;
  LabelMatrix labels;
  SplitManifest split;

  /// Cross-checks counts and split ids (DimMismatch / IdOutOfRange).
  void validate() const;
};

Dataset load_dataset(const std::filesystem::path& vision_path,
                     const std::filesystem::path& text_path,
                     const std::filesystem::path& labels_path,
                     const std::filesystem::path& manifest_path);

/// Writes vision.emb, text.emb, labels.lbl, manifest.txt into dir.
void write_dataset(const Dataset& d, const std::filesystem::path& dir);

/// Clustered stand-in for precomputed encoder features: unit-norm random
/// centers per modality, per-item Gaussian jitter of scale `noise`, one-hot
/// cluster labels, and a 60/30/10 train/retrieval/query split per cluster.
/// Deterministic in `seed`.
Dataset generate_synthetic(size_t clusters, size_t per_cluster, size_t dim,
                           double noise, uint64_t seed);

}  // namespace mmhash
