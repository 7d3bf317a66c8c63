#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "mmhash/dataio.hpp"
#include "mmhash/model.hpp"

namespace mmhash {

/// A k-bit binary code packed into 64-bit words, bit j at word j/64 position
/// j%64 (little-endian bit order). Bits above position k-1 are zero.
struct PackedCode {
  uint32_t bits = 0;
  std::vector<uint64_t> words;

  bool get(size_t j) const { return (words[j / 64] >> (j % 64)) & 1u; }
};

/// bit j = 1 iff h_j >= 0 (sign(0) counts as +1 so ties are deterministic).
PackedCode binarize(std::span<const double> h);

/// Exact Hamming distance via XOR + popcount. Widths must match.
uint32_t hamming_distance(const PackedCode& a, const PackedCode& b);

/// Immutable retrieval-set container: ids plus contiguous packed codes,
/// iteration order = insertion order.
struct CodeIndex {
  uint32_t bits = 0;
  size_t words_per_code = 0;
  std::vector<uint64_t> ids;
  std::vector<uint64_t> words;  // ids.size() * words_per_code

  size_t size() const { return ids.size(); }
  std::span<const uint64_t> code_words(size_t i) const {
    return {words.data() + i * words_per_code, words_per_code};
  }
  PackedCode code(size_t i) const;
};

CodeIndex build_index(const std::vector<std::pair<uint64_t, PackedCode>>& codes);

struct SearchHit {
  uint64_t id = 0;
  uint32_t distance = 0;
};

/// Full linear scan ranked by (distance ascending, id ascending); the id
/// tie-break makes the ranking total, so results are independent of
/// insertion order and scan scheduling.
std::vector<SearchHit> search(const CodeIndex& index, const PackedCode& query);

/// Forward + binarize the listed items. The paired embedding matrices supply
/// the two modalities; ids index rows of both.
std::vector<std::pair<uint64_t, PackedCode>> encode_items(
    const ModelParams& params, const EmbeddingMatrix& vision,
    const EmbeddingMatrix& text, std::span<const uint64_t> ids);

/// Code file: "MMH1" 'C', u64 count, u32 k, then per item u64 id plus
/// ceil(k/64) little-endian words.
void write_codes(const CodeIndex& index, const std::filesystem::path& path);
CodeIndex read_codes(const std::filesystem::path& path);

}  // namespace mmhash
