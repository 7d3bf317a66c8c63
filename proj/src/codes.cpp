#include "mmhash/codes.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <unordered_set>

#include "mmhash/binio.hpp"
#include "mmhash/errors.hpp"

namespace mmhash {

PackedCode binarize(std::span<const double> h) {
  PackedCode c;
  c.bits = static_cast<uint32_t>(h.size());
  c.words.assign((h.size() + 63) / 64, 0);
  for (size_t j = 0; j < h.size(); ++j)
    if (h[j] >= 0.0) c.words[j / 64] |= uint64_t{1} << (j % 64);
  return c;
}

uint32_t hamming_distance(const PackedCode& a, const PackedCode& b) {
  if (a.bits != b.bits)
    raise(Err::WidthMismatch, "code widths differ: " + std::to_string(a.bits) + " vs " +
                                  std::to_string(b.bits));
  uint32_t d = 0;
  for (size_t w = 0; w < a.words.size(); ++w)
    d += static_cast<uint32_t>(std::popcount(a.words[w] ^ b.words[w]));
  return d;
}

PackedCode CodeIndex::code(size_t i) const {
  PackedCode c;
  c.bits = bits;
  const auto w = code_words(i);
  c.words.assign(w.begin(), w.end());
  return c;
}

CodeIndex build_index(const std::vector<std::pair<uint64_t, PackedCode>>& codes) {
  CodeIndex index;
  if (codes.empty()) return index;

  index.bits = codes.front().second.bits;
  index.words_per_code = codes.front().second.words.size();
  index.ids.reserve(codes.size());
  index.words.reserve(codes.size() * index.words_per_code);

  std::unordered_set<uint64_t> seen;
  seen.reserve(codes.size());
  for (const auto& [id, code] : codes) {
    if (code.bits != index.bits)
      raise(Err::WidthMismatch, "code width " + std::to_string(code.bits) +
                                    " != index width " + std::to_string(index.bits));
    if (!seen.insert(id).second)
      raise(Err::DuplicateId, "id " + std::to_string(id) + " inserted twice");
    index.ids.push_back(id);
    index.words.insert(index.words.end(), code.words.begin(), code.words.end());
  }
  return index;
}

std::vector<SearchHit> search(const CodeIndex& index, const PackedCode& query) {
  if (index.size() != 0 && query.bits != index.bits)
    raise(Err::WidthMismatch, "query width " + std::to_string(query.bits) +
                                  " != index width " + std::to_string(index.bits));

  std::vector<SearchHit> hits(index.size());
  for (size_t i = 0; i < index.size(); ++i) {
    const auto words = index.code_words(i);
    uint32_t d = 0;
    for (size_t w = 0; w < words.size(); ++w)
      d += static_cast<uint32_t>(std::popcount(words[w] ^ query.words[w]));
    hits[i] = {index.ids[i], d};
  }
  std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  });
  return hits;
}

std::vector<std::pair<uint64_t, PackedCode>> encode_items(
    const ModelParams& params, const EmbeddingMatrix& vision,
    const EmbeddingMatrix& text, std::span<const uint64_t> ids) {
  if (vision.count != text.count)
    raise(Err::DimMismatch, "vision/text counts disagree");
  if (static_cast<size_t>(vision.dim) + text.dim != params.input_dim)
    raise(Err::DimMismatch, "embedding dims " + std::to_string(vision.dim) + "+" +
                                std::to_string(text.dim) + " != model input dim " +
                                std::to_string(params.input_dim));

  const size_t d = params.input_dim;
  Vec vrow(vision.dim), trow(text.dim), z_c(d), z_f(d), gate(d), h(params.code_bits);

  std::vector<std::pair<uint64_t, PackedCode>> out;
  out.reserve(ids.size());
  for (uint64_t id : ids) {
    if (id >= vision.count)
      raise(Err::IdOutOfRange, "item id " + std::to_string(id) + " >= count " +
                                   std::to_string(vision.count));
    const auto v = vision.row(id);
    const auto t = text.row(id);
    for (size_t j = 0; j < vrow.size(); ++j) vrow[j] = v[j];
    for (size_t j = 0; j < trow.size(); ++j) trow[j] = t[j];
    concat_features(vrow, trow, params.variant, z_c);
    forward_gate(z_c, params, z_f, gate);
    forward_hash(z_f, params, h);
    out.emplace_back(id, binarize(h));
  }
  return out;
}

void write_codes(const CodeIndex& index, const std::filesystem::path& path) {
  atomic_write_file(path, [&](std::ostream& os) {
    BinaryWriter w(os);
    w.magic(FileKind::Codes);
    w.u64(index.size());
    w.u32(index.bits);
    for (size_t i = 0; i < index.size(); ++i) {
      w.u64(index.ids[i]);
      w.u64_array(index.code_words(i));
    }
  });
}

CodeIndex read_codes(const std::filesystem::path& path) {
  std::ifstream is = open_input(path);
  BinaryReader r(is, path.string());
  r.expect_magic(FileKind::Codes);

  CodeIndex index;
  const uint64_t count = r.u64();
  index.bits = r.u32();
  if (index.bits == 0) raise(Err::CorruptFile, path.string() + ": zero code width");
  index.words_per_code = (static_cast<size_t>(index.bits) + 63) / 64;
  index.ids.resize(count);
  index.words.resize(count * index.words_per_code);

  const size_t top_used = index.bits - (index.words_per_code - 1) * 64;
  std::unordered_set<uint64_t> seen;
  seen.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    index.ids[i] = r.u64();
    if (!seen.insert(index.ids[i]).second)
      raise(Err::DuplicateId, path.string() + ": id " + std::to_string(index.ids[i]) +
                                  " appears twice");
    const std::span<uint64_t> words(index.words.data() + i * index.words_per_code,
                                    index.words_per_code);
    r.u64_array(words);
    if (top_used < 64 && (words.back() >> top_used) != 0)
      raise(Err::CorruptFile, path.string() + ": nonzero bits above code width in item " +
                                  std::to_string(i));
  }
  r.expect_eof();
  return index;
}

}  // namespace mmhash
