#include "mmhash/dataio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "mmhash/binio.hpp"
#include "mmhash/errors.hpp"
#include "mmhash/rng.hpp"

namespace mmhash {

// ---------------------------------------------------------------------------
// Embeddings: "MMH1" 'E' u64 count, u32 dim, count*dim f32 row-major
// ---------------------------------------------------------------------------

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  if (m.values.size() != static_cast<size_t>(m.count) * m.dim)
    raise(Err::ShapeMismatch, "embedding buffer does not match count*dim");
  for (float v : m.values)
    if (!std::isfinite(v)) raise(Err::NonFiniteValue, "embedding matrix contains NaN/Inf");

  atomic_write_file(path, [&](std::ostream& os) {
    BinaryWriter w(os);
    w.magic(FileKind::Embeddings);
    w.u64(m.count);
    w.u32(m.dim);
    w.f32_array(m.values);
  });
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream is = open_input(path);
  BinaryReader r(is, path.string());
  r.expect_magic(FileKind::Embeddings);

  EmbeddingMatrix m;
  m.count = r.u64();
  m.dim = r.u32();
  m.values.resize(static_cast<size_t>(m.count) * m.dim);
  r.f32_array(m.values);
  r.expect_eof();

  for (float v : m.values)
    if (!std::isfinite(v))
      raise(Err::NonFiniteValue, path.string() + ": embedding contains NaN/Inf");
  return m;
}

// ---------------------------------------------------------------------------
// Labels: "MMH1" 'L' u64 count, u32 categories, rows packed 8 bits/byte
// little-endian bit order, each row padded to whole bytes
// ---------------------------------------------------------------------------

void write_labels(const LabelMatrix& m, const std::filesystem::path& path) {
  const size_t wpr = m.words_per_row();
  if (m.words.size() != static_cast<size_t>(m.count) * wpr)
    raise(Err::ShapeMismatch, "label buffer does not match count*categories");

  const size_t bytes_per_row = (static_cast<size_t>(m.categories) + 7) / 8;
  std::vector<uint8_t> packed(bytes_per_row);

  atomic_write_file(path, [&](std::ostream& os) {
    BinaryWriter w(os);
    w.magic(FileKind::Labels);
    w.u64(m.count);
    w.u32(m.categories);
    for (size_t i = 0; i < m.count; ++i) {
      const auto row = m.row(i);
      bool any = false;
      for (uint64_t word : row) any = any || word != 0;
      if (!any) raise(Err::EmptyLabelRow, "label row " + std::to_string(i) + " has no set bit");
      for (size_t b = 0; b < bytes_per_row; ++b)
        packed[b] = static_cast<uint8_t>(row[b / 8] >> (8 * (b % 8)));
      w.bytes(packed);
    }
  });
}

LabelMatrix read_labels(const std::filesystem::path& path) {
  std::ifstream is = open_input(path);
  BinaryReader r(is, path.string());
  r.expect_magic(FileKind::Labels);

  LabelMatrix m;
  m.count = r.u64();
  m.categories = r.u32();
  const size_t wpr = m.words_per_row();
  const size_t bytes_per_row = (static_cast<size_t>(m.categories) + 7) / 8;
  m.words.assign(static_cast<size_t>(m.count) * wpr, 0);

  std::vector<uint8_t> packed(bytes_per_row);
  for (size_t i = 0; i < m.count; ++i) {
    r.bytes(packed);
    uint64_t* row = m.words.data() + i * wpr;
    for (size_t b = 0; b < bytes_per_row; ++b)
      row[b / 8] |= static_cast<uint64_t>(packed[b]) << (8 * (b % 8));

    // pad bits beyond `categories` must be zero
    const size_t last = wpr - 1;
    const size_t used = static_cast<size_t>(m.categories) - last * 64;
    if (used < 64 && (row[last] >> used) != 0)
      raise(Err::CorruptFile, path.string() + ": nonzero padding bits in label row " +
                                  std::to_string(i));
    bool any = false;
    for (size_t w = 0; w < wpr; ++w) any = any || row[w] != 0;
    if (!any)
      raise(Err::EmptyLabelRow, path.string() + ": label row " + std::to_string(i) +
                                    " has no set bit");
  }
  r.expect_eof();
  return m;
}

// ---------------------------------------------------------------------------
// Manifest: text sections "train:", "retrieval:", "query:" followed by
// whitespace-separated decimal ids
// ---------------------------------------------------------------------------

void SplitManifest::validate_against(uint64_t item_count) const {
  const auto check = [&](const std::vector<uint64_t>& ids, const char* section) {
    for (uint64_t id : ids)
      if (id >= item_count)
        raise(Err::IdOutOfRange, std::string(section) + " id " + std::to_string(id) +
                                     " >= item count " + std::to_string(item_count));
  };
  check(train_ids, "train");
  check(retrieval_ids, "retrieval");
  check(query_ids, "query");
}

void write_manifest(const SplitManifest& m, const std::filesystem::path& path) {
  atomic_write_file(path, [&](std::ostream& os) {
    const auto section = [&](const char* name, const std::vector<uint64_t>& ids) {
      os << name << ":";
      for (uint64_t id : ids) os << " " << id;
      os << "\n";
    };
    section("train", m.train_ids);
    section("retrieval", m.retrieval_ids);
    section("query", m.query_ids);
  });
}

SplitManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) raise(Err::IoFailure, "cannot open manifest " + path.string());

  SplitManifest m;
  std::vector<uint64_t>* current = nullptr;
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::istringstream ss(raw);
    std::string tok;
    while (ss >> tok) {
      if (tok == "train:") current = &m.train_ids;
      else if (tok == "retrieval:") current = &m.retrieval_ids;
      else if (tok == "query:") current = &m.query_ids;
      else {
        if (current == nullptr)
          raise(Err::CorruptFile, path.string() + ": line " + std::to_string(line) +
                                      ": ids before any section header");
        uint64_t id = 0;
        size_t pos = 0;
        try {
          id = std::stoull(tok, &pos);
        } catch (const std::exception&) {
          pos = 0;
        }
        if (pos != tok.size())
          raise(Err::CorruptFile, path.string() + ": line " + std::to_string(line) +
                                      ": bad id '" + tok + "'");
        current->push_back(id);
      }
    }
  }

  const auto check_unique = [&](const std::vector<uint64_t>& ids, const char* section) {
    std::unordered_set<uint64_t> seen;
    seen.reserve(ids.size());
    for (uint64_t id : ids)
      if (!seen.insert(id).second)
        raise(Err::DuplicateId, path.string() + ": id " + std::to_string(id) +
                                    " listed twice in " + section);
  };
  check_unique(m.train_ids, "train");
  check_unique(m.retrieval_ids, "retrieval");
  check_unique(m.query_ids, "query");

  std::unordered_set<uint64_t> retrieval(m.retrieval_ids.begin(), m.retrieval_ids.end());
  for (uint64_t id : m.query_ids)
    if (retrieval.count(id))
      raise(Err::OverlapQueryRetrieval,
            path.string() + ": id " + std::to_string(id) + " is in both query and retrieval");
  return m;
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

void Dataset::validate() const {
  if (vision.count != text.count || vision.count != labels.count)
    raise(Err::DimMismatch, "vision/text/label counts disagree: " +
                                std::to_string(vision.count) + "/" + std::to_string(text.count) +
                                "/" + std::to_string(labels.count));
  split.validate_against(vision.count);
}

Dataset load_dataset(const std::filesystem::path& vision_path,
                     const std::filesystem::path& text_path,
                     const std::filesystem::path& labels_path,
                     const std::filesystem::path& manifest_path) {
  Dataset d;
  d.vision = read_embeddings(vision_path);
  d.text = read_embeddings(text_path);
  d.labels = read_labels(labels_path);
  d.split = load_manifest(manifest_path);
  d.validate();
  return d;
}

void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_embeddings(d.vision, dir / "vision.emb");
  write_embeddings(d.text, dir / "text.emb");
  write_labels(d.labels, dir / "labels.lbl");
  write_manifest(d.split, dir / "manifest.txt");
}

Dataset generate_synthetic(size_t clusters, size_t per_cluster, size_t dim,
                           double noise, uint64_t seed) {
  if (clusters < 2) raise(Err::ConfigInvalid, "clusters must be >= 2");
  if (per_cluster < 4) raise(Err::ConfigInvalid, "per_cluster must be >= 4");
  if (dim < 1) raise(Err::ConfigInvalid, "dim must be >= 1");
  if (noise < 0.0) raise(Err::ConfigInvalid, "noise must be >= 0");

  Rng rng(seed, kStreamSynthetic);
  const size_t n = clusters * per_cluster;

  const auto draw_centers = [&]() {
    std::vector<double> centers(clusters * dim);
    for (size_t c = 0; c < clusters; ++c) {
      double norm2 = 0.0;
      for (size_t j = 0; j < dim; ++j) {
        const double v = rng.gaussian();
        centers[c * dim + j] = v;
        norm2 += v * v;
      }
      const double inv = 1.0 / std::sqrt(norm2);
      for (size_t j = 0; j < dim; ++j) centers[c * dim + j] *= inv;
    }
    return centers;
  };
  const std::vector<double> vision_centers = draw_centers();
  const std::vector<double> text_centers = draw_centers();

  Dataset d;
  d.vision.count = d.text.count = n;
  d.vision.dim = d.text.dim = static_cast<uint32_t>(dim);
  d.vision.values.resize(n * dim);
  d.text.values.resize(n * dim);
  d.labels.count = n;
  d.labels.categories = static_cast<uint32_t>(clusters);
  d.labels.words.assign(n * d.labels.words_per_row(), 0);

  const auto fill_item = [&](std::vector<float>& out, const std::vector<double>& centers,
                             size_t item, size_t cluster) {
    for (size_t j = 0; j < dim; ++j) {
      const double v = centers[cluster * dim + j] + noise * rng.gaussian();
      out[item * dim + j] = static_cast<float>(v);
    }
  };

  for (size_t c = 0; c < clusters; ++c) {
    for (size_t t = 0; t < per_cluster; ++t) {
      const size_t item = c * per_cluster + t;
      fill_item(d.vision.values, vision_centers, item, c);
      fill_item(d.text.values, text_centers, item, c);
      d.labels.set(item, c);
    }
  }

  // 60/30/10 split within each cluster; items are iid so slicing is unbiased
  const size_t n_train = (per_cluster * 6) / 10;
  const size_t n_retrieval = (per_cluster * 3) / 10;
  for (size_t c = 0; c < clusters; ++c) {
    const uint64_t base = c * per_cluster;
    for (size_t t = 0; t < per_cluster; ++t) {
      const uint64_t id = base + t;
      if (t < n_train) d.split.train_ids.push_back(id);
      else if (t < n_train + n_retrieval) d.split.retrieval_ids.push_back(id);
      else d.split.query_ids.push_back(id);
    }
  }
  return d;
}

}  // namespace mmhash
