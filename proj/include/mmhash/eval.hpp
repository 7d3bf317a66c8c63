#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "mmhash/codes.hpp"
#include "mmhash/config.hpp"
#include "mmhash/dataio.hpp"
#include "mmhash/trainer.hpp"

namespace mmhash {

/// Retrieval quality over a query set. map is the arithmetic mean of
/// per_query_ap; queries with no relevant item in the retrieval set are
/// excluded from the mean and counted in skipped_queries.
struct EvalResult {
  double map = 0.0;
  std::vector<double> per_query_ap;   // APs of the included queries, query order
  std::vector<uint64_t> query_ids;    // parallel to per_query_ap
  size_t num_queries = 0;             // included queries
  size_t skipped_queries = 0;         // queries with zero relevant items
  size_t retrieval_size = 0;
  uint32_t bits = 0;
};

/// Ground-truth relevance: 1 iff the label sets intersect. Deliberately the
/// same convention as the training similarity indicator.
int relevance(std::span<const uint64_t> query_labels,
              std::span<const uint64_t> item_labels);

/// AP = 1/R * sum over relevant positions p of precision@p, with R =
/// total_relevant; 0 when R = 0. The list's 1-count must equal R.
double average_precision(std::span<const uint8_t> ranked_relevance,
                         size_t total_relevant);

/// Hamming-ranked mAP: each query is ranked against the index (distance, id),
/// relevance comes from the label matrices, queries with R = 0 are skipped.
EvalResult mean_average_precision(
    const std::vector<std::pair<uint64_t, PackedCode>>& queries,
    const LabelMatrix& query_labels, const CodeIndex& index,
    const LabelMatrix& db_labels);

/// Trains and evaluates one model per (variant, code width) cell with
/// identical seeds; rows follow the ablation table order.
struct AblationReport {
  std::vector<Variant> variants;
  std::vector<int> bit_widths;
  Mat map_grid;  // variants x bit_widths
};

AblationReport ablation_report(const Dataset& data, const TrainConfig& base,
                               const std::vector<int>& bit_widths);

/// Per-epoch mAP hook for the trainer: encodes the retrieval and query splits
/// with the current params and evaluates.
EvalCallback make_map_callback(const Dataset& data);

/// `query_id,ap` rows plus a final `map,<value>` summary line.
void write_eval_csv(const EvalResult& result, const std::filesystem::path& path);

/// Grid CSV: header `variant,<bits...>`, one row per variant.
void write_ablation_csv(const AblationReport& report, const std::filesystem::path& path);

}  // namespace mmhash
