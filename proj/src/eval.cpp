#include "mmhash/eval.hpp"

#include <cmath>
#include <sstream>

#include "mmhash/binio.hpp"
#include "mmhash/errors.hpp"
#include "mmhash/threads.hpp"

namespace mmhash {

int relevance(std::span<const uint64_t> query_labels,
              std::span<const uint64_t> item_labels) {
  return labels_intersect(query_labels, item_labels);
}

double average_precision(std::span<const uint8_t> ranked_relevance,
                         size_t total_relevant) {
  size_t ones = 0;
  for (uint8_t r : ranked_relevance) ones += r != 0;
  if (ones != total_relevant)
    raise(Err::RelevantCountMismatch,
          "ranking holds " + std::to_string(ones) + " relevant items, expected " +
              std::to_string(total_relevant));
  if (total_relevant == 0) return 0.0;

  double sum = 0.0;
  size_t hits = 0;
  for (size_t p = 0; p < ranked_relevance.size(); ++p) {
    if (ranked_relevance[p]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(p + 1);
    }
  }
  return sum / static_cast<double>(total_relevant);
}

EvalResult mean_average_precision(
    const std::vector<std::pair<uint64_t, PackedCode>>& queries,
    const LabelMatrix& query_labels, const CodeIndex& index,
    const LabelMatrix& db_labels) {
  for (uint64_t id : index.ids)
    if (id >= db_labels.count)
      raise(Err::IdOutOfRange, "retrieval id " + std::to_string(id) +
                                   " >= db label count " + std::to_string(db_labels.count));
  for (const auto& [qid, qcode] : queries) {
    if (qid >= query_labels.count)
      raise(Err::IdOutOfRange, "query id " + std::to_string(qid) +
                                   " >= query label count " +
                                   std::to_string(query_labels.count));
    if (index.size() != 0 && qcode.bits != index.bits)
      raise(Err::WidthMismatch, "query code width " + std::to_string(qcode.bits) +
                                    " != index width " + std::to_string(index.bits));
  }

  EvalResult out;
  out.retrieval_size = index.size();
  out.bits = index.bits;

  // slot per query; NaN marks a query with no relevant item
  std::vector<double> ap(queries.size());
  parallel_for(queries.size(), [&](size_t qi) {
    const auto& [qid, qcode] = queries[qi];
    const auto qlab = query_labels.row(qid);
    const std::vector<SearchHit> ranked = search(index, qcode);
    std::vector<uint8_t> rel(ranked.size());
    size_t total_relevant = 0;
    for (size_t p = 0; p < ranked.size(); ++p) {
      rel[p] = static_cast<uint8_t>(relevance(qlab, db_labels.row(ranked[p].id)));
      total_relevant += rel[p];
    }
    ap[qi] = total_relevant == 0 ? std::nan("")
                                 : average_precision(rel, total_relevant);
  });

  double sum = 0.0;
  for (size_t qi = 0; qi < queries.size(); ++qi) {
    if (std::isnan(ap[qi])) {
      ++out.skipped_queries;
      continue;
    }
    out.per_query_ap.push_back(ap[qi]);
    out.query_ids.push_back(queries[qi].first);
    sum += ap[qi];
  }
  out.num_queries = out.per_query_ap.size();
  if (out.num_queries == 0)
    raise(Err::ZeroQueries, "no query has a relevant item in the retrieval set");
  out.map = sum / static_cast<double>(out.num_queries);
  return out;
}

EvalCallback make_map_callback(const Dataset& data) {
  return [&data](const ModelParams& params) {
    const auto db_codes =
        encode_items(params, data.vision, data.text, data.split.retrieval_ids);
    const auto query_codes =
        encode_items(params, data.vision, data.text, data.split.query_ids);
    const CodeIndex index = build_index(db_codes);
    return mean_average_precision(query_codes, data.labels, index, data.labels).map;
  };
}

AblationReport ablation_report(const Dataset& data, const TrainConfig& base,
                               const std::vector<int>& bit_widths) {
  AblationReport report;
  report.variants = {Variant::text_only, Variant::vision_only, Variant::concat_only,
                     Variant::full};
  report.bit_widths = bit_widths;
  report.map_grid = Mat(report.variants.size(), bit_widths.size());

  for (size_t vi = 0; vi < report.variants.size(); ++vi) {
    for (size_t bi = 0; bi < bit_widths.size(); ++bi) {
      TrainConfig cfg = base;
      cfg.variant = report.variants[vi];
      cfg.code_bits = bit_widths[bi];
      validate(cfg);
      const TrainResult result = train(data, cfg);
      const auto db_codes = encode_items(result.params, data.vision, data.text,
                                         data.split.retrieval_ids);
      const auto query_codes = encode_items(result.params, data.vision, data.text,
                                            data.split.query_ids);
      const EvalResult er = mean_average_precision(query_codes, data.labels,
                                                   build_index(db_codes), data.labels);
      report.map_grid(vi, bi) = er.map;
    }
  }
  return report;
}

void write_eval_csv(const EvalResult& result, const std::filesystem::path& path) {
  atomic_write_file(path, [&](std::ostream& os) {
    std::ostringstream ss;
    ss.precision(12);
    ss << "query_id,ap\n";
    for (size_t i = 0; i < result.per_query_ap.size(); ++i)
      ss << result.query_ids[i] << ',' << result.per_query_ap[i] << "\n";
    ss << "map," << result.map << "\n";
    os << ss.str();
  });
}

void write_ablation_csv(const AblationReport& report, const std::filesystem::path& path) {
  atomic_write_file(path, [&](std::ostream& os) {
    std::ostringstream ss;
    ss.precision(12);
    ss << "variant";
    for (int b : report.bit_widths) ss << ',' << b;
    ss << "\n";
    for (size_t vi = 0; vi < report.variants.size(); ++vi) {
      ss << variant_name(report.variants[vi]);
      for (size_t bi = 0; bi < report.bit_widths.size(); ++bi)
        ss << ',' << report.map_grid(vi, bi);
      ss << "\n";
    }
    os << ss.str();
  });
}

}  // namespace mmhash
