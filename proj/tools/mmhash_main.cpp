// mmhash: train gated-fusion hash models on precomputed embeddings, emit
// binary codes, and run Hamming-ranked retrieval with mAP evaluation.

#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmhash/binio.hpp"
#include "mmhash/codes.hpp"
#include "mmhash/config.hpp"
#include "mmhash/dataio.hpp"
#include "mmhash/errors.hpp"
#include "mmhash/eval.hpp"
#include "mmhash/trainer.hpp"

namespace fs = std::filesystem;
using namespace mmhash;

namespace {

int exit_code_for(Err code) {
  switch (code) {
    case Err::NumericFailure:
      return 3;
    default:
      return 2;  // data / file errors
  }
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

// Dataset flags shared by train / ablate / encode.
struct DataArgs {
  std::string vision;
  std::string text;
  std::string labels;
  std::string manifest;

  void add_to(CLI::App* cmd, bool with_labels = true) {
    cmd->add_option("--vision", vision, "Vision embeddings (.emb)")->required();
    cmd->add_option("--text", text, "Text embeddings (.emb)")->required();
    if (with_labels)
      cmd->add_option("--labels", labels, "Multi-hot labels (.lbl)")->required();
    cmd->add_option("--manifest", manifest, "Split manifest (train/retrieval/query ids)")
        ->required();
  }

  Dataset load() const { return load_dataset(vision, text, labels, manifest); }
};

// Hyperparameter flags layered over an optional config file. Flags win over
// the file; the file wins over built-in defaults.
struct ConfigArgs {
  std::string config_path;
  int bits = 0;
  int batch = 0;
  double lambda = 0.0;
  double delta = 0.0;
  double mu = 0.0;
  double lr = 0.0;
  int epochs = 0;
  uint64_t seed = 0;
  int vision_dim = 0;
  int text_dim = 0;
  std::string variant;

  CLI::App* cmd = nullptr;

  void add_to(CLI::App* c) {
    cmd = c;
    const TrainConfig d;  // built-in defaults, shown in --help
    cmd->add_option("--config", config_path, "Config file (key = value lines)");
    cmd->add_option("--bits", bits, "Hash code width k")->default_val(d.code_bits);
    cmd->add_option("--batch", batch, "Mini-batch size b")->default_val(d.batch_size);
    cmd->add_option("--lambda", lambda, "Index-window fraction (lambda*b integral)")
        ->default_val(d.lambda);
    cmd->add_option("--delta", delta, "Weight of the softplus term in the metric loss")
        ->default_val(d.delta);
    cmd->add_option("--mu", mu, "Quantization loss weight")->default_val(d.mu);
    cmd->add_option("--lr", lr, "Learning rate")->default_val(d.learning_rate);
    cmd->add_option("--epochs", epochs, "Training epochs")->default_val(d.epochs);
    cmd->add_option("--seed", seed, "Seed for all randomness")->default_val(d.seed);
    cmd->add_option("--vision-dim", vision_dim, "Vision embedding width")
        ->default_val(d.vision_dim);
    cmd->add_option("--text-dim", text_dim, "Text embedding width")->default_val(d.text_dim);
    cmd->add_option("--variant", variant, "Forward variant")
        ->default_val("full")
        ->check(CLI::IsMember({"full", "concat-only", "concat_only", "vision-only",
                               "vision_only", "text-only", "text_only"}));
  }

  /// File (if given) over defaults, then explicit flags over the file.
  /// Returns the validated config, or exits with a usage error when the flag
  /// combination violates an invariant.
  TrainConfig resolve(int& usage_rc) const {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    const auto passed = [&](const char* name) { return cmd->count(name) > 0; };
    if (passed("--bits")) cfg.code_bits = bits;
    if (passed("--batch")) cfg.batch_size = batch;
    if (passed("--lambda")) cfg.lambda = lambda;
    if (passed("--delta")) cfg.delta = delta;
    if (passed("--mu")) cfg.mu = mu;
    if (passed("--lr")) cfg.learning_rate = lr;
    if (passed("--epochs")) cfg.epochs = epochs;
    if (passed("--seed")) cfg.seed = seed;
    if (passed("--vision-dim")) cfg.vision_dim = vision_dim;
    if (passed("--text-dim")) cfg.text_dim = text_dim;
    if (passed("--variant")) cfg.variant = variant_from_string(variant);
    try {
      validate(cfg);
    } catch (const Error& e) {
      std::cerr << "usage error: " << e.what() << "\n";
      usage_rc = 1;
    }
    return cfg;
  }
};

int cmd_gen_synth(size_t clusters, size_t per_cluster, size_t dim, double noise,
                  uint64_t seed, const std::string& out_dir) {
  const Dataset d = generate_synthetic(clusters, per_cluster, dim, noise, seed);
  write_dataset(d, out_dir);
  std::cerr << "wrote " << d.vision.count << " items (" << clusters << " clusters) to "
            << out_dir << "\n";
  return 0;
}

int cmd_train(const DataArgs& data_args, const ConfigArgs& cfg_args,
              const std::string& out, const std::string& log_path, bool eval_per_epoch,
              bool verbose) {
  int usage_rc = 0;
  const TrainConfig cfg = cfg_args.resolve(usage_rc);
  if (usage_rc != 0) return usage_rc;

  const Dataset data = data_args.load();
  EvalCallback eval_cb;
  if (eval_per_epoch) eval_cb = make_map_callback(data);

  EvalCallback logged_cb = eval_cb;
  if (verbose) {
    std::cerr << "training k=" << cfg.code_bits << " b=" << cfg.batch_size
              << " epochs=" << cfg.epochs << " variant=" << variant_name(cfg.variant)
              << "\n";
  }

  const TrainResult result = train(data, cfg, logged_cb);
  save_checkpoint(result.params, &result.opt, out);
  write_train_log_csv(result.log, log_path);

  if (!result.log.epochs.empty()) {
    const EpochRecord& last = result.log.epochs.back();
    std::cerr << "epochs=" << last.epoch << " final_loss=" << last.loss_total;
    if (last.map) std::cerr << " final_map=" << *last.map;
    std::cerr << "\n";
  }
  std::cerr << "checkpoint: " << out << "\nlog: " << log_path << "\n";
  return 0;
}

int cmd_encode(const std::string& checkpoint, const std::string& vision_path,
               const std::string& text_path, const std::string& manifest_path,
               const std::string& split, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const EmbeddingMatrix vision = read_embeddings(vision_path);
  const EmbeddingMatrix text = read_embeddings(text_path);

  std::vector<uint64_t> ids;
  if (!manifest_path.empty()) {
    const SplitManifest manifest = load_manifest(manifest_path);
    manifest.validate_against(vision.count);
    if (split == "train") ids = manifest.train_ids;
    else if (split == "retrieval") ids = manifest.retrieval_ids;
    else if (split == "query") ids = manifest.query_ids;
  } else {
    ids.resize(vision.count);
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  }

  const auto codes = encode_items(ckpt.params, vision, text, ids);
  const CodeIndex index = build_index(codes);
  write_codes(index, out);
  std::cerr << "encoded " << index.size() << " items at " << index.bits << " bits to "
            << out << "\n";
  return 0;
}

int cmd_search(const std::string& db_path, const std::string& query_codes_path,
               std::optional<uint64_t> query_id, size_t top_n) {
  const CodeIndex db = read_codes(db_path);

  std::vector<std::pair<uint64_t, PackedCode>> queries;
  if (query_id.has_value()) {
    bool found = false;
    for (size_t i = 0; i < db.size(); ++i) {
      if (db.ids[i] == *query_id) {
        queries.emplace_back(*query_id, db.code(i));
        found = true;
        break;
      }
    }
    if (!found)
      raise(Err::IdOutOfRange, "query id " + std::to_string(*query_id) +
                                   " not present in " + db_path);
  } else {
    const CodeIndex qfile = read_codes(query_codes_path);
    for (size_t i = 0; i < qfile.size(); ++i)
      queries.emplace_back(qfile.ids[i], qfile.code(i));
  }

  for (const auto& [qid, qcode] : queries) {
    if (queries.size() > 1) std::cout << "# query " << qid << "\n";
    const std::vector<SearchHit> hits = search(db, qcode);
    const size_t limit = std::min(top_n, hits.size());
    for (size_t r = 0; r < limit; ++r)
      std::cout << r + 1 << ',' << hits[r].id << ',' << hits[r].distance << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& query_codes_path, const std::string& query_labels_path,
             const std::string& db_codes_path, const std::string& db_labels_path,
             const std::string& out_csv) {
  const CodeIndex qfile = read_codes(query_codes_path);
  const LabelMatrix query_labels = read_labels(query_labels_path);
  const CodeIndex db = read_codes(db_codes_path);
  const LabelMatrix db_labels = read_labels(db_labels_path);

  std::vector<std::pair<uint64_t, PackedCode>> queries;
  queries.reserve(qfile.size());
  for (size_t i = 0; i < qfile.size(); ++i) queries.emplace_back(qfile.ids[i], qfile.code(i));

  const EvalResult result = mean_average_precision(queries, query_labels, db, db_labels);
  if (!out_csv.empty()) write_eval_csv(result, out_csv);

  std::cout.precision(12);
  std::cout << "map=" << result.map << "\n";
  std::cerr << "queries=" << result.num_queries << " skipped=" << result.skipped_queries
            << " retrieval_size=" << result.retrieval_size << " bits=" << result.bits
            << "\n";
  return 0;
}

int cmd_ablate(const DataArgs& data_args, const ConfigArgs& cfg_args,
               const std::vector<int>& bits, const std::string& out_csv) {
  int usage_rc = 0;
  TrainConfig cfg = cfg_args.resolve(usage_rc);
  if (usage_rc != 0) return usage_rc;

  const Dataset data = data_args.load();
  const AblationReport report = ablation_report(data, cfg, bits);
  write_ablation_csv(report, out_csv);

  std::cerr << "ablation grid (" << report.variants.size() << " variants x "
            << report.bit_widths.size() << " widths) written to " << out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmhash: learned multi-modal hashing over precomputed embeddings"};
  app.require_subcommand(1);

  // gen-synth ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic clustered dataset");
  size_t clusters = 4, per_cluster = 100, gen_dim = 32;
  double noise = 0.1;
  uint64_t gen_seed = 42;
  std::string gen_out = "synth";
  gen->add_option("--clusters", clusters, "Number of clusters")
      ->default_val(4)
      ->check(CLI::Range(size_t{2}, size_t{100000}));
  gen->add_option("--per-cluster", per_cluster, "Items per cluster")
      ->default_val(100)
      ->check(CLI::Range(size_t{4}, size_t{100000000}));
  gen->add_option("--dim", gen_dim, "Embedding width per modality")
      ->default_val(32)
      ->check(CLI::Range(size_t{1}, size_t{1000000}));
  gen->add_option("--noise", noise, "Gaussian jitter scale around each center")
      ->default_val(0.1)
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gen_seed, "Seed")->default_val(42);
  gen->add_option("--out", gen_out, "Output directory")->default_val("synth");

  // train -------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train the fusion + hash model");
  DataArgs tr_data;
  tr_data.add_to(tr);
  ConfigArgs tr_cfg;
  tr_cfg.add_to(tr);
  std::string tr_out = "model.ckpt", tr_log = "train_log.csv";
  bool tr_eval = false, tr_verbose = false;
  tr->add_option("--out", tr_out, "Checkpoint output path")->default_val("model.ckpt");
  tr->add_option("--log", tr_log, "Training log CSV path")->default_val("train_log.csv");
  tr->add_flag("--eval-per-epoch", tr_eval,
               "Compute test mAP (retrieval vs query splits) every epoch");
  tr->add_flag("--verbose", tr_verbose, "Print settings before training");

  // encode ------------------------------------------------------------------
  auto* en = app.add_subcommand("encode", "Binarize items through a trained model");
  std::string en_ckpt, en_vision, en_text, en_manifest, en_split = "all", en_out;
  en->add_option("--checkpoint", en_ckpt, "Trained checkpoint")->required();
  en->add_option("--vision", en_vision, "Vision embeddings (.emb)")->required();
  en->add_option("--text", en_text, "Text embeddings (.emb)")->required();
  en->add_option("--manifest", en_manifest, "Manifest to pick a split from");
  en->add_option("--split", en_split, "Which ids to encode")
      ->default_val("all")
      ->check(CLI::IsMember({"all", "train", "retrieval", "query"}));
  en->add_option("--out", en_out, "Output codes file")->required();

  // search ------------------------------------------------------------------
  auto* se = app.add_subcommand("search", "Rank a code file by Hamming distance");
  std::string se_db, se_queries;
  uint64_t se_query_id = 0;
  size_t se_top = 10;
  se->add_option("--db", se_db, "Database codes file")->required();
  auto* se_qc = se->add_option("--query-codes", se_queries, "Query codes file");
  auto* se_qi = se->add_option("--query-id", se_query_id, "Use this db item as the query");
  se->add_option("--top", se_top, "Print at most this many hits")->default_val(10);
  se_qc->excludes(se_qi);

  // eval --------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "Mean average precision of query codes vs a database");
  std::string ev_qc, ev_ql, ev_dc, ev_dl, ev_csv;
  ev->add_option("--query-codes", ev_qc, "Query codes file")->required();
  ev->add_option("--query-labels", ev_ql, "Query labels (.lbl)")->required();
  ev->add_option("--db-codes", ev_dc, "Database codes file")->required();
  ev->add_option("--db-labels", ev_dl, "Database labels (.lbl)")->required();
  ev->add_option("--out-csv", ev_csv, "Per-query AP CSV");

  // ablate ------------------------------------------------------------------
  auto* ab = app.add_subcommand("ablate", "Train and evaluate every variant x bit-width cell");
  DataArgs ab_data;
  ab_data.add_to(ab);
  ConfigArgs ab_cfg;
  ab_cfg.add_to(ab);
  std::vector<int> ab_bits{16, 32, 64, 128};
  std::string ab_out = "ablation.csv";
  ab->add_option("--bits-list", ab_bits, "Comma-separated code widths")
      ->delimiter(',')
      ->default_val(std::vector<int>{16, 32, 64, 128});
  ab->add_option("--out", ab_out, "Grid CSV output")->default_val("ablation.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // usage errors surface as exit 1
  }

  if (*gen)
    return run_guarded([&] {
      return cmd_gen_synth(clusters, per_cluster, gen_dim, noise, gen_seed, gen_out);
    });
  if (*tr)
    return run_guarded(
        [&] { return cmd_train(tr_data, tr_cfg, tr_out, tr_log, tr_eval, tr_verbose); });
  if (*en)
    return run_guarded([&] {
      if (!en_manifest.empty() && en_split == "all") {
        std::cerr << "usage error: --manifest requires --split\n";
        return 1;
      }
      if (en_manifest.empty() && en_split != "all") {
        std::cerr << "usage error: --split requires --manifest\n";
        return 1;
      }
      return cmd_encode(en_ckpt, en_vision, en_text, en_manifest, en_split, en_out);
    });
  if (*se)
    return run_guarded([&] {
      if (se_queries.empty() && se_qi->count() == 0) {
        std::cerr << "usage error: need --query-codes or --query-id\n";
        return 1;
      }
      std::optional<uint64_t> qid;
      if (se_qi->count() > 0) qid = se_query_id;
      return cmd_search(se_db, se_queries, qid, se_top);
    });
  if (*ev)
    return run_guarded([&] { return cmd_eval(ev_qc, ev_ql, ev_dc, ev_dl, ev_csv); });
  if (*ab)
    return run_guarded([&] { return cmd_ablate(ab_data, ab_cfg, ab_bits, ab_out); });

  return 1;
}
