// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failures. Criteria 6-10 drive the real CLI binary end to end; the rest
// exercise the library against independent oracles.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "finite_diff.hpp"
#include "mmhash/codes.hpp"
#include "mmhash/dataio.hpp"
#include "mmhash/errors.hpp"
#include "mmhash/eval.hpp"
#include "mmhash/loss.hpp"
#include "mmhash/rng.hpp"
#include "mmhash/trainer.hpp"
#include "oracle_map.hpp"

using namespace mmhash;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("[%s] C%d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

Mat random_h(size_t b, size_t k, Rng& rng, double lo = -0.9, double hi = 0.9) {
  Mat h(b, k);
  for (double& v : h.a) v = rng.uniform(lo, hi);
  return h;
}

Mat random_phi(size_t w, Rng& rng) {
  Mat phi(w, w);
  for (double& v : phi.a) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
  return phi;
}

PackedCode random_code(uint32_t k, Rng& rng) {
  PackedCode c;
  c.bits = k;
  c.words.assign((k + 63) / 64, 0);
  for (uint32_t j = 0; j < k; ++j)
    if (rng.uniform() < 0.5) c.words[j / 64] |= uint64_t{1} << (j % 64);
  return c;
}

// ---------------------------------------------------------------------------
// C1: loss gradients vs central finite differences
// ---------------------------------------------------------------------------

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1001);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Mat h = random_h(8, 8, rng);
    const double lambda = trial % 2 == 0 ? 0.5 : 0.25;
    const Mat phi = random_phi(pair_window(lambda, 8), rng);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.lambda = lambda;
    cfg.delta = trial % 3 == 0 ? 2.0 : 1.0;
    cfg.mu = 0.1;

    const auto [m_val, m_grad] = metric_loss(h, phi, cfg.delta, lambda);
    const Mat m_fd = testutil::fd_grad_mat(
        h, [&](const Mat& x) { return metric_loss(x, phi, cfg.delta, lambda).first; });
    worst = std::max(worst, testutil::max_rel_err(m_grad.a, m_fd.a));

    const auto [q_val, q_grad] = quantization_loss(h, lambda);
    const Mat q_fd = testutil::fd_grad_mat(
        h, [&](const Mat& x) { return quantization_loss(x, lambda).first; });
    worst = std::max(worst, testutil::max_rel_err(q_grad.a, q_fd.a));

    const LossBreakdown lb = total_loss(h, phi, cfg);
    const Mat t_fd = testutil::fd_grad_mat(
        h, [&](const Mat& x) { return total_loss(x, phi, cfg).total; });
    worst = std::max(worst, testutil::max_rel_err(lb.grad_h.a, t_fd.a));
  }
  const double secs = seconds_since(t0);
  report(1, worst < 1e-4 && secs < 10.0,
         fmt("loss grad_h vs finite differences, 20 instances: max rel err %.2e "
             "(< 1e-4), %.2f s (< 10 s)", worst, secs));
}

// ---------------------------------------------------------------------------
// C2: end-to-end parameter gradients vs finite differences
// ---------------------------------------------------------------------------

void criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  const Variant variants[] = {Variant::full, Variant::concat_only, Variant::vision_only,
                              Variant::text_only};
  for (int trial = 0; trial < 12; ++trial) {
    Rng rng(2000 + trial);
    ModelParams params = init_params(8, 4, 2000 + trial);
    params.variant = variants[trial % 4];
    for (double& v : params.b_f) v = rng.uniform(-0.3, 0.3);
    for (double& v : params.b_h) v = rng.uniform(-0.3, 0.3);

    Mat vision(4, 4), text(4, 4);
    for (double& v : vision.a) v = rng.uniform(-1.0, 1.0);
    for (double& v : text.a) v = rng.uniform(-1.0, 1.0);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.lambda = 0.5;
    cfg.mu = 0.05;
    const Mat phi = random_phi(2, rng);

    const auto loss_for = [&](const ModelParams& p) {
      return total_loss(forward_batch(vision, text, p).h, phi, cfg).total;
    };

    const BatchActivations acts = forward_batch(vision, text, params);
    const LossBreakdown lb = total_loss(acts.h, phi, cfg);
    const ParamTensors g = backward_batch(acts, lb.grad_h, params);

    const auto check = [&](const std::vector<double>& analytic,
                           const std::function<void(ModelParams&, const std::vector<double>&)>&
                               assign,
                           const std::vector<double>& current) {
      const std::vector<double> fd =
          testutil::fd_grad_vec(current, [&](const std::vector<double>& x) {
            ModelParams p = params;
            assign(p, x);
            return loss_for(p);
          });
      worst = std::max(worst, testutil::max_rel_err(analytic, fd));
    };
    check(g.w_f.a, [](ModelParams& p, const std::vector<double>& x) { p.w_f.a = x; },
          params.w_f.a);
    check(g.b_f, [](ModelParams& p, const std::vector<double>& x) { p.b_f = x; },
          params.b_f);
    check(g.w_h.a, [](ModelParams& p, const std::vector<double>& x) { p.w_h.a = x; },
          params.w_h.a);
    check(g.b_h, [](ModelParams& p, const std::vector<double>& x) { p.b_h = x; },
          params.b_h);
  }
  const double secs = seconds_since(t0);
  report(2, worst < 1e-4 && secs < 30.0,
         fmt("backward_batch vs finite differences through forward+loss, 12 instances "
             "(all variants): max rel err %.2e (< 1e-4), %.2f s (< 30 s)", worst, secs));
}

// ---------------------------------------------------------------------------
// C3: worked loss value oracles
// ---------------------------------------------------------------------------

void criterion_3() {
  double worst = 0.0;

  Mat h1(2, 2);
  h1(0, 0) = 1.0;
  h1(1, 1) = 1.0;
  worst = std::max(worst,
                   std::abs(metric_loss(h1, Mat(1, 1, 1.0), 1.0, 0.5).first - std::log(2.0)));

  const Mat h2(2, 2, 1.0);
  worst = std::max(worst, std::abs(metric_loss(h2, Mat(1, 1, 0.0), 1.0, 0.5).first -
                                   std::log(1.0 + std::exp(2.0))));

  Mat h3(1, 4);
  h3(0, 0) = 0.5;
  h3(0, 1) = -0.5;
  h3(0, 2) = 0.5;
  h3(0, 3) = 0.5;
  worst = std::max(worst, std::abs(quantization_loss(h3, 1.0).first - 1.0));

  const Mat h4(1, 16);
  worst = std::max(worst, std::abs(quantization_loss(h4, 1.0).first - 4.0));

  report(3, worst < 1e-9,
         fmt("worked loss values (ln 2, ln(1+e^2), 1.0, sqrt(16)): max abs err %.2e "
             "(< 1e-9)", worst));
}

// ---------------------------------------------------------------------------
// C4: packed Hamming vs per-bit loop
// ---------------------------------------------------------------------------

void criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(4001);
  size_t mismatches = 0;
  for (uint32_t k : {16u, 32u, 64u, 128u}) {
    for (int trial = 0; trial < 10000; ++trial) {
      const PackedCode a = random_code(k, rng);
      const PackedCode b = random_code(k, rng);
      uint32_t naive = 0;
      for (uint32_t j = 0; j < k; ++j) naive += a.get(j) != b.get(j);
      if (hamming_distance(a, b) != naive) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  report(4, mismatches == 0 && secs < 5.0,
         fmt("packed popcount vs per-bit loop, 10^4 pairs at k in {16,32,64,128}: "
             "%zu mismatches (= 0), %.2f s (< 5 s)", mismatches, secs));
}

// ---------------------------------------------------------------------------
// C5: engine mAP vs brute-force oracle
// ---------------------------------------------------------------------------

void criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(5001);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const uint32_t k = trial % 2 == 0 ? 16 : 32;
    LabelMatrix labels;
    labels.count = 250;
    labels.categories = 8;
    labels.words.assign(250, 0);
    for (size_t i = 0; i < 250; ++i) {
      labels.set(i, rng.below(8));
      for (uint32_t c = 0; c < 8; ++c)
        if (rng.uniform() < 0.25) labels.set(i, c);
    }
    std::vector<std::pair<uint64_t, PackedCode>> db, queries;
    for (uint64_t id = 0; id < 200; ++id) db.emplace_back(id, random_code(k, rng));
    for (uint64_t id = 200; id < 250; ++id) queries.emplace_back(id, random_code(k, rng));

    const double engine =
        mean_average_precision(queries, labels, build_index(db), labels).map;
    const double oracle = testutil::oracle_map(queries, labels, db, labels);
    worst = std::max(worst, std::abs(engine - oracle));
  }
  const double secs = seconds_since(t0);
  report(5, worst < 1e-9 && secs < 10.0,
         fmt("engine mAP vs brute-force oracle, 20 instances (200 db, 50 queries): "
             "max abs err %.2e (< 1e-9), %.2f s (< 10 s)", worst, secs));
}

// ---------------------------------------------------------------------------
// C6-C10: the CLI pipeline on the seeded synthetic dataset
// ---------------------------------------------------------------------------

struct PipelineArtifacts {
  fs::path dir;
  fs::path checkpoint;
  fs::path log_csv;
  fs::path db_codes;
  fs::path query_codes;
  fs::path eval_csv;
  double map = -1.0;
  double seconds = 0.0;
  bool ok = false;
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MMHASH_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// gen-synth -> train (k=16, defaults) -> encode both splits -> eval.
PipelineArtifacts run_pipeline(const fs::path& dir) {
  PipelineArtifacts art;
  art.dir = dir;
  fs::create_directories(dir);
  const fs::path data = dir / "data";
  art.checkpoint = dir / "model.ckpt";
  art.log_csv = dir / "train_log.csv";
  art.db_codes = dir / "db.codes";
  art.query_codes = dir / "query.codes";
  art.eval_csv = dir / "eval.csv";

  const auto t0 = std::chrono::steady_clock::now();
  if (run_cli("gen-synth --clusters 4 --per-cluster 100 --dim 32 --noise 0.1 --seed 42 "
              "--out " + data.string()) != 0)
    return art;
  const std::string base = " --vision " + (data / "vision.emb").string() + " --text " +
                           (data / "text.emb").string();
  if (run_cli("train" + base + " --labels " + (data / "labels.lbl").string() +
              " --manifest " + (data / "manifest.txt").string() +
              " --vision-dim 32 --text-dim 32 --bits 16 --eval-per-epoch --out " +
              art.checkpoint.string() + " --log " + art.log_csv.string()) != 0)
    return art;
  for (const auto& [split, out] :
       {std::pair<std::string, fs::path>{"retrieval", art.db_codes},
        {"query", art.query_codes}}) {
    if (run_cli("encode --checkpoint " + art.checkpoint.string() + base + " --manifest " +
                (data / "manifest.txt").string() + " --split " + split + " --out " +
                out.string()) != 0)
      return art;
  }

  const std::string eval_out = (dir / "eval_stdout.txt").string();
  const std::string cmd = std::string(MMHASH_CLI_PATH) + " eval --query-codes " +
                          art.query_codes.string() + " --query-labels " +
                          (data / "labels.lbl").string() + " --db-codes " +
                          art.db_codes.string() + " --db-labels " +
                          (data / "labels.lbl").string() + " --out-csv " +
                          art.eval_csv.string() + " >" + eval_out + " 2>/dev/null";
  if (std::system(cmd.c_str()) != 0) return art;
  art.seconds = seconds_since(t0);

  const std::string summary = read_file(eval_out);
  if (summary.rfind("map=", 0) != 0) return art;
  art.map = std::stod(summary.substr(4));
  art.ok = true;
  return art;
}

struct LogRow {
  double loss_total = 0.0;
  double map = -1.0;
};

std::vector<LogRow> parse_log(const fs::path& csv) {
  std::vector<LogRow> rows;
  std::ifstream is(csv);
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string cell;
    LogRow row;
    for (int col = 0; std::getline(ss, cell, ','); ++col) {
      if (col == 1) row.loss_total = std::stod(cell);
      if (col == 4 && !cell.empty()) row.map = std::stod(cell);
    }
    rows.push_back(row);
  }
  return rows;
}

void criteria_6_to_10(const fs::path& scratch) {
  const PipelineArtifacts art = run_pipeline(scratch / "run1");

  // C6: end-to-end retrieval quality
  if (!art.ok) {
    report(6, false, "pipeline run failed before eval");
  } else {
    report(6, art.map >= 0.95 && art.seconds < 120.0,
           fmt("gen-synth -> train(k=16, defaults) -> encode -> eval: mAP %.4f "
               "(>= 0.95), %.1f s (< 120 s)", art.map, art.seconds));
  }

  // C7: convergence properties from the training log
  if (!art.ok) {
    report(7, false, "no training log to check");
  } else {
    const std::vector<LogRow> rows = parse_log(art.log_csv);
    const int n = static_cast<int>(rows.size());
    bool have_maps = n > 0;
    for (const LogRow& r : rows) have_maps = have_maps && r.map >= 0.0;

    const auto ma = [&](int e) {  // 5-epoch moving average ending at epoch e (1-based)
      double s = 0.0;
      for (int i = e - 4; i <= e; ++i) s += rows[i - 1].loss_total;
      return s / 5.0;
    };
    int violations = 0;
    double worst_violation = 0.0;
    for (int e = 5; e < n; ++e) {
      const double cur = ma(e), next = ma(e + 1);
      if (next > cur) {
        ++violations;
        worst_violation = std::max(worst_violation, (next - cur) / cur);
      }
    }
    double running_max = 0.0, worst_drop = 0.0;
    for (int e = 1; e <= n; ++e) {
      const double m = rows[e - 1].map;
      if (e > 10) worst_drop = std::max(worst_drop, running_max - m);
      running_max = std::max(running_max, m);
    }
    const bool ma_ok = violations <= 1 && worst_violation <= 0.02;
    const bool map_ok = worst_drop <= 0.02;
    report(7, have_maps && ma_ok && map_ok,
           fmt("5-epoch loss moving average: %d violations (<= 1), worst %.2f%% "
               "(<= 2%%); mAP drop after epoch 10: %.4f (<= 0.02)",
               violations, 100.0 * worst_violation, worst_drop));
  }

  // C8: quantization effect, paired seeded runs (library path)
  {
    const Dataset data = generate_synthetic(4, 100, 32, 0.1, 42);
    TrainConfig cfg;
    cfg.code_bits = 16;
    cfg.vision_dim = 32;
    cfg.text_dim = 32;
    cfg.seed = 42;

    const auto mean_gap = [&](const ModelParams& p) {
      const auto codes_for = data.split.train_ids;
      const size_t d = p.input_dim, k = p.code_bits;
      Vec vrow(data.vision.dim), trow(data.text.dim), z_c(d), z_f(d), gate(d), h(k);
      double sum = 0.0;
      for (uint64_t id : codes_for) {
        const auto v = data.vision.row(id);
        const auto t = data.text.row(id);
        for (size_t j = 0; j < vrow.size(); ++j) vrow[j] = v[j];
        for (size_t j = 0; j < trow.size(); ++j) trow[j] = t[j];
        concat_features(vrow, trow, p.variant, z_c);
        forward_gate(z_c, p, z_f, gate);
        forward_hash(z_f, p, h);
        double norm2 = 0.0;
        for (double x : h) {
          const double gap = std::abs(x) - 1.0;
          norm2 += gap * gap;
        }
        sum += std::sqrt(norm2) / std::sqrt(static_cast<double>(k));
      }
      return sum / static_cast<double>(codes_for.size());
    };

    const TrainResult with_mu = train(data, cfg);
    TrainConfig cfg0 = cfg;
    cfg0.mu = 0.0;
    const TrainResult without_mu = train(data, cfg0);
    const double gap_mu = mean_gap(with_mu.params);
    const double gap_0 = mean_gap(without_mu.params);
    report(8, gap_mu < gap_0 && gap_mu < 0.2,
           fmt("final mean ||(|h|-1)||_2/sqrt(k): %.4f with mu=0.01 vs %.4f with mu=0 "
               "(strictly smaller, and < 0.2)", gap_mu, gap_0));
  }

  // C9: ablation grid over 4 variants x 4 widths
  {
    const fs::path dir = scratch / "ablate";
    fs::create_directories(dir);
    const fs::path data = scratch / "run1" / "data";
    const fs::path csv = dir / "ablation.csv";
    const int rc = run_cli("ablate --vision " + (data / "vision.emb").string() + " --text " +
                           (data / "text.emb").string() + " --labels " +
                           (data / "labels.lbl").string() + " --manifest " +
                           (data / "manifest.txt").string() +
                           " --vision-dim 32 --text-dim 32 --bits-list 16,32,64,128 --out " +
                           csv.string());
    if (rc != 0) {
      report(9, false, "ablate command failed");
    } else {
      std::ifstream is(csv);
      std::string line;
      std::getline(is, line);  // header
      std::vector<std::vector<double>> grid;
      while (std::getline(is, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');  // variant name
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        grid.push_back(row);
      }
      bool shape_ok = grid.size() == 4;
      bool range_ok = true;
      for (const auto& row : grid) {
        shape_ok = shape_ok && row.size() == 4;
        for (double cell : row) range_ok = range_ok && cell >= 0.0 && cell <= 1.0;
      }
      bool full_near_best = shape_ok;
      double worst_gap = 0.0;
      if (shape_ok) {
        for (size_t bi = 0; bi < 4; ++bi) {
          double best = 0.0;
          for (size_t vi = 0; vi < 4; ++vi) best = std::max(best, grid[vi][bi]);
          const double gap = best - grid[3][bi];  // row 3 = full
          worst_gap = std::max(worst_gap, gap);
          full_near_best = full_near_best && gap <= 0.05;
        }
      }
      report(9, shape_ok && range_ok && full_near_best,
             fmt("ablation grid 4 variants x 4 widths, cells in [0,1]; full variant "
                 "within %.4f of the best (<= 0.05)", worst_gap));
    }
  }

  // C10: byte-identical artifacts on a re-run with the same seed
  {
    const PipelineArtifacts rerun = run_pipeline(scratch / "run2");
    if (!art.ok || !rerun.ok) {
      report(10, false, "pipeline re-run failed");
    } else {
      const bool ckpt_same = read_file(art.checkpoint) == read_file(rerun.checkpoint);
      const bool db_same = read_file(art.db_codes) == read_file(rerun.db_codes);
      const bool query_same = read_file(art.query_codes) == read_file(rerun.query_codes);
      const bool eval_same = read_file(art.eval_csv) == read_file(rerun.eval_csv);
      report(10, ckpt_same && db_same && query_same && eval_same,
             fmt("re-run with seed 42: checkpoint %s, db codes %s, query codes %s, "
                 "eval CSV %s",
                 ckpt_same ? "identical" : "DIFFERS", db_same ? "identical" : "DIFFERS",
                 query_same ? "identical" : "DIFFERS",
                 eval_same ? "identical" : "DIFFERS"));
    }
  }
}

}  // namespace

int main() {
  const fs::path scratch =
      fs::temp_directory_path() / ("mmhash_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(scratch);

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criteria_6_to_10(scratch);

  std::error_code ec;
  fs::remove_all(scratch, ec);

  std::printf("%d/10 criteria passed\n", 10 - g_failures);
  return g_failures;
}
