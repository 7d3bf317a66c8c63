#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <string>

#include "mmhash/codes.hpp"
#include "mmhash/dataio.hpp"
#include "mmhash/trainer.hpp"
#include "test_util.hpp"

using namespace mmhash;
using testutil::TempDir;
using testutil::read_bytes;
using testutil::same_bytes;

namespace {

const std::string kCli = MMHASH_CLI_PATH;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs the CLI with the given arguments, capturing stdout/stderr.
RunResult run(const TempDir& dir, const std::string& args) {
  const std::string out_file = dir.file("stdout.txt").string();
  const std::string err_file = dir.file("stderr.txt").string();
  const std::string cmd = kCli + " " + args + " >" + out_file + " 2>" + err_file;
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_bytes(out_file);
  r.err = read_bytes(err_file);
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

/// gen-synth into dir/data and return the data directory.
std::filesystem::path gen_data(const TempDir& dir, const std::string& extra = "") {
  const auto data = dir.file("data");
  const RunResult r = run(dir, "gen-synth --clusters 3 --per-cluster 10 --dim 6 "
                               "--noise 0.1 --seed 5 --out " + q(data) + " " + extra);
  REQUIRE(r.exit_code == 0);
  return data;
}

std::string train_args(const std::filesystem::path& data) {
  return "--vision " + q(data / "vision.emb") + " --text " + q(data / "text.emb") +
         " --labels " + q(data / "labels.lbl") + " --manifest " + q(data / "manifest.txt") +
         " --vision-dim 6 --text-dim 6 --batch 18";
}

}  // namespace

TEST_CASE("gen-synth writes a loadable dataset") {
  TempDir dir("cli");
  const auto data = gen_data(dir);
  const Dataset d = load_dataset(data / "vision.emb", data / "text.emb",
                                 data / "labels.lbl", data / "manifest.txt");
  CHECK(d.vision.count == 30);
  CHECK(d.vision.dim == 6);
  CHECK(d.labels.categories == 3);
}

TEST_CASE("gen-synth is byte-identical for one seed") {
  TempDir dir("cli");
  const auto a = dir.file("a");
  const auto b = dir.file("b");
  REQUIRE(run(dir, "gen-synth --seed 11 --per-cluster 8 --out " + q(a)).exit_code == 0);
  REQUIRE(run(dir, "gen-synth --seed 11 --per-cluster 8 --out " + q(b)).exit_code == 0);
  for (const char* f : {"vision.emb", "text.emb", "labels.lbl", "manifest.txt"})
    CHECK(same_bytes(a / f, b / f));
}

TEST_CASE("gen-synth rejects per-cluster below 4 as a usage error") {
  TempDir dir("cli");
  const RunResult r = run(dir, "gen-synth --per-cluster 3 --out " + q(dir.file("x")));
  CHECK(r.exit_code == 1);
}

TEST_CASE("train writes a checkpoint and a one-row log for one epoch") {
  TempDir dir("cli");
  const auto data = gen_data(dir);
  const auto ckpt = dir.file("m.ckpt");
  const auto log = dir.file("log.csv");
  const RunResult r =
      run(dir, "train " + train_args(data) + " --bits 16 --epochs 1 --out " + q(ckpt) +
                   " --log " + q(log));
  REQUIRE(r.exit_code == 0);

  const Checkpoint c = load_checkpoint(ckpt);
  CHECK(c.params.code_bits == 16);
  CHECK(c.params.input_dim == 12);

  const std::string log_text = read_bytes(log);
  CHECK(log_text.find("epoch,loss_total") == 0);
  CHECK(std::count(log_text.begin(), log_text.end(), '\n') == 2);  // header + 1 epoch
}

TEST_CASE("train exits 2 when a data file is missing") {
  TempDir dir("cli");
  const auto data = gen_data(dir);
  const RunResult r = run(
      dir, "train --vision " + q(data / "vision.emb") + " --text " + q(data / "text.emb") +
               " --labels " + q(dir.file("missing.lbl")) + " --manifest " +
               q(data / "manifest.txt") + " --vision-dim 6 --text-dim 6 --batch 18 --out " +
               q(dir.file("m.ckpt")));
  CHECK(r.exit_code == 2);
}

TEST_CASE("train exits 1 when flags break a config invariant") {
  TempDir dir("cli");
  const auto data = gen_data(dir);
  const RunResult r = run(dir, "train " + train_args(data) + " --bits 12 --out " +
                                   q(dir.file("m.ckpt")));
  CHECK(r.exit_code == 1);
}

TEST_CASE("the variant flag lands in the checkpoint") {
  TempDir dir("cli");
  const auto data = gen_data(dir);
  const auto ckpt = dir.file("v.ckpt");
  const RunResult r =
      run(dir, "train " + train_args(data) + " --bits 16 --epochs 1 --variant concat-only "
               "--out " + q(ckpt) + " --log " + q(dir.file("l.csv")));
  REQUIRE(r.exit_code == 0);
  CHECK(load_checkpoint(ckpt).params.variant == Variant::concat_only);
}

TEST_CASE("config file values are overridden by flags") {
  TempDir dir("cli");
  const auto data = gen_data(dir);
  testutil::write_text(dir.file("t.cfg"),
                       "code_bits = 32\nepochs = 1\nvision_dim = 6\ntext_dim = 6\n"
                       "batch_size = 18\n");
  const auto ckpt = dir.file("c.ckpt");
  const RunResult r = run(dir, "train --config " + q(dir.file("t.cfg")) + " --vision " +
                                   q(data / "vision.emb") + " --text " + q(data / "text.emb") +
                                   " --labels " + q(data / "labels.lbl") + " --manifest " +
                                   q(data / "manifest.txt") + " --bits 24 --out " + q(ckpt) +
                                   " --log " + q(dir.file("c.csv")));
  REQUIRE(r.exit_code == 0);
  CHECK(load_checkpoint(ckpt).params.code_bits == 24);  // flag beat the file's 32
}

TEST_CASE("encode emits a codes file consumable by search and eval") {
  TempDir dir("cli");
  const auto data = gen_data(dir);
  const auto ckpt = dir.file("m.ckpt");
  REQUIRE(run(dir, "train " + train_args(data) + " --bits 16 --epochs 2 --out " + q(ckpt) +
                       " --log " + q(dir.file("l.csv"))).exit_code == 0);

  const auto db_codes = dir.file("db.codes");
  const auto q_codes = dir.file("q.codes");
  REQUIRE(run(dir, "encode --checkpoint " + q(ckpt) + " --vision " + q(data / "vision.emb") +
                       " --text " + q(data / "text.emb") + " --manifest " +
                       q(data / "manifest.txt") + " --split retrieval --out " + q(db_codes))
              .exit_code == 0);
  REQUIRE(run(dir, "encode --checkpoint " + q(ckpt) + " --vision " + q(data / "vision.emb") +
                       " --text " + q(data / "text.emb") + " --manifest " +
                       q(data / "manifest.txt") + " --split query --out " + q(q_codes))
              .exit_code == 0);

  const CodeIndex db = read_codes(db_codes);
  CHECK(db.bits == 16);
  CHECK(db.size() == 9);  // 3 clusters x 3 retrieval items
  const CodeIndex qc = read_codes(q_codes);
  CHECK(qc.size() == 3);

  // encoding twice is deterministic
  const auto db2 = dir.file("db2.codes");
  REQUIRE(run(dir, "encode --checkpoint " + q(ckpt) + " --vision " + q(data / "vision.emb") +
                       " --text " + q(data / "text.emb") + " --manifest " +
                       q(data / "manifest.txt") + " --split retrieval --out " + q(db2))
              .exit_code == 0);
  CHECK(same_bytes(db_codes, db2));

  // search: a db item used as its own query comes back first at distance 0
  const uint64_t probe = db.ids[0];
  const RunResult s = run(dir, "search --db " + q(db_codes) + " --query-id " +
                                   std::to_string(probe) + " --top 5");
  REQUIRE(s.exit_code == 0);
  CHECK(s.out.find("1," + std::to_string(probe) + ",0") == 0);

  // search output is stable across runs
  const RunResult s2 = run(dir, "search --db " + q(db_codes) + " --query-id " +
                                    std::to_string(probe) + " --top 5");
  CHECK(s.out == s2.out);

  // eval: parseable summary line and per-query CSV
  const RunResult e = run(dir, "eval --query-codes " + q(q_codes) + " --query-labels " +
                                   q(data / "labels.lbl") + " --db-codes " + q(db_codes) +
                                   " --db-labels " + q(data / "labels.lbl") + " --out-csv " +
                                   q(dir.file("ap.csv")));
  REQUIRE(e.exit_code == 0);
  CHECK(e.out.rfind("map=", 0) == 0);
  const double map = std::stod(e.out.substr(4));
  CHECK(map >= 0.0);
  CHECK(map <= 1.0);
  CHECK(read_bytes(dir.file("ap.csv")).find("query_id,ap\n") == 0);
}

TEST_CASE("search with a query codes file ranks every query") {
  TempDir dir("cli");
  const auto data = gen_data(dir);
  const auto ckpt = dir.file("m.ckpt");
  REQUIRE(run(dir, "train " + train_args(data) + " --bits 16 --epochs 1 --out " + q(ckpt) +
                       " --log " + q(dir.file("l.csv"))).exit_code == 0);
  const auto db_codes = dir.file("db.codes");
  const auto q_codes = dir.file("q.codes");
  REQUIRE(run(dir, "encode --checkpoint " + q(ckpt) + " --vision " + q(data / "vision.emb") +
                       " --text " + q(data / "text.emb") + " --manifest " +
                       q(data / "manifest.txt") + " --split retrieval --out " + q(db_codes))
              .exit_code == 0);
  REQUIRE(run(dir, "encode --checkpoint " + q(ckpt) + " --vision " + q(data / "vision.emb") +
                       " --text " + q(data / "text.emb") + " --manifest " +
                       q(data / "manifest.txt") + " --split query --out " + q(q_codes))
              .exit_code == 0);

  const RunResult s = run(dir, "search --db " + q(db_codes) + " --query-codes " + q(q_codes) +
                                   " --top 100");
  REQUIRE(s.exit_code == 0);
  CHECK(std::count(s.out.begin(), s.out.end(), '\n') == 3 * 9 + 3);  // 3 blocks + headers

  // top_n larger than the db prints the whole db (9 rows per query)
  CHECK(s.out.find("# query") != std::string::npos);
}

TEST_CASE("a width mismatch between query and db codes exits 2") {
  TempDir dir("cli");
  const auto data = gen_data(dir);
  const auto ck16 = dir.file("m16.ckpt");
  const auto ck32 = dir.file("m32.ckpt");
  REQUIRE(run(dir, "train " + train_args(data) + " --bits 16 --epochs 1 --out " + q(ck16) +
                       " --log " + q(dir.file("a.csv"))).exit_code == 0);
  REQUIRE(run(dir, "train " + train_args(data) + " --bits 32 --epochs 1 --out " + q(ck32) +
                       " --log " + q(dir.file("b.csv"))).exit_code == 0);

  const auto db16 = dir.file("db16.codes");
  const auto q32 = dir.file("q32.codes");
  REQUIRE(run(dir, "encode --checkpoint " + q(ck16) + " --vision " + q(data / "vision.emb") +
                       " --text " + q(data / "text.emb") + " --manifest " +
                       q(data / "manifest.txt") + " --split retrieval --out " + q(db16))
              .exit_code == 0);
  REQUIRE(run(dir, "encode --checkpoint " + q(ck32) + " --vision " + q(data / "vision.emb") +
                       " --text " + q(data / "text.emb") + " --manifest " +
                       q(data / "manifest.txt") + " --split query --out " + q(q32))
              .exit_code == 0);

  const RunResult e = run(dir, "eval --query-codes " + q(q32) + " --query-labels " +
                                   q(data / "labels.lbl") + " --db-codes " + q(db16) +
                                   " --db-labels " + q(data / "labels.lbl"));
  CHECK(e.exit_code == 2);
}

TEST_CASE("ablate emits one row per variant") {
  TempDir dir("cli");
  const auto data = gen_data(dir);
  const auto csv = dir.file("abl.csv");
  const RunResult r = run(dir, "ablate " + train_args(data) +
                                   " --epochs 1 --bits-list 16 --out " + q(csv));
  REQUIRE(r.exit_code == 0);

  const std::string text = read_bytes(csv);
  CHECK(text.find("variant,16\n") == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);  // header + 4 variants
  for (const char* v : {"text_only", "vision_only", "concat_only", "full"})
    CHECK(text.find(v) != std::string::npos);

  // deterministic across runs
  const auto csv2 = dir.file("abl2.csv");
  REQUIRE(run(dir, "ablate " + train_args(data) + " --epochs 1 --bits-list 16 --out " +
                       q(csv2)).exit_code == 0);
  CHECK(same_bytes(csv, csv2));
}

TEST_CASE("every subcommand documents its flags") {
  TempDir dir("cli");
  for (const char* sub : {"gen-synth", "train", "encode", "search", "eval", "ablate"}) {
    const RunResult r = run(dir, std::string(sub) + " --help");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("--") != std::string::npos);
  }
  // train --help shows the built-in defaults
  const RunResult t = run(dir, "train --help");
  CHECK(t.out.find("--bits") != std::string::npos);
  CHECK(t.out.find("--mu") != std::string::npos);
}

TEST_CASE("failed writes leave no partial artifacts behind") {
  TempDir dir("cli");
  const auto data = gen_data(dir);
  // missing labels file: nothing should be created at the checkpoint path
  const auto ckpt = dir.file("never.ckpt");
  const RunResult r = run(
      dir, "train --vision " + q(data / "vision.emb") + " --text " + q(data / "text.emb") +
               " --labels " + q(dir.file("nope.lbl")) + " --manifest " +
               q(data / "manifest.txt") + " --vision-dim 6 --text-dim 6 --batch 18 --out " +
               q(ckpt));
  CHECK(r.exit_code == 2);
  CHECK_FALSE(std::filesystem::exists(ckpt));
  CHECK_FALSE(std::filesystem::exists(ckpt.string() + ".tmp"));
}
