#include <doctest.h>

#include <sys/wait.h>

#include <fstream>

#include "support.hpp"
#include "unmt/vocab.hpp"

using unmt::testing::TempDir;

namespace {

struct Result {
  int code;
  std::string output;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Runs the tool with the given arguments, capturing stdout and stderr.
Result run(const TempDir& dir, const std::string& args) {
  const auto log = dir / "cli.out";
  const std::string cmd = "cd '" + dir.path().string() + "' && '" UNMT_CLI_PATH "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

// A tiny toy pair and a few iterations of a very small model.
void train_tiny(const TempDir& dir, const std::string& extra = {}) {
  REQUIRE(run(dir, "gen-toy --vocab 20 --train 200 --test 10 --parallel 20 --dim 8 --out toy").code == 0);
  const Result r = run(dir,
                       "train --preset desk --iterations 4 --emb-dim 8 --hidden-dim 8 --batch-size 8 --log-every 2 "
                       "--checkpoint-every 2 --l1-mono toy/l1.train --l2-mono toy/l2.train "
                       "--l1-embeddings toy/l1.emb --l2-embeddings toy/l2.emb --output-dir run " + extra);
  REQUIRE_MESSAGE(r.code == 0, r.output);
}

}  // namespace

TEST_CASE("gen-toy writes the toy files and is reproducible") {
  TempDir dir("cli");
  REQUIRE(run(dir, "gen-toy --vocab 30 --train 100 --test 20 --seed 4 --out a").code == 0);
  REQUIRE(run(dir, "gen-toy --vocab 30 --train 100 --test 20 --seed 4 --out b").code == 0);
  for (const char* f : {"l1.train", "l2.train", "test.l1", "test.l2", "l1.emb", "l2.emb", "lexicon.tsv"}) {
    CHECK(std::filesystem::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK_FALSE(std::filesystem::exists(dir / "a" / "parallel.l1"));
  CHECK(unmt::read_corpus(dir / "a" / "l1.train").size() == 100);
}

TEST_CASE("gen-toy rejects a non-positive Zipf exponent by name") {
  TempDir dir("cli");
  const Result r = run(dir, "gen-toy --zipf 0 --out t");
  CHECK(r.code != 0);
  CHECK(r.output.find("--zipf") != std::string::npos);
}

TEST_CASE("train checks its inputs before doing any work") {
  TempDir dir("cli");
  REQUIRE(run(dir, "gen-toy --vocab 20 --train 50 --test 5 --parallel 5 --dim 8 --out toy").code == 0);
  const std::string base =
      "train --preset desk --l1-mono toy/l1.train --l2-mono toy/l2.train --l1-embeddings toy/l1.emb "
      "--l2-embeddings toy/l2.emb --output-dir run ";
  Result r = run(dir, base + "--mode semi");
  CHECK(r.code == 1);
  CHECK(r.output.find("parallel") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "run" / "model.bin"));
  r = run(dir, "train --preset desk --l1-mono nowhere.txt --l2-mono toy/l2.train --output-dir run");
  CHECK(r.code == 1);
  CHECK(r.output.find("nowhere.txt") != std::string::npos);
  CHECK(run(dir, base + "--hidden-dim abc").code == 1);
  CHECK(run(dir, base + "--preset huge").code == 1);
}

TEST_CASE("train writes metrics, config and checkpoints; translate and eval use them") {
  TempDir dir("cli");
  train_tiny(dir);
  for (const char* f : {"config.txt", "metrics.log", "checkpoint-2.bin", "checkpoint-4.bin", "model.bin"})
    CHECK(std::filesystem::exists(dir / "run" / f));
  const std::string metrics = slurp(dir / "run" / "metrics.log");
  CHECK(metrics.rfind("2 denoise_l1 ", 0) == 0);
  CHECK(metrics.find("4 backtranslate_l2 ") != std::string::npos);

  REQUIRE(run(dir, "translate --checkpoint run/model.bin --input toy/test.l1 --output g.l2 --beam 0").code == 0);
  REQUIRE(run(dir, "translate --checkpoint run/model.bin --input toy/test.l1 --output b1.l2 --beam 1").code == 0);
  REQUIRE(run(dir, "translate --checkpoint run/model.bin --input toy/test.l2 --output b.l1 --direction l2-l1").code ==
          0);
  CHECK(slurp(dir / "g.l2") == slurp(dir / "b1.l2"));
  CHECK(unmt::read_corpus(dir / "b.l1").size() == 10);
  CHECK(run(dir, "translate --checkpoint run/model.bin --input toy/test.l1 --output x --direction l1-l3").code == 1);

  std::ofstream(dir / "empty.txt").close();
  REQUIRE(run(dir, "translate --checkpoint run/model.bin --input empty.txt --output empty.out").code == 0);
  CHECK(std::filesystem::exists(dir / "empty.out"));
  CHECK(slurp(dir / "empty.out").empty());

  Result r = run(dir, "eval --hyp toy/test.l2 --ref toy/test.l2");
  CHECK(r.code == 0);
  CHECK(r.output.rfind("BLEU = 100.00", 0) == 0);
  r = run(dir, "eval --hyp g.l2 --ref toy/test.l2 --checkpoint run/model.bin --source toy/test.l1");
  CHECK(r.code == 0);
  CHECK(r.output.find("perplexity = ") != std::string::npos);
  CHECK(run(dir, "eval --hyp toy/test.l2 --ref toy/l2.train").code != 0);
}

TEST_CASE("semi mode trains with a parallel corpus") {
  TempDir dir("cli");
  train_tiny(dir, "--mode semi --parallel toy/parallel.l1 toy/parallel.l2");
  CHECK(slurp(dir / "run" / "metrics.log").find("supervised_l2_l1") != std::string::npos);
}

TEST_CASE("baseline recovers the lexicon word for word") {
  TempDir dir("cli");
  REQUIRE(run(dir, "gen-toy --vocab 30 --train 20 --test 20 --no-reorder --out toy").code == 0);
  REQUIRE(run(dir, "baseline --l1-emb toy/l1.emb --l2-emb toy/l2.emb --input toy/test.l1 --output base.l2").code == 0);
  CHECK(slurp(dir / "base.l2") == slurp(dir / "toy" / "test.l2"));
}

TEST_CASE("learn-bpe and apply-bpe round-trip") {
  TempDir dir("cli");
  std::ofstream(dir / "text") << "lower newest widest\nlowest low low\n";
  REQUIRE(run(dir, "learn-bpe --input text --output codes --ops 10").code == 0);
  REQUIRE(run(dir, "apply-bpe --codes codes --input text --output seg").code == 0);
  REQUIRE(run(dir, "apply-bpe --codes codes --input seg --output back --undo").code == 0);
  CHECK(slurp(dir / "seg").find("@@") != std::string::npos);
  CHECK(slurp(dir / "back") == slurp(dir / "text"));
}

TEST_CASE("unknown subcommands and missing options fail with usage errors") {
  TempDir dir("cli");
  CHECK(run(dir, "frobnicate").code == 1);
  CHECK(run(dir, "translate --input x").code == 1);
  CHECK(run(dir, "--help").code == 0);
}
