#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "support.hpp"
#include "unmt/errors.hpp"
#include "unmt/evaluation.hpp"

using namespace unmt;
using unmt::testing::brute_force_bleu;

namespace {

std::vector<Sentence> lines(std::initializer_list<const char*> text) {
  std::vector<Sentence> out;
  for (const char* t : text) out.push_back(tokenize(t));
  return out;
}

std::vector<Sentence> random_corpus(Rng& rng, std::size_t n) {
  const std::vector<std::string> words{"a", "b", "c", "d"};
  std::uniform_int_distribution<std::size_t> w(0, 3), len(0, 9);
  std::vector<Sentence> out(n);
  for (Sentence& s : out)
    for (std::size_t k = len(rng); k > 0; --k) s.push_back(words[w(rng)]);
  return out;
}

}  // namespace

TEST_CASE("identical corpora score 100") {
  const auto c = lines({"the cat sat on the mat", "a b c d e"});
  const BleuReport r = bleu(c, c);
  CHECK(r.bleu == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(r.brevity_penalty == 1.0);
  CHECK(format_report(r).rfind("BLEU = 100.00", 0) == 0);
}

TEST_CASE("hand-computed brevity penalty example") {
  const BleuReport r = bleu(lines({"a b c d e f"}), lines({"a b c d e f g"}));
  CHECK(r.matches == std::array<std::size_t, 4>{6, 5, 4, 3});
  CHECK(r.totals == std::array<std::size_t, 4>{6, 5, 4, 3});
  CHECK(r.brevity_penalty == doctest::Approx(std::exp(-1.0 / 6.0)));
  CHECK(std::abs(r.bleu - 84.65) < 0.01);
}

TEST_CASE("no 4-gram match means zero") {
  const BleuReport r = bleu(lines({"the cat sat on the mat"}), lines({"the cat is on the mat"}));
  CHECK(r.matches[3] == 0);
  CHECK(r.bleu == 0.0);
}

TEST_CASE("clipping counts each reference n-gram at most as often as it appears") {
  const BleuReport r = bleu(lines({"the the the the"}), lines({"the cat"}));
  CHECK(r.matches[0] == 1);
  CHECK(r.precisions[0] == doctest::Approx(0.25));
}

TEST_CASE("agrees with a brute-force counter on 100 random corpora") {
  Rng rng(2024);
  std::uniform_int_distribution<std::size_t> size(1, 8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = size(rng);
    const auto hyps = random_corpus(rng, n);
    const auto refs = random_corpus(rng, n);
    CAPTURE(trial);
    CHECK(std::abs(bleu(hyps, refs).bleu - brute_force_bleu(hyps, refs)) < 1e-9);
  }
}

TEST_CASE("corpus BLEU ignores a joint permutation of sentences") {
  Rng rng(7);
  auto hyps = random_corpus(rng, 6);
  auto refs = random_corpus(rng, 6);
  for (std::size_t i = 0; i < 6; ++i) refs[i].insert(refs[i].end(), hyps[i].begin(), hyps[i].end());
  const double before = bleu(hyps, refs).bleu;
  std::vector<std::size_t> order{3, 1, 5, 0, 4, 2};
  std::vector<Sentence> h2, r2;
  for (std::size_t i : order) {
    h2.push_back(hyps[i]);
    r2.push_back(refs[i]);
  }
  CHECK(bleu(h2, r2).bleu == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("report fields stay in range") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto hyps = random_corpus(rng, 4);
    const auto refs = random_corpus(rng, 4);
    const BleuReport r = bleu(hyps, refs);
    CHECK(r.bleu >= 0.0);
    CHECK(r.bleu <= 100.0);
    CHECK(r.brevity_penalty <= 1.0);
    for (double p : r.precisions) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
}

TEST_CASE("mismatched sentence counts are rejected; empty hypotheses score zero") {
  CHECK_THROWS_AS(bleu(lines({"a"}), lines({"a", "b"})), ContractError);
  const BleuReport r = bleu(lines({""}), lines({"a b"}));
  CHECK(r.bleu == 0.0);
}

TEST_CASE("perplexity of a uniform model equals the vocabulary size") {
  ModelConfig c;
  c.emb_dim = 4;
  c.hidden_dim = 5;
  c.vocab_size = {9, 11};
  TranslationModel<double> m(c, 1);
  for (const char* name : {"decoder.l2.output.w", "decoder.l2.output.b"}) {
    Parameter<double>* p = m.find(name);
    std::fill(p->value.begin(), p->value.end(), 0.0);
  }
  const std::vector<Ids> src{{4, 5}, {6}, {7, 8, 4}};
  const std::vector<Ids> tgt{{4, 9, 10}, {5}, {}};
  CHECK(perplexity(m, std::span<const Ids>(src), Lang::L1, std::span<const Ids>(tgt), Lang::L2, 2) ==
        doctest::Approx(11.0).epsilon(1e-9));
  CHECK_THROWS_AS(perplexity(m, std::span<const Ids>(), Lang::L1, std::span<const Ids>(), Lang::L2), ContractError);
}

TEST_CASE("perplexity pools tokens across batches") {
  ModelConfig c;
  c.emb_dim = 4;
  c.hidden_dim = 5;
  c.vocab_size = {9, 9};
  TranslationModel<double> m(c, 2);
  const std::vector<Ids> src{{4, 5}, {6}, {7, 8, 4}, {5, 5}};
  const std::vector<Ids> tgt{{4, 6, 7}, {5}, {}, {8, 8, 8, 8}};
  const double one = perplexity(m, std::span<const Ids>(src), Lang::L1, std::span<const Ids>(tgt), Lang::L2, 64);
  const double many = perplexity(m, std::span<const Ids>(src), Lang::L1, std::span<const Ids>(tgt), Lang::L2, 1);
  CHECK(one == doctest::Approx(many).epsilon(1e-12));
}
