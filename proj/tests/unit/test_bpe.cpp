#include <doctest.h>

#include <set>

#include "support.hpp"
#include "unmt/bpe.hpp"
#include "unmt/errors.hpp"

using namespace unmt;

namespace {

const std::map<std::string, std::size_t> kToy{{"low", 5}, {"lower", 2}, {"newest", 6}, {"widest", 3}};

std::vector<Sentence> random_corpus(std::uint64_t seed, std::size_t lines) {
  Rng rng(seed);
  const std::vector<std::string> alphabet{"a", "b", "c", "d", "é", "ß", "x"};
  std::uniform_int_distribution<std::size_t> letter(0, alphabet.size() - 1), wlen(1, 7), slen(0, 8);
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < lines; ++i) {
    Sentence s(slen(rng));
    for (std::string& w : s)
      for (std::size_t k = wlen(rng); k > 0; --k) w += alphabet[letter(rng)];
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("first merges on the classic toy counts") {
  const MergeTable t = learn_bpe(kToy, 10);
  REQUIRE(t.size() == 10);
  // Frozen from an independent replay. (e,s) (s,t) (t,</w>) all occur 9
  // times and the lexicographic tie rule picks (e,s); at count 6 it picks
  // (e,w) over (n,e).
  const std::vector<SymbolPair> expected{
      {"e", "s"}, {"es", "t"},  {"est", "</w>"},     {"l", "o"},      {"lo", "w"},
      {"e", "w"}, {"ew", "est</w>"}, {"n", "ewest</w>"}, {"low", "</w>"}, {"d", "est</w>"},
  };
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CAPTURE(i);
    CHECK(t.merges()[i] == expected[i]);
  }
}

TEST_CASE("learning stops once the best pair occurs at most once") {
  const MergeTable t = learn_bpe({{"abc", 1}}, 100);
  CHECK(t.empty());
  const MergeTable u = learn_bpe({{"abab", 1}}, 100);
  CHECK(u.size() == 1);
}

TEST_CASE("learn_bpe is deterministic and rejects empty input") {
  CHECK(learn_bpe(kToy, 20).serialize() == learn_bpe(kToy, 20).serialize());
  CHECK_THROWS_AS(learn_bpe({}, 5), EmptyInputError);
}

TEST_CASE("apply marks every non-final piece with @@") {
  const MergeTable t = learn_bpe(kToy, 10);
  CHECK(apply_bpe(tokenize("lowest newer"), t) == Sentence{"low@@", "est", "n@@", "ew@@", "e@@", "r"});
  CHECK(apply_bpe(tokenize("low"), t) == Sentence{"low"});
  CHECK(apply_bpe(Sentence{}, t).empty());
  CHECK(apply_bpe(tokenize("qz"), t) == Sentence{"q@@", "z"});
}

TEST_CASE("min-rank merging equals replaying merges in learned order") {
  const auto c = random_corpus(5, 200);
  const MergeTable t = learn_bpe(word_frequencies(c), 60);
  for (const Sentence& s : c)
    for (const std::string& w : s) {
      std::vector<std::string> symbols = utf8_characters(w);
      symbols.push_back(kEndOfWord);
      for (const auto& [l, r] : t.merges()) {
        std::vector<std::string> next;
        for (std::size_t i = 0; i < symbols.size(); ++i) {
          if (i + 1 < symbols.size() && symbols[i] == l && symbols[i + 1] == r) {
            next.push_back(l + r);
            ++i;
          } else {
            next.push_back(symbols[i]);
          }
        }
        symbols = next;
      }
      CHECK(segment_word(w, t) == symbols);
    }
}

TEST_CASE("round trip: undo(apply(s)) == s on random corpora") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto c = random_corpus(seed, 50);
    const MergeTable t = learn_bpe(word_frequencies(c), 30);
    for (const Sentence& s : c) CHECK(undo_bpe(apply_bpe(s, t)) == s);
  }
}

TEST_CASE("subword vocabulary is bounded by characters + merges + 1") {
  const auto c = random_corpus(9, 300);
  const std::size_t k = 40;
  const MergeTable t = learn_bpe(word_frequencies(c), k);
  std::set<std::string> chars, pieces;
  for (const Sentence& s : c)
    for (const std::string& w : s) {
      for (const std::string& ch : utf8_characters(w)) chars.insert(ch);
      for (const std::string& p : apply_bpe(Sentence{w}, t)) pieces.insert(p);
    }
  CHECK(pieces.size() <= chars.size() + k + 1);
}

TEST_CASE("undo rejects a dangling continuation") {
  CHECK(undo_bpe(Sentence{"a@@", "b", "c"}) == Sentence{"ab", "c"});
  CHECK_THROWS_AS(undo_bpe(Sentence{"a", "b@@"}), MalformedInputError);
}

TEST_CASE("merge tables persist and reject duplicates") {
  unmt::testing::TempDir dir("bpe");
  const MergeTable t = learn_bpe(kToy, 10, "l1");
  t.save(dir / "codes");
  const MergeTable back = MergeTable::load(dir / "codes", "l1");
  CHECK(back.serialize() == t.serialize());
  CHECK(back.rank("e", "s") == 0);
  CHECK(back.rank("s", "e") == -1);
  CHECK_THROWS_AS(MergeTable(std::vector<SymbolPair>{{"a", "b"}, {"a", "b"}}), FormatError);
}

TEST_CASE("utf8 characters are split by code point") {
  CHECK(utf8_characters("aé€𝄞") == std::vector<std::string>{"a", "é", "€", "𝄞"});
}
