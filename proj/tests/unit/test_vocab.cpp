#include <doctest.h>

#include <fstream>
#include <numeric>

#include "support.hpp"
#include "unmt/errors.hpp"
#include "unmt/vocab.hpp"

using namespace unmt;

namespace {

std::vector<Sentence> corpus(std::initializer_list<const char*> lines) {
  std::vector<Sentence> out;
  for (const char* l : lines) out.push_back(tokenize(l));
  return out;
}

}  // namespace

TEST_CASE("reserved ids come first in the documented order") {
  Vocabulary v;
  CHECK(v.size() == 4);
  CHECK(v.token(Vocabulary::kPad) == "<pad>");
  CHECK(v.token(Vocabulary::kUnk) == "<unk>");
  CHECK(v.token(Vocabulary::kSos) == "<s>");
  CHECK(v.token(Vocabulary::kEos) == "</s>");
}

TEST_CASE("build keeps the most frequent tokens") {
  const auto c = corpus({"a a b"});
  Vocabulary v = Vocabulary::build(c, 1);
  CHECK(v.size() == 5);
  CHECK(v.contains("a"));
  CHECK(v.encode(tokenize("b a")) == Ids{Vocabulary::kUnk, 4});
}

TEST_CASE("frequency ties go to the first occurrence") {
  const auto c = corpus({"a b a b"});
  CHECK(Vocabulary::build(c, 1).contains("a"));
  const auto d = corpus({"b a a b"});
  CHECK(Vocabulary::build(d, 1).contains("b"));
}

TEST_CASE("a generous cap maps nothing to UNK and round-trips") {
  const auto c = corpus({"the cat sat", "on the mat"});
  Vocabulary v = Vocabulary::build(c, 100);
  CHECK(v.size() == 4 + 5);
  for (const Sentence& s : c) {
    const Ids ids = v.encode(s);
    CHECK(std::find(ids.begin(), ids.end(), Vocabulary::kUnk) == ids.end());
    CHECK(v.decode(ids) == s);
  }
}

TEST_CASE("build rejects empty input and a zero cap") {
  std::vector<Sentence> none;
  CHECK_THROWS_AS(Vocabulary::build(none, 10), EmptyInputError);
  const auto blank = corpus({"", ""});
  CHECK_THROWS_AS(Vocabulary::build(blank, 10), EmptyInputError);
  const auto c = corpus({"a"});
  CHECK_THROWS_AS(Vocabulary::build(c, 0), ContractError);
}

TEST_CASE("vocabulary file: line k holds id k + 4") {
  unmt::testing::TempDir dir("vocab");
  const auto c = corpus({"x y y z z z"});
  Vocabulary v = Vocabulary::build(c, 10, "l1");
  v.save(dir / "v.txt");
  std::ifstream in(dir / "v.txt");
  std::string first;
  std::getline(in, first);
  CHECK(first == "z");
  Vocabulary back = Vocabulary::load(dir / "v.txt", "l1");
  CHECK(back.size() == v.size());
  for (int i = 0; i < static_cast<int>(v.size()); ++i) CHECK(back.token(i) == v.token(i));
  CHECK_THROWS_AS(v.token(99), IndexError);
}

TEST_CASE("length filter keeps sentences of at most max_len elements") {
  std::vector<Sentence> c{Sentence(50, "w"), Sentence(51, "w"), Sentence(3, "w")};
  const auto kept = length_filter(c, 50);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].size() == 50);
  CHECK(kept[1].size() == 3);
  CHECK(length_filter(std::vector<Sentence>{}, 50).empty());
}

TEST_CASE("make_batch pads, appends EOS and masks") {
  const std::vector<Ids> s{{5, 6, 7}, {8, 9, 10, 11, 12}};
  const Batch b = make_batch(s, Lang::L2);
  CHECK(b.lang == Lang::L2);
  CHECK(b.rows == 2);
  CHECK(b.steps == 6);
  CHECK(b.lengths == std::vector<int>{4, 6});
  CHECK(b.at(0, 3) == Vocabulary::kEos);
  CHECK(b.at(0, 4) == Vocabulary::kPad);
  CHECK(b.at(0, 5) == Vocabulary::kPad);
  CHECK(b.at(1, 5) == Vocabulary::kEos);
  std::size_t mask_sum = 0;
  for (std::size_t r = 0; r < b.rows; ++r)
    for (std::size_t t = 0; t < b.steps; ++t) {
      const bool valid = static_cast<int>(t) < b.lengths[r];
      CHECK(static_cast<bool>(b.mask[r * b.steps + t]) == valid);
      if (!valid) CHECK(b.at(r, t) == Vocabulary::kPad);
      mask_sum += b.mask[r * b.steps + t];
    }
  CHECK(mask_sum == 10);
}

TEST_CASE("make_batches: sizes, padding per group, determinism") {
  const std::vector<Ids> c{{4}, {5, 6}, {7, 8, 9}};
  Rng a(3), b(3);
  const auto x = make_batches(c, 2, a, Lang::L1);
  const auto y = make_batches(c, 2, b, Lang::L1);
  REQUIRE(x.size() == 2);
  CHECK(x[0].rows == 2);
  CHECK(x[1].rows == 1);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].ids == y[i].ids);
  for (const Batch& batch : x) {
    const int longest = *std::max_element(batch.lengths.begin(), batch.lengths.end());
    CHECK(batch.steps == static_cast<std::size_t>(longest));
  }
  std::vector<Ids> rows;
  Rng z(4);
  CHECK_THROWS_AS(make_batches(c, 0, z, Lang::L1), ContractError);
}

TEST_CASE("batch stream covers every sentence once per epoch") {
  BatchStream s(10, 4, 7);
  std::vector<std::size_t> seen;
  for (int i = 0; i < 3; ++i) {
    auto idx = s.next();
    CHECK(idx.size() <= 4);
    seen.insert(seen.end(), idx.begin(), idx.end());
  }
  std::sort(seen.begin(), seen.end());
  std::vector<std::size_t> all(10);
  std::iota(all.begin(), all.end(), std::size_t{0});
  CHECK(seen == all);
  BatchStream t(10, 4, 7);
  BatchStream u(10, 4, 7);
  for (int i = 0; i < 10; ++i) CHECK(t.next() == u.next());
}

TEST_CASE("corpus files: whitespace tokenisation round trip") {
  unmt::testing::TempDir dir("corpus");
  const auto c = corpus({"héllo  wörld", "", "a\tb"});
  CHECK(c[0] == Sentence{"héllo", "wörld"});
  CHECK(c[1].empty());
  CHECK(c[2] == Sentence{"a", "b"});
  write_corpus(dir / "c.txt", c);
  CHECK(read_corpus(dir / "c.txt") == c);
  CHECK_THROWS_AS(read_corpus(dir / "missing.txt"), IoError);
}
