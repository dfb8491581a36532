#include <doctest.h>

#include <cmath>
#include <fstream>

#include "support.hpp"
#include "unmt/embeddings.hpp"
#include "unmt/errors.hpp"

using namespace unmt;
using unmt::testing::TempDir;

namespace {

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

Vocabulary vocab(std::initializer_list<const char*> words, const char* lang = "l1") {
  std::vector<std::string> w(words.begin(), words.end());
  return Vocabulary::from_tokens(w, lang);
}

// Random d x d rotation from a Gram-Schmidt pass over Gaussian columns.
Matrix<double> random_rotation(std::size_t d, std::uint64_t seed) {
  const auto g = unmt::testing::randn(d * d, seed);
  Matrix<double> q(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> c(d);
    for (std::size_t i = 0; i < d; ++i) c[i] = g[i * d + j];
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0;
      for (std::size_t i = 0; i < d; ++i) dot += c[i] * q.at(i, k);
      for (std::size_t i = 0; i < d; ++i) c[i] -= dot * q.at(i, k);
    }
    double n = 0;
    for (double v : c) n += v * v;
    for (std::size_t i = 0; i < d; ++i) q.at(i, j) = c[i] / std::sqrt(n);
  }
  return q;
}

Matrix<float> random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  const auto g = unmt::testing::randn(r * c, seed);
  Matrix<float> m(r, c);
  for (std::size_t i = 0; i < g.size(); ++i) m.data[i] = static_cast<float>(g[i]);
  return m;
}

}  // namespace

TEST_CASE("load: rows follow vocabulary ids; specials and missing words are zero") {
  TempDir dir("emb");
  write(dir / "e.txt", "3 4\nb 1 2 3 4\na 5 6 7 8\nzzz 9 9 9 9\n");
  const Vocabulary v = vocab({"a", "b", "c"});
  const LoadedEmbeddings e = load_embeddings(dir / "e.txt", v, 4);
  CHECK(e.matrix.rows == 7);
  CHECK(e.matrix.cols == 4);
  CHECK(e.matrix.at(4, 0) == 5.0f);
  CHECK(e.matrix.at(5, 3) == 4.0f);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(e.matrix.at(6, j) == 0.0f);
    for (std::size_t s = 0; s < Vocabulary::kReserved; ++s) CHECK(e.matrix.at(s, j) == 0.0f);
  }
  CHECK(e.missing == std::vector<std::string>{"c"});
}

TEST_CASE("load: dimension mismatch and malformed lines") {
  TempDir dir("emb-bad");
  const Vocabulary v = vocab({"a"});
  write(dir / "d300.txt", "1 300\n");
  CHECK_THROWS_AS(load_embeddings(dir / "d300.txt", v, 64), FormatError);
  write(dir / "short.txt", "2 3\na 1 2 3\nb 1 2\n");
  try {
    load_embeddings(dir / "short.txt", v, 3);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  write(dir / "nan.txt", "1 2\na 1 x\n");
  CHECK_THROWS_AS(load_embeddings(dir / "nan.txt", v, 2), ParseError);
}

TEST_CASE("save then scan round trip") {
  TempDir dir("emb-rt");
  Matrix<float> m = random_matrix(3, 5, 1);
  const std::vector<std::string> tokens{"p", "q", "r"};
  save_embeddings(dir / "e.txt", tokens, m);
  const auto [v, d] = scan_embedding_file(dir / "e.txt");
  CHECK(d == 5);
  CHECK(v.size() == 7);
  const LoadedEmbeddings back = load_embeddings(dir / "e.txt", v, 5);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(back.matrix.at(i + 4, j) == m.at(i, j));
}

TEST_CASE("nearest neighbour: exact pairs, zero rows, ties to the lower id") {
  const Vocabulary v1 = vocab({"a", "b", "c"}, "l1");
  const Vocabulary v2 = vocab({"x", "y", "z"}, "l2");
  EmbeddingMatrix e1(7, 2), e2(7, 2);
  e1.at(4, 0) = 1;  // a
  e1.at(5, 1) = 1;  // b
  // c has no vector
  e2.at(4, 1) = 2;   // x ~ b
  e2.at(5, 0) = 3;   // y ~ a
  e2.at(6, 0) = 0.5; // z ~ a as well: a tie on cosine, y wins by id
  const CrossLingualSpace space(v1, e1, v2, e2);
  CHECK(space.nearest(4, Lang::L1, Lang::L2) == 5);
  CHECK(space.nearest(5, Lang::L1, Lang::L2) == 4);
  CHECK(space.nearest(6, Lang::L1, Lang::L2) == -1);
  CHECK(word_by_word_translate(tokenize("a b c Tymoshenko"), space, Lang::L1, Lang::L2) ==
        tokenize("y x c Tymoshenko"));
  CHECK(word_by_word_translate(Sentence{}, space, Lang::L1, Lang::L2).empty());
}

TEST_CASE("procrustes: identity, known rotation, orthogonality") {
  const std::size_t n = 40, d = 6;
  const Matrix<float> x = random_matrix(n, d, 3);
  std::vector<std::pair<int, int>> dict;
  for (int i = 0; i < static_cast<int>(n); ++i) dict.emplace_back(i, i);

  const Matrix<double> w = procrustes_map(x, x, dict);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) CHECK(w.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-5));

  const Matrix<double> r = random_rotation(d, 4);
  Matrix<float> z(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < d; ++k) s += x.at(i, k) * r.at(k, j);
      z.at(i, j) = static_cast<float>(s);
    }
  const Matrix<double> wr = procrustes_map(x, z, dict);
  double worst = 0;
  for (std::size_t i = 0; i < d * d; ++i) worst = std::max(worst, std::abs(wr.data[i] - r.data[i]));
  CHECK(worst < 1e-4);

  const Matrix<double> wq = procrustes_map(x, random_matrix(n, d, 5), dict);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < d; ++k) s += wq.at(k, i) * wq.at(k, j);
      CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-5));
    }

  CHECK_THROWS_AS(procrustes_map(x, x, std::vector<std::pair<int, int>>{}), ContractError);
}
