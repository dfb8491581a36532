#pragma once

// Fixed cross-lingual word embeddings: loading, the word-by-word
// nearest-neighbour baseline and a dictionary-seeded orthogonal mapping.

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unmt/vocab.hpp"

namespace unmt {

template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T(0)) {}

  T& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<T> row(std::size_t i) { return std::span<T>(data).subspan(i * cols, cols); }
  std::span<const T> row(std::size_t i) const { return std::span<const T>(data).subspan(i * cols, cols); }
};

// Rows aligned with a vocabulary's ids.
using EmbeddingMatrix = Matrix<float>;

struct LoadedEmbeddings {
  EmbeddingMatrix matrix;
  std::vector<std::string> missing;  // vocabulary words absent from the file
};

// Text format: header "V d", then "token x_1 ... x_d" per line. Words missing
// from the file, and the reserved ids, get zero rows.
LoadedEmbeddings load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                 std::size_t expected_dim);
// Vocabulary of exactly the words an embedding file lists, in file order,
// and the file's dimension.
std::pair<Vocabulary, std::size_t> scan_embedding_file(const std::filesystem::path& path, std::string lang = {});

void save_embeddings(const std::filesystem::path& path, std::span<const std::string> tokens,
                     const Matrix<float>& vectors);

// Both languages' matrices, assumed to live in one shared space.
class CrossLingualSpace {
 public:
  CrossLingualSpace(Vocabulary l1, EmbeddingMatrix e1, Vocabulary l2, EmbeddingMatrix e2);

  const Vocabulary& vocab(Lang l) const { return vocab_[lang_index(l)]; }
  const EmbeddingMatrix& embeddings(Lang l) const { return emb_[lang_index(l)]; }
  std::size_t dim() const { return emb_[0].cols; }

  // Target id with the highest cosine similarity to the source word, or -1
  // when the source word has no usable vector. Zero rows never compete; ties
  // go to the lower id.
  int nearest(int source_id, Lang src, Lang tgt) const;

 private:
  std::array<Vocabulary, 2> vocab_;
  std::array<EmbeddingMatrix, 2> emb_;
  std::array<std::vector<double>, 2> norms_;
};

// Both files' own vocabularies with their vectors.
CrossLingualSpace load_embedding_space(const std::filesystem::path& l1, const std::filesystem::path& l2);

// Each in-vocabulary word becomes its nearest neighbour in the other
// language; out-of-vocabulary words are copied verbatim.
Sentence word_by_word_translate(const Sentence& sentence, const CrossLingualSpace& space, Lang src, Lang tgt);

// Orthogonal W (d x d) minimising ||X_dict W - Z_dict||_F, i.e. U V^T for the
// SVD U S V^T of X_dict^T Z_dict. dict pairs are (row of X, row of Z).
Matrix<double> procrustes_map(const Matrix<float>& x, const Matrix<float>& z,
                              std::span<const std::pair<int, int>> dict);

}  // namespace unmt
