#include "unmt/embeddings.hpp"

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace unmt {

namespace {

std::size_t parse_count(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("expected a count, got '" + s + "'", line);
  return v;
}

float parse_real(const std::string& s, std::size_t line) {
  float v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("expected a real, got '" + s + "'", line);
  return v;
}

}  // namespace

LoadedEmbeddings load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                 std::size_t expected_dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  Sentence header = tokenize(line);
  if (header.size() != 2) throw ParseError("header must be 'V d'", 1);
  parse_count(header[0], 1);
  const std::size_t dim = parse_count(header[1], 1);
  if (dim != expected_dim) {
    throw FormatError("embedding file " + path.string() + " has dimension " + std::to_string(dim) +
                      " but the model expects " + std::to_string(expected_dim));
  }

  LoadedEmbeddings out;
  out.matrix = EmbeddingMatrix(vocab.size(), dim);
  std::vector<std::uint8_t> seen(vocab.size(), 0);
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    Sentence parts = tokenize(line);
    if (parts.empty()) continue;
    if (parts.size() != dim + 1) {
      throw ParseError("expected a token and " + std::to_string(dim) + " values, got " +
                       std::to_string(parts.size()) + " fields", n);
    }
    if (!vocab.contains(parts[0])) continue;
    const int id = vocab.id(parts[0]);
    auto row = out.matrix.row(static_cast<std::size_t>(id));
    for (std::size_t j = 0; j < dim; ++j) row[j] = parse_real(parts[j + 1], n);
    seen[static_cast<std::size_t>(id)] = 1;
  }
  for (std::size_t id = Vocabulary::kReserved; id < vocab.size(); ++id)
    if (!seen[id]) out.missing.push_back(vocab.token(static_cast<int>(id)));
  return out;
}

std::pair<Vocabulary, std::size_t> scan_embedding_file(const std::filesystem::path& path, std::string lang) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  Sentence header = tokenize(line);
  if (header.size() != 2) throw ParseError("header must be 'V d'", 1);
  const std::size_t dim = parse_count(header[1], 1);
  std::vector<std::string> tokens;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    const auto end = line.find_first_of(" \t");
    const std::string token = line.substr(0, end);
    if (token.empty()) continue;
    tokens.push_back(token);
  }
  return {Vocabulary::from_tokens(tokens, std::move(lang)), dim};
}

CrossLingualSpace load_embedding_space(const std::filesystem::path& l1, const std::filesystem::path& l2) {
  auto [v1, d1] = scan_embedding_file(l1, "l1");
  auto [v2, d2] = scan_embedding_file(l2, "l2");
  if (d1 != d2) throw FormatError("embedding files disagree on dimension (" + std::to_string(d1) + " vs " +
                                  std::to_string(d2) + ")");
  EmbeddingMatrix e1 = load_embeddings(l1, v1, d1).matrix;
  EmbeddingMatrix e2 = load_embeddings(l2, v2, d2).matrix;
  return CrossLingualSpace(std::move(v1), std::move(e1), std::move(v2), std::move(e2));
}

void save_embeddings(const std::filesystem::path& path, std::span<const std::string> tokens,
                     const Matrix<float>& vectors) {
  if (tokens.size() != vectors.rows) throw ContractError("save_embeddings: token count differs from row count");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embedding file " + path.string());
  out << vectors.rows << ' ' << vectors.cols << '\n';
  out << std::setprecision(std::numeric_limits<float>::max_digits10);
  for (std::size_t i = 0; i < vectors.rows; ++i) {
    out << tokens[i];
    for (float v : vectors.row(i)) out << ' ' << v;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

CrossLingualSpace::CrossLingualSpace(Vocabulary l1, EmbeddingMatrix e1, Vocabulary l2, EmbeddingMatrix e2)
    : vocab_{std::move(l1), std::move(l2)}, emb_{std::move(e1), std::move(e2)} {
  if (emb_[0].cols != emb_[1].cols) {
    throw DimensionError("cross-lingual space: dimensions differ (" + std::to_string(emb_[0].cols) + " vs " +
                         std::to_string(emb_[1].cols) + ")");
  }
  for (int l = 0; l < 2; ++l) {
    if (emb_[l].rows != vocab_[l].size()) {
      throw DimensionError("cross-lingual space: " + std::to_string(emb_[l].rows) + " rows for a vocabulary of " +
                           std::to_string(vocab_[l].size()));
    }
    norms_[l].resize(emb_[l].rows);
    for (std::size_t i = 0; i < emb_[l].rows; ++i) {
      double sq = 0;
      for (float v : emb_[l].row(i)) sq += double(v) * v;
      norms_[l][i] = std::sqrt(sq);
    }
  }
}

int CrossLingualSpace::nearest(int source_id, Lang src, Lang tgt) const {
  const int s = lang_index(src), t = lang_index(tgt);
  if (source_id < static_cast<int>(Vocabulary::kReserved) || source_id >= static_cast<int>(emb_[s].rows)) return -1;
  const double qn = norms_[s][static_cast<std::size_t>(source_id)];
  if (qn == 0.0) return -1;
  auto q = emb_[s].row(static_cast<std::size_t>(source_id));
  int best = -1;
  double best_cos = -std::numeric_limits<double>::infinity();
  for (std::size_t id = Vocabulary::kReserved; id < emb_[t].rows; ++id) {
    if (norms_[t][id] == 0.0) continue;
    double dot = 0;
    auto r = emb_[t].row(id);
    for (std::size_t j = 0; j < r.size(); ++j) dot += double(q[j]) * r[j];
    const double cos = dot / (qn * norms_[t][id]);
    if (cos > best_cos) {
      best_cos = cos;
      best = static_cast<int>(id);
    }
  }
  return best;
}

Sentence word_by_word_translate(const Sentence& sentence, const CrossLingualSpace& space, Lang src, Lang tgt) {
  Sentence out;
  out.reserve(sentence.size());
  const Vocabulary& sv = space.vocab(src);
  for (const std::string& w : sentence) {
    const int hit = sv.contains(w) ? space.nearest(sv.id(w), src, tgt) : -1;
    out.push_back(hit < 0 ? w : space.vocab(tgt).token(hit));
  }
  return out;
}

Matrix<double> procrustes_map(const Matrix<float>& x, const Matrix<float>& z,
                              std::span<const std::pair<int, int>> dict) {
  if (dict.empty()) throw ContractError("procrustes_map: empty dictionary");
  if (x.cols != z.cols) {
    throw DimensionError("procrustes_map: dimensions differ (" + std::to_string(x.cols) + " vs " +
                         std::to_string(z.cols) + ")");
  }
  const std::size_t d = x.cols;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (const auto& [xi, zi] : dict) {
    if (xi < 0 || static_cast<std::size_t>(xi) >= x.rows || zi < 0 || static_cast<std::size_t>(zi) >= z.rows) {
      throw IndexError("procrustes_map: dictionary pair (" + std::to_string(xi) + ", " + std::to_string(zi) +
                       ") out of range");
    }
    auto xr = x.row(static_cast<std::size_t>(xi));
    auto zr = z.row(static_cast<std::size_t>(zi));
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += double(xr[a]) * zr[b];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd w = svd.matrixU() * svd.matrixV().transpose();
  Matrix<double> out(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) out.at(a, b) = w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  return out;
}

}  // namespace unmt
