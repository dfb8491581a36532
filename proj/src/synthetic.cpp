#include "unmt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

namespace unmt {

void LangPairSpec::validate() const {
  if (vocab < 2) throw ConfigError("vocab must be at least 2");
  if (min_len < 1) throw ConfigError("min_len must be at least 1");
  if (max_len < min_len) throw ConfigError("max_len must be at least min_len");
  if (!(zipf > 0.0) || !std::isfinite(zipf)) throw ConfigError("zipf exponent must be positive");
  if (word_classes < 1 || word_classes > vocab) throw ConfigError("word_classes must lie in [1, vocab]");
  if (emb_dim < 1) throw ConfigError("emb_dim must be positive");
  if (!(perturbation >= 0.0)) throw ConfigError("perturbation must be non-negative");
  if (l1_prefix.empty() || l2_prefix.empty()) throw ConfigError("word prefixes must be non-empty");
}

SyntheticPair::SyntheticPair(LangPairSpec spec) : spec_(std::move(spec)), tau_(spec_.vocab) {
  spec_.validate();
  std::iota(tau_.begin(), tau_.end(), std::size_t{0});
  if (spec_.permute_lexicon) {
    Rng rng(spec_.seed * 0x9E3779B97F4A7C15ULL + 1);
    std::shuffle(tau_.begin(), tau_.end(), rng);
  }
}

std::string SyntheticPair::l1_word(std::size_t token) const { return spec_.l1_prefix + std::to_string(token); }
std::string SyntheticPair::l2_word(std::size_t token) const { return spec_.l2_prefix + std::to_string(tau_[token]); }

Sentence SyntheticPair::to_l1(const std::vector<std::size_t>& latent) const {
  Sentence s;
  for (std::size_t t : latent) s.push_back(l1_word(t));
  return s;
}

Sentence SyntheticPair::to_l2(const std::vector<std::size_t>& latent) const {
  Sentence s;
  for (std::size_t t : spec_.reorder ? swap_pairs(latent) : latent) s.push_back(l2_word(t));
  return s;
}

SyntheticCorpora SyntheticPair::generate(std::size_t n_train, std::size_t n_test, std::size_t n_parallel) const {
  if (n_train < 1 || n_test < 1) throw ContractError("generate: n_train and n_test must be at least 1");
  Rng rng(spec_.seed * 0x9E3779B97F4A7C15ULL + 2);
  const std::size_t classes = spec_.word_classes;
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t t = 0; t < spec_.vocab; ++t) members[t % classes].push_back(t);
  std::vector<std::discrete_distribution<std::size_t>> draw;
  for (const auto& m : members) {
    std::vector<double> w(m.size());
    for (std::size_t r = 0; r < m.size(); ++r) w[r] = 1.0 / std::pow(static_cast<double>(r + 1), spec_.zipf);
    draw.emplace_back(w.begin(), w.end());
  }
  std::uniform_int_distribution<std::size_t> length(spec_.min_len, spec_.max_len);

  std::set<std::vector<std::size_t>> seen;
  const std::size_t wanted = 2 * n_train + n_test + n_parallel;
  const std::size_t budget = 100 * wanted + 1000;
  std::vector<std::vector<std::size_t>> latents;
  for (std::size_t attempt = 0; latents.size() < wanted; ++attempt) {
    if (attempt == budget) throw ContractError("generate: too few distinct sentences for the requested sizes");
    std::vector<std::size_t> s(length(rng));
    for (std::size_t p = 0; p < s.size(); ++p) s[p] = members[p % classes][draw[p % classes](rng)];
    if (seen.insert(s).second) latents.push_back(std::move(s));
  }

  SyntheticCorpora out;
  std::size_t k = 0;
  for (std::size_t i = 0; i < n_train; ++i) out.l1_train.push_back(to_l1(latents[k++]));
  for (std::size_t i = 0; i < n_train; ++i) out.l2_train.push_back(to_l2(latents[k++]));
  for (std::size_t i = 0; i < n_test; ++i, ++k) {
    out.test_l1.push_back(to_l1(latents[k]));
    out.test_l2.push_back(to_l2(latents[k]));
  }
  for (std::size_t i = 0; i < n_parallel; ++i, ++k) {
    out.parallel_l1.push_back(to_l1(latents[k]));
    out.parallel_l2.push_back(to_l2(latents[k]));
  }
  return out;
}

CrossLingualSpace SyntheticPair::gold_embeddings() const {
  const std::size_t v = spec_.vocab;
  const std::size_t d = spec_.emb_dim;
  Rng rng(spec_.seed * 0x9E3779B97F4A7C15ULL + 3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spec_.perturbation > 0 ? spec_.perturbation : 1.0);

  auto normalise = [](std::vector<double>& x) {
    double n = 0;
    for (double a : x) n += a * a;
    n = std::sqrt(n);
    for (double& a : x) a /= n;
  };

  std::vector<std::string> w1(v), w2(v);
  for (std::size_t t = 0; t < v; ++t) w1[t] = l1_word(t);
  for (std::size_t t = 0; t < v; ++t) w2[t] = spec_.l2_prefix + std::to_string(t);
  Vocabulary v1 = Vocabulary::from_tokens(w1, "l1");
  Vocabulary v2 = Vocabulary::from_tokens(w2, "l2");
  EmbeddingMatrix e1(v1.size(), d), e2(v2.size(), d);
  for (std::size_t t = 0; t < v; ++t) {
    std::vector<double> x(d);
    for (double& a : x) a = gauss(rng);
    normalise(x);
    std::vector<double> y = x;
    if (spec_.perturbation > 0) {
      for (double& a : y) a += noise(rng);
      normalise(y);
    }
    const std::size_t r1 = Vocabulary::kReserved + t;
    const std::size_t r2 = Vocabulary::kReserved + tau_[t];
    for (std::size_t j = 0; j < d; ++j) {
      e1.at(r1, j) = static_cast<float>(x[j]);
      e2.at(r2, j) = static_cast<float>(y[j]);
    }
  }
  return CrossLingualSpace(std::move(v1), std::move(e1), std::move(v2), std::move(e2));
}

std::vector<std::pair<std::string, std::string>> SyntheticPair::lexicon() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t t = 0; t < spec_.vocab; ++t) out.emplace_back(l1_word(t), l2_word(t));
  return out;
}

namespace {

void write_space(const std::filesystem::path& path, const CrossLingualSpace& space, Lang l) {
  const Vocabulary& vocab = space.vocab(l);
  const EmbeddingMatrix& full = space.embeddings(l);
  EmbeddingMatrix regular(vocab.size() - Vocabulary::kReserved, full.cols);
  std::copy(full.data.begin() + static_cast<std::ptrdiff_t>(Vocabulary::kReserved * full.cols), full.data.end(),
            regular.data.begin());
  save_embeddings(path, vocab.regular_tokens(), regular);
}

}  // namespace

std::vector<std::filesystem::path> write_toy_pair(const std::filesystem::path& dir, const SyntheticPair& pair,
                                                  const SyntheticCorpora& c) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto corpus = [&](const char* name, const std::vector<Sentence>& s) {
    write_corpus(dir / name, s);
    written.push_back(dir / name);
  };
  corpus("l1.train", c.l1_train);
  corpus("l2.train", c.l2_train);
  corpus("test.l1", c.test_l1);
  corpus("test.l2", c.test_l2);
  const CrossLingualSpace space = pair.gold_embeddings();
  write_space(dir / "l1.emb", space, Lang::L1);
  written.push_back(dir / "l1.emb");
  write_space(dir / "l2.emb", space, Lang::L2);
  written.push_back(dir / "l2.emb");
  {
    std::ofstream out(dir / "lexicon.tsv", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "lexicon.tsv").string());
    for (const auto& [a, b] : pair.lexicon()) out << a << '\t' << b << '\n';
    written.push_back(dir / "lexicon.tsv");
  }
  if (!c.parallel_l1.empty()) {
    corpus("parallel.l1", c.parallel_l1);
    corpus("parallel.l2", c.parallel_l2);
  }
  return written;
}

}  // namespace unmt
