#pragma once

// Toy language pairs with a known lexicon and word order, for checking that
// training learns what monolingual data alone can teach.
//
// Latent L1 sentences are sampled token by token. The L2 side of a sentence
// maps every token through a random bijection tau and swaps the tokens at
// positions 2i and 2i+1 (an odd tail stays put).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "unmt/embeddings.hpp"

namespace unmt {

struct LangPairSpec {
  std::size_t vocab = 100;
  std::size_t min_len = 3;
  std::size_t max_len = 10;
  double zipf = 1.0;
  // Tokens are dealt round-robin into this many classes and position p draws
  // from class p % word_classes (Zipfian within the class). With one class
  // every position is i.i.d. and the swap is invisible to monolingual data.
  std::size_t word_classes = 2;
  bool permute_lexicon = true;  // false: tau is the identity
  bool reorder = true;
  std::size_t emb_dim = 32;
  double perturbation = 0.0;  // std-dev of Gaussian noise on L2 vectors
  std::uint64_t seed = 1;
  std::string l1_prefix = "x";
  std::string l2_prefix = "y";

  void validate() const;  // throws ConfigError naming the offending field
};

struct SyntheticCorpora {
  std::vector<Sentence> l1_train;
  std::vector<Sentence> l2_train;
  std::vector<Sentence> test_l1;
  std::vector<Sentence> test_l2;
  std::vector<Sentence> parallel_l1;
  std::vector<Sentence> parallel_l2;
};

class SyntheticPair {
 public:
  explicit SyntheticPair(LangPairSpec spec);

  const LangPairSpec& spec() const { return spec_; }
  // Latent token index -> word.
  std::string l1_word(std::size_t token) const;
  std::string l2_word(std::size_t token) const;  // already mapped through tau
  std::size_t tau(std::size_t token) const { return tau_[token]; }

  Sentence to_l1(const std::vector<std::size_t>& latent) const;
  Sentence to_l2(const std::vector<std::size_t>& latent) const;

  // All latent sentences are distinct, so the monolingual pools, the test
  // set and the parallel set never share a sentence.
  SyntheticCorpora generate(std::size_t n_train, std::size_t n_test, std::size_t n_parallel = 0) const;

  // Unit-norm random vector per L1 word; the tau image gets the same vector
  // plus optional noise, renormalised.
  CrossLingualSpace gold_embeddings() const;

  // "x12\ty57" per L1 word in token order.
  std::vector<std::pair<std::string, std::string>> lexicon() const;

 private:
  LangPairSpec spec_;
  std::vector<std::size_t> tau_;
};

// Pairwise swap of positions (2i, 2i+1).
template <typename Token>
std::vector<Token> swap_pairs(std::vector<Token> tokens) {
  for (std::size_t i = 0; i + 1 < tokens.size(); i += 2) std::swap(tokens[i], tokens[i + 1]);
  return tokens;
}

// Writes l1.train, l2.train, test.l1, test.l2, l1.emb, l2.emb, lexicon.tsv
// and, when parallel data exists, parallel.l1 and parallel.l2. Returns the
// written paths.
std::vector<std::filesystem::path> write_toy_pair(const std::filesystem::path& dir, const SyntheticPair& pair,
                                                  const SyntheticCorpora& corpora);

}  // namespace unmt
