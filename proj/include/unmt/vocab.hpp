#pragma once

// Corpora, per-language vocabularies and padded mini-batches.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "unmt/tensor.hpp"

namespace unmt {

enum class Lang : int { L1 = 0, L2 = 1 };

constexpr int lang_index(Lang l) { return static_cast<int>(l); }
constexpr Lang other(Lang l) { return l == Lang::L1 ? Lang::L2 : Lang::L1; }
const char* lang_tag(Lang l);

using Sentence = std::vector<std::string>;
using Ids = std::vector<int>;

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSos = 2;
  static constexpr int kEos = 3;
  static constexpr std::size_t kReserved = 4;

  explicit Vocabulary(std::string lang = {});

  // Keeps the `cap` most frequent tokens; ties go to the token seen first.
  static Vocabulary build(std::span<const Sentence> corpus, std::size_t cap, std::string lang = {});
  // Regular tokens in id order, starting at kReserved.
  static Vocabulary from_tokens(std::span<const std::string> tokens, std::string lang = {});

  // One token per line; line k holds id k + kReserved.
  static Vocabulary load(const std::filesystem::path& path, std::string lang = {});
  void save(const std::filesystem::path& path) const;

  const std::string& lang() const { return lang_; }
  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  int id(std::string_view token) const;  // kUnk when absent
  const std::string& token(int id) const;
  // Regular tokens only, in id order.
  std::span<const std::string> regular_tokens() const;

  Ids encode(const Sentence& sentence) const;
  // Stops at nothing; special ids render as their bracketed names.
  Sentence decode(std::span<const int> ids) const;

 private:
  void add(std::string token);

  std::string lang_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Padded mini-batch. Every sentence carries a trailing EOS; lengths count it.
struct Batch {
  Lang lang = Lang::L1;
  std::size_t rows = 0;
  std::size_t steps = 0;
  std::vector<int> ids;              // rows x steps, PAD beyond each length
  std::vector<int> lengths;          // tokens + EOS
  std::vector<std::uint8_t> mask;    // rows x steps, set iff t < lengths[row]

  int at(std::size_t row, std::size_t t) const { return ids[row * steps + t]; }
};

Batch make_batch(std::span<const Ids> sentences, Lang lang);

// One epoch: shuffle with rng, cut consecutive groups (the last may be
// smaller) and pad each group to its own longest sentence.
std::vector<Batch> make_batches(std::span<const Ids> corpus, std::size_t batch_size, Rng& rng, Lang lang);

// Endless epoch-by-epoch shuffled index groups over a corpus of fixed size.
class BatchStream {
 public:
  BatchStream(std::size_t corpus_size, std::size_t batch_size, std::uint64_t seed);
  std::vector<std::size_t> next();

 private:
  void reshuffle();

  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

// Whitespace tokenisation of a UTF-8 line.
Sentence tokenize(std::string_view line);
std::string join(const Sentence& sentence);

std::vector<Sentence> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, std::span<const Sentence> corpus);

// Sentences with at most max_len elements, order preserved.
std::vector<Sentence> length_filter(std::span<const Sentence> corpus, std::size_t max_len = 50);

}  // namespace unmt
