#pragma once

// Byte pair encoding, learned and applied one language at a time.
//
// Words are split into UTF-8 characters followed by a separate end-of-word
// symbol "</w>". Applied output marks every non-final piece of a word with a
// trailing "@@".

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unmt/vocab.hpp"

namespace unmt {

inline constexpr const char* kEndOfWord = "</w>";
inline constexpr const char* kContinuation = "@@";

using SymbolPair = std::pair<std::string, std::string>;

class MergeTable {
 public:
  MergeTable() = default;
  MergeTable(std::vector<SymbolPair> merges, std::string lang = {});

  std::span<const SymbolPair> merges() const { return merges_; }
  std::size_t size() const { return merges_.size(); }
  bool empty() const { return merges_.empty(); }
  const std::string& lang() const { return lang_; }

  // Learned position of a pair, or -1.
  long rank(const std::string& left, const std::string& right) const;

  // Header line, then "left right" per merge in learned order.
  void save(const std::filesystem::path& path) const;
  static MergeTable load(const std::filesystem::path& path, std::string lang = {});
  std::string serialize() const;
  static MergeTable deserialize(const std::string& text, std::string lang = {});

 private:
  std::vector<SymbolPair> merges_;
  std::map<SymbolPair, long> ranks_;
  std::string lang_;
};

// Greedy merge learning. Stops after num_ops merges or once the most frequent
// pair occurs at most once; frequency ties go to the lexicographically
// smallest pair.
MergeTable learn_bpe(const std::map<std::string, std::size_t>& word_freqs, std::size_t num_ops,
                     std::string lang = {});
std::map<std::string, std::size_t> word_frequencies(std::span<const Sentence> corpus);

// Internal symbols of one word after replaying the merges; the last symbol
// ends with "</w>" (possibly being exactly "</w>").
std::vector<std::string> segment_word(const std::string& word, const MergeTable& merges);

Sentence apply_bpe(const Sentence& sentence, const MergeTable& merges);
// Joins every token ending in "@@" with its successor.
Sentence undo_bpe(const Sentence& tokens);

std::vector<std::string> utf8_characters(const std::string& word);

}  // namespace unmt
