#include "unmt/bpe.hpp"

#include <fstream>
#include <sstream>

namespace unmt {

namespace {

constexpr const char* kHeader = "#version: 0.2";

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Merges non-overlapping occurrences of (left, right), scanning left to right.
bool merge_pair(std::vector<std::string>& symbols, const std::string& left, const std::string& right) {
  bool changed = false;
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
      out.push_back(left + right);
      ++i;
      changed = true;
    } else {
      out.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(out);
  return changed;
}

std::vector<std::string> initial_symbols(const std::string& word) {
  std::vector<std::string> symbols = utf8_characters(word);
  symbols.emplace_back(kEndOfWord);
  return symbols;
}

}  // namespace

std::vector<std::string> utf8_characters(const std::string& word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const auto lead = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    len = std::min(len, word.size() - i);
    out.push_back(word.substr(i, len));
    i += len;
  }
  return out;
}

MergeTable::MergeTable(std::vector<SymbolPair> merges, std::string lang)
    : merges_(std::move(merges)), lang_(std::move(lang)) {
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    if (!ranks_.emplace(merges_[i], static_cast<long>(i)).second) {
      throw FormatError("merge table lists (" + merges_[i].first + ", " + merges_[i].second + ") twice");
    }
  }
}

long MergeTable::rank(const std::string& left, const std::string& right) const {
  auto it = ranks_.find({left, right});
  return it == ranks_.end() ? -1 : it->second;
}

std::string MergeTable::serialize() const {
  std::string out = std::string(kHeader) + "\n";
  for (const auto& [l, r] : merges_) out += l + " " + r + "\n";
  return out;
}

MergeTable MergeTable::deserialize(const std::string& text, std::string lang) {
  std::istringstream in(text);
  std::string line;
  std::vector<SymbolPair> merges;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (n == 1 && line.rfind("#version", 0) == 0) continue;
    Sentence parts = tokenize(line);
    if (parts.empty()) continue;
    if (parts.size() != 2) throw ParseError("merge line must hold two symbols", n);
    merges.emplace_back(parts[0], parts[1]);
  }
  return MergeTable(std::move(merges), std::move(lang));
}

void MergeTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write merge file " + path.string());
  out << serialize();
}

MergeTable MergeTable::load(const std::filesystem::path& path, std::string lang) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open merge file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str(), std::move(lang));
}

std::map<std::string, std::size_t> word_frequencies(std::span<const Sentence> corpus) {
  std::map<std::string, std::size_t> freqs;
  for (const Sentence& s : corpus)
    for (const std::string& w : s) ++freqs[w];
  return freqs;
}

MergeTable learn_bpe(const std::map<std::string, std::size_t>& word_freqs, std::size_t num_ops,
                     std::string lang) {
  if (word_freqs.empty()) throw EmptyInputError("learn_bpe: no words");
  std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
  words.reserve(word_freqs.size());
  for (const auto& [w, c] : word_freqs) words.emplace_back(initial_symbols(w), c);

  std::vector<SymbolPair> merges;
  while (merges.size() < num_ops) {
    std::map<SymbolPair, std::size_t> counts;
    for (const auto& [symbols, c] : words)
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) counts[{symbols[i], symbols[i + 1]}] += c;
    const SymbolPair* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [pair, c] : counts) {
      if (c > best_count) {
        best = &pair;
        best_count = c;
      }
    }
    if (best == nullptr || best_count <= 1) break;
    const SymbolPair chosen = *best;
    for (auto& [symbols, c] : words) merge_pair(symbols, chosen.first, chosen.second);
    merges.push_back(chosen);
  }
  return MergeTable(std::move(merges), std::move(lang));
}

std::vector<std::string> segment_word(const std::string& word, const MergeTable& merges) {
  std::vector<std::string> symbols = initial_symbols(word);
  while (symbols.size() > 1) {
    long best = -1;
    std::size_t at = 0;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      const long r = merges.rank(symbols[i], symbols[i + 1]);
      if (r >= 0 && (best < 0 || r < best)) {
        best = r;
        at = i;
      }
    }
    if (best < 0) break;
    const std::string left = symbols[at], right = symbols[at + 1];
    merge_pair(symbols, left, right);
  }
  return symbols;
}

Sentence apply_bpe(const Sentence& sentence, const MergeTable& merges) {
  const std::string eow = kEndOfWord;
  Sentence out;
  for (const std::string& word : sentence) {
    std::vector<std::string> symbols = segment_word(word, merges);
    if (symbols.back() == eow) {
      symbols.pop_back();
    } else {
      symbols.back().resize(symbols.back().size() - eow.size());
    }
    for (std::size_t i = 0; i < symbols.size(); ++i)
      out.push_back(i + 1 < symbols.size() ? symbols[i] + kContinuation : symbols[i]);
  }
  return out;
}

Sentence undo_bpe(const Sentence& tokens) {
  const std::string marker = kContinuation;
  Sentence out;
  std::string pending;
  bool open = false;
  for (const std::string& t : tokens) {
    if (ends_with(t, marker)) {
      pending += t.substr(0, t.size() - marker.size());
      open = true;
    } else {
      out.push_back(pending + t);
      pending.clear();
      open = false;
    }
  }
  if (open) throw MalformedInputError("undo_bpe: last token carries a continuation marker");
  return out;
}

}  // namespace unmt
