#include "unmt/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace unmt {

const char* lang_tag(Lang l) { return l == Lang::L1 ? "l1" : "l2"; }

namespace {
const char* const kSpecialNames[Vocabulary::kReserved] = {"<pad>", "<unk>", "<s>", "</s>"};
}

Vocabulary::Vocabulary(std::string lang) : lang_(std::move(lang)) {
  for (const char* name : kSpecialNames) tokens_.emplace_back(name);
}

void Vocabulary::add(std::string token) {
  if (index_.contains(token)) throw ContractError("vocabulary: duplicate token '" + token + "'");
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(std::span<const Sentence> corpus, std::size_t cap, std::string lang) {
  if (cap < 1) throw ContractError("build_vocab: cap must be at least 1");
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::pair<std::string, std::size_t>> counts;  // first-occurrence order
  for (const Sentence& s : corpus) {
    for (const std::string& tok : s) {
      auto [it, fresh] = slot.try_emplace(tok, counts.size());
      if (fresh) counts.emplace_back(tok, 0);
      ++counts[it->second].second;
    }
  }
  if (counts.empty()) throw EmptyInputError("build_vocab: corpus contains no tokens");
  std::stable_sort(counts.begin(), counts.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v(std::move(lang));
  for (std::size_t i = 0; i < counts.size() && i < cap; ++i) v.add(counts[i].first);
  return v;
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens, std::string lang) {
  Vocabulary v(std::move(lang));
  for (const std::string& t : tokens) v.add(t);
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path, std::string lang) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.find_first_of(" \t") != std::string::npos) {
      throw ParseError("vocabulary entry must be a single token", n);
    }
    tokens.push_back(line);
  }
  return from_tokens(tokens, std::move(lang));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file " + path.string());
  for (const std::string& t : regular_tokens()) out << t << '\n';
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("vocabulary id " + std::to_string(id) + " outside [0, " + std::to_string(size()) + ")");
  }
  return tokens_[id];
}

std::span<const std::string> Vocabulary::regular_tokens() const {
  return std::span<const std::string>(tokens_).subspan(kReserved);
}

Ids Vocabulary::encode(const Sentence& sentence) const {
  Ids out;
  out.reserve(sentence.size());
  for (const std::string& t : sentence) out.push_back(id(t));
  return out;
}

Sentence Vocabulary::decode(std::span<const int> ids) const {
  Sentence out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

// ---------------------------------------------------------------------------

Batch make_batch(std::span<const Ids> sentences, Lang lang) {
  Batch b;
  b.lang = lang;
  b.rows = sentences.size();
  for (const Ids& s : sentences) b.steps = std::max(b.steps, s.size() + 1);
  b.ids.assign(b.rows * b.steps, Vocabulary::kPad);
  b.mask.assign(b.rows * b.steps, 0);
  b.lengths.reserve(b.rows);
  for (std::size_t i = 0; i < b.rows; ++i) {
    const Ids& s = sentences[i];
    std::copy(s.begin(), s.end(), b.ids.begin() + static_cast<std::ptrdiff_t>(i * b.steps));
    b.ids[i * b.steps + s.size()] = Vocabulary::kEos;
    b.lengths.push_back(static_cast<int>(s.size() + 1));
    std::fill_n(b.mask.begin() + static_cast<std::ptrdiff_t>(i * b.steps), s.size() + 1, 1);
  }
  return b;
}

std::vector<Batch> make_batches(std::span<const Ids> corpus, std::size_t batch_size, Rng& rng, Lang lang) {
  if (batch_size < 1) throw ContractError("make_batches: batch_size must be at least 1");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::vector<Ids> group;
    for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i)
      group.push_back(corpus[order[i]]);
    out.push_back(make_batch(group, lang));
  }
  return out;
}

BatchStream::BatchStream(std::size_t corpus_size, std::size_t batch_size, std::uint64_t seed)
    : batch_size_(batch_size), order_(corpus_size), rng_(seed) {
  if (batch_size < 1) throw ContractError("BatchStream: batch_size must be at least 1");
  if (corpus_size == 0) throw EmptyInputError("BatchStream: empty corpus");
  std::iota(order_.begin(), order_.end(), 0);
  reshuffle();
}

void BatchStream::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

std::vector<std::size_t> BatchStream::next() {
  if (cursor_ >= order_.size()) reshuffle();
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::vector<std::size_t> group(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return group;
}

// ---------------------------------------------------------------------------

Sentence tokenize(std::string_view line) {
  Sentence out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r' || line[i] == '\n')) ++i;
    std::size_t j = i;
    while (j < line.size() && !(line[j] == ' ' || line[j] == '\t' || line[j] == '\r' || line[j] == '\n')) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(const Sentence& sentence) {
  std::string out;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (i) out += ' ';
    out += sentence[i];
  }
  return out;
}

std::vector<Sentence> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file " + path.string());
  std::vector<Sentence> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(tokenize(line));
  return out;
}

void write_corpus(const std::filesystem::path& path, std::span<const Sentence> corpus) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file " + path.string());
  for (const Sentence& s : corpus) out << join(s) << '\n';
}

std::vector<Sentence> length_filter(std::span<const Sentence> corpus, std::size_t max_len) {
  if (max_len < 1) throw ContractError("length_filter: max_len must be at least 1");
  std::vector<Sentence> out;
  for (const Sentence& s : corpus)
    if (s.size() <= max_len) out.push_back(s);
  return out;
}

}  // namespace unmt
