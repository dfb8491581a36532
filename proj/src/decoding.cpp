#include "unmt/decoding.hpp"

#include <algorithm>
#include <limits>

namespace unmt {

namespace {

bool emittable(int id) { return id != Vocabulary::kPad && id != Vocabulary::kSos; }

template <typename T>
std::vector<double> log_probs(std::span<const T> logits) {
  std::vector<double> row(logits.begin(), logits.end());
  log_softmax_inplace(std::span<double>(row));
  return row;
}

// The same encoding repeated over `rows` rows.
template <typename T>
Encoded<T> replicate(const Encoded<T>& enc, std::size_t rows) {
  const std::vector<int> zeros(rows, 0);
  Encoded<T> out;
  out.annotations = gather_rows(enc.annotations, std::span<const int>(zeros));
  out.rows = rows;
  out.steps = enc.steps;
  for (std::size_t i = 0; i < rows; ++i) {
    out.mask.insert(out.mask.end(), enc.mask.begin(), enc.mask.begin() + static_cast<std::ptrdiff_t>(enc.steps));
    out.lengths.push_back(enc.lengths[0]);
  }
  return out;
}

}  // namespace

template <typename T>
std::vector<Ids> greedy_decode_batch(const TranslationModel<T>& model, std::span<const Ids> sentences, Lang src,
                                     Lang tgt, std::span<const std::size_t> max_lens) {
  if (sentences.size() != max_lens.size()) throw ContractError("greedy_decode_batch: one max_len per sentence");
  std::vector<Ids> out(sentences.size());
  if (sentences.empty()) return out;
  Graph<T> g(false);
  const Batch batch = make_batch(sentences, src);
  Encoded<T> enc = model.encode(g, batch, src, RunMode{});
  Var<T> keys = model.attention_keys(enc, tgt);
  DecoderState<T> state = model.init_decoder_state(enc, tgt);
  std::vector<int> prev(sentences.size(), Vocabulary::kSos);
  std::vector<std::uint8_t> done(sentences.size(), 0);
  const std::size_t horizon = *std::max_element(max_lens.begin(), max_lens.end());
  const std::size_t vocab = model.vocab_size(tgt);
  for (std::size_t i = 0; i < sentences.size(); ++i) done[i] = max_lens[i] == 0;
  for (std::size_t step = 0; step < horizon; ++step) {
    if (std::all_of(done.begin(), done.end(), [](std::uint8_t d) { return d != 0; })) break;
    StepOutput<T> o = model.decode_step(g, prev, state, enc, keys, tgt, RunMode{});
    state = std::move(o.state);
    auto logits = o.logits.value();
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      int best = -1;
      for (std::size_t v = 0; v < vocab; ++v) {
        if (!emittable(static_cast<int>(v))) continue;
        if (best < 0 || logits[i * vocab + v] > logits[i * vocab + static_cast<std::size_t>(best)]) best = static_cast<int>(v);
      }
      prev[i] = best;
      if (done[i]) continue;
      if (best == Vocabulary::kEos) {
        done[i] = 1;
        continue;
      }
      out[i].push_back(best);
      if (out[i].size() >= max_lens[i]) done[i] = 1;
    }
  }
  return out;
}

template <typename T>
Ids greedy_decode(const TranslationModel<T>& model, const Ids& sentence, Lang src, Lang tgt, std::size_t max_len) {
  const std::size_t cap[1] = {max_len};
  return greedy_decode_batch(model, std::span<const Ids>(&sentence, 1), src, tgt, std::span<const std::size_t>(cap))
      .front();
}

template <typename T>
Hypothesis beam_search_hypothesis(const TranslationModel<T>& model, const Ids& sentence, Lang src, Lang tgt,
                                  std::size_t beam, std::size_t max_len) {
  if (beam < 1) throw ContractError("beam_search: beam must be at least 1");
  Graph<T> g(false);
  const Batch batch = make_batch(std::span<const Ids>(&sentence, 1), src);
  const Encoded<T> enc = model.encode(g, batch, src, RunMode{});
  const Var<T> keys = model.attention_keys(enc, tgt);
  const std::size_t vocab = model.vocab_size(tgt);

  struct Live {
    Ids tokens;
    double score;
  };
  std::vector<Live> alive{{{}, 0.0}};
  DecoderState<T> state = model.init_decoder_state(enc, tgt);
  std::vector<Hypothesis> pool;

  struct Candidate {
    double score;
    std::size_t parent;
    int token;
  };

  for (std::size_t step = 0; step < max_len && !alive.empty(); ++step) {
    const std::size_t k = alive.size();
    const Encoded<T> enc_k = replicate(enc, k);
    const std::vector<int> zeros(k, 0);
    const Var<T> keys_k = gather_rows(keys, std::span<const int>(zeros));
    std::vector<int> prev(k);
    for (std::size_t r = 0; r < k; ++r) prev[r] = alive[r].tokens.empty() ? Vocabulary::kSos : alive[r].tokens.back();
    StepOutput<T> o = model.decode_step(g, prev, state, enc_k, keys_k, tgt, RunMode{});
    auto logits = o.logits.value();

    std::vector<Candidate> cands;
    cands.reserve(k * vocab);
    for (std::size_t r = 0; r < k; ++r) {
      const std::vector<double> lp = log_probs(logits.subspan(r * vocab, vocab));
      for (std::size_t v = 0; v < vocab; ++v)
        if (emittable(static_cast<int>(v))) cands.push_back({alive[r].score + lp[v], r, static_cast<int>(v)});
    }
    const std::size_t keep = std::min(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });

    std::vector<Live> next;
    std::vector<int> parents;
    const bool last = step + 1 == max_len;
    for (std::size_t c = 0; c < keep; ++c) {
      Ids tokens = alive[cands[c].parent].tokens;
      tokens.push_back(cands[c].token);
      if (cands[c].token == Vocabulary::kEos) {
        pool.push_back({std::move(tokens), cands[c].score, true});
      } else if (last) {
        pool.push_back({std::move(tokens), cands[c].score, false});
      } else {
        next.push_back({std::move(tokens), cands[c].score});
        parents.push_back(static_cast<int>(cands[c].parent));
      }
    }
    alive = std::move(next);
    if (alive.empty()) break;
    for (Var<T>& layer : o.state.layers) layer = gather_rows(layer, std::span<const int>(parents));
    state = std::move(o.state);

    // Scores only fall as hypotheses grow, so nothing alive can overtake the pool.
    double best_pool = -std::numeric_limits<double>::infinity();
    for (const Hypothesis& h : pool) best_pool = std::max(best_pool, h.log_prob);
    if (best_pool >= alive.front().score) break;
  }

  if (pool.empty()) return Hypothesis{};  // max_len == 0
  const Hypothesis* best = &pool.front();
  for (const Hypothesis& h : pool)
    if (h.log_prob > best->log_prob) best = &h;
  return *best;
}

template <typename T>
Ids beam_search(const TranslationModel<T>& model, const Ids& sentence, Lang src, Lang tgt, std::size_t beam,
                std::size_t max_len) {
  if (max_len == 0) max_len = default_max_len(sentence.size());
  Hypothesis h = beam_search_hypothesis(model, sentence, src, tgt, beam, max_len);
  if (h.finished) h.tokens.pop_back();
  return h.tokens;
}

#define UNMT_INSTANTIATE(T)                                                                                   \
  template std::vector<Ids> greedy_decode_batch(const TranslationModel<T>&, std::span<const Ids>, Lang, Lang, \
                                                std::span<const std::size_t>);                                \
  template Ids greedy_decode(const TranslationModel<T>&, const Ids&, Lang, Lang, std::size_t);               \
  template Hypothesis beam_search_hypothesis(const TranslationModel<T>&, const Ids&, Lang, Lang, std::size_t, \
                                             std::size_t);                                                    \
  template Ids beam_search(const TranslationModel<T>&, const Ids&, Lang, Lang, std::size_t, std::size_t);

UNMT_INSTANTIATE(float)
UNMT_INSTANTIATE(double)

#undef UNMT_INSTANTIATE

}  // namespace unmt
