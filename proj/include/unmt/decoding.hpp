#pragma once

// Greedy and beam-search decoding. Both run in evaluation mode on a graph
// that records no gradients. PAD and SOS are never emitted.

#include <cstddef>
#include <span>
#include <vector>

#include "unmt/model.hpp"

namespace unmt {

// Inference length cap used when the caller gives none.
constexpr std::size_t default_max_len(std::size_t source_len) { return 2 * source_len + 10; }

struct Hypothesis {
  Ids tokens;             // ends with EOS iff finished
  double log_prob = 0.0;  // sum of per-step log-softmax terms
  bool finished = false;
};

// Argmax decoding of several sentences at once; row i stops at EOS or after
// max_lens[i] tokens. Outputs exclude EOS.
template <typename T>
std::vector<Ids> greedy_decode_batch(const TranslationModel<T>& model, std::span<const Ids> sentences, Lang src,
                                     Lang tgt, std::span<const std::size_t> max_lens);

template <typename T>
Ids greedy_decode(const TranslationModel<T>& model, const Ids& sentence, Lang src, Lang tgt, std::size_t max_len);

// Beam search with no length or coverage penalty: hypotheses that emit EOS
// retire to a pool, survivors at max_len retire unfinished, and the pool's
// best raw log-probability wins. Ties prefer lower parent index, then lower
// token id.
template <typename T>
Hypothesis beam_search_hypothesis(const TranslationModel<T>& model, const Ids& sentence, Lang src, Lang tgt,
                                  std::size_t beam, std::size_t max_len);

// Tokens of the best hypothesis, EOS removed.
template <typename T>
Ids beam_search(const TranslationModel<T>& model, const Ids& sentence, Lang src, Lang tgt, std::size_t beam = 12,
                std::size_t max_len = 0);

}  // namespace unmt
