#pragma once

// Corpus BLEU with multi-bleu.perl semantics and teacher-forced perplexity.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "unmt/model.hpp"

namespace unmt {

struct BleuReport {
  double bleu = 0.0;  // 0..100
  std::array<double, 4> precisions{};
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  double brevity_penalty = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
};

// Single-reference corpus BLEU-4, unsmoothed: zero whenever some n-gram
// order has no match.
BleuReport bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references);

// "BLEU = 84.65, 100.0/100.0/100.0/100.0 (BP=0.846, ratio=0.857, hyp_len=6, ref_len=7)"
std::string format_report(const BleuReport& report);

// exp of the mean per-token negative log-likelihood of tgt given src under
// teacher forcing; EOS counts, padding does not.
template <typename T>
double perplexity(const TranslationModel<T>& model, std::span<const Ids> src, Lang src_lang, std::span<const Ids> tgt,
                  Lang tgt_lang, std::size_t batch_size = 64);

}  // namespace unmt
