#include "unmt/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <map>

namespace unmt {

namespace {

using NGramCounts = std::map<std::vector<std::string>, std::size_t>;

NGramCounts count_ngrams(const Sentence& s, std::size_t n) {
  NGramCounts counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    ++counts[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                      s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

}  // namespace

BleuReport bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references) {
  if (hypotheses.size() != references.size())
    throw ContractError("bleu: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                        std::to_string(references.size()) + " references");
  BleuReport r;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const Sentence& hyp = hypotheses[i];
    const Sentence& ref = references[i];
    r.hyp_length += hyp.size();
    r.ref_length += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      if (hyp.size() < n) continue;
      r.totals[n - 1] += hyp.size() - n + 1;
      const NGramCounts ref_counts = count_ngrams(ref, n);
      for (const auto& [gram, c] : count_ngrams(hyp, n)) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) r.matches[n - 1] += std::min(c, it->second);
      }
    }
  }
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    r.precisions[n] = r.totals[n] ? static_cast<double>(r.matches[n]) / static_cast<double>(r.totals[n]) : 0.0;
    if (r.matches[n] == 0) zero = true;
    else log_sum += std::log(r.precisions[n]);
  }
  if (r.hyp_length == 0) r.brevity_penalty = 0.0;
  else if (r.hyp_length < r.ref_length)
    r.brevity_penalty = std::exp(1.0 - static_cast<double>(r.ref_length) / static_cast<double>(r.hyp_length));
  else r.brevity_penalty = 1.0;
  r.bleu = zero ? 0.0 : 100.0 * r.brevity_penalty * std::exp(log_sum / 4.0);
  return r;
}

std::string format_report(const BleuReport& r) {
  const double ratio = r.ref_length ? static_cast<double>(r.hyp_length) / static_cast<double>(r.ref_length) : 0.0;
  char buf[256];
  std::snprintf(buf, sizeof buf, "BLEU = %.2f, %.1f/%.1f/%.1f/%.1f (BP=%.3f, ratio=%.3f, hyp_len=%zu, ref_len=%zu)",
                r.bleu, 100 * r.precisions[0], 100 * r.precisions[1], 100 * r.precisions[2], 100 * r.precisions[3],
                r.brevity_penalty, ratio, r.hyp_length, r.ref_length);
  return buf;
}

template <typename T>
double perplexity(const TranslationModel<T>& model, std::span<const Ids> src, Lang src_lang, std::span<const Ids> tgt,
                  Lang tgt_lang, std::size_t batch_size) {
  if (src.size() != tgt.size()) throw ContractError("perplexity: source and target sizes differ");
  if (src.empty()) throw ContractError("perplexity: empty corpus");
  if (batch_size == 0) throw ContractError("perplexity: batch_size must be positive");
  double nll = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < src.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, src.size() - start);
    Graph<T> g(false);
    const auto [sum, tokens] = model.teacher_forced_nll(g, make_batch(src.subspan(start, n), src_lang),
                                                        make_batch(tgt.subspan(start, n), tgt_lang));
    nll += sum;
    count += tokens;
  }
  return std::exp(nll / static_cast<double>(count));
}

template double perplexity(const TranslationModel<float>&, std::span<const Ids>, Lang, std::span<const Ids>, Lang,
                           std::size_t);
template double perplexity(const TranslationModel<double>&, std::span<const Ids>, Lang, std::span<const Ids>, Lang,
                           std::size_t);

}  // namespace unmt
