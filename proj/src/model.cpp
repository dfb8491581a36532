#include "unmt/model.hpp"

#include <algorithm>

namespace unmt {

template <typename T>
Var<T> gru_cell(Var<T> x, Var<T> h, const GruParams<T>& p) {
  Graph<T>& g = x.graph();
  auto gate = [&](Parameter<T>* w, Parameter<T>* u, Parameter<T>* b, Var<T> hidden) {
    return add_bias(add(matmul(x, g.parameter(*w)), matmul(hidden, g.parameter(*u))), g.parameter(*b));
  };
  if (x.dim(0) != h.dim(0)) {
    throw DimensionError("gru_cell: input " + shape_string(x.shape()) + " and state " + shape_string(h.shape()) +
                         " disagree on rows");
  }
  Var<T> z = sigmoid(gate(p.w_z, p.u_z, p.b_z, h));
  Var<T> r = sigmoid(gate(p.w_r, p.u_r, p.b_r, h));
  Var<T> candidate = tanh(gate(p.w_h, p.u_h, p.b_h, mul(r, h)));
  return add(mul(affine(z, T(-1), T(1)), h), mul(z, candidate));
}

template <typename T>
Parameter<T>* TranslationModel<T>::make(const std::string& name, Shape shape, bool trainable) {
  params_.push_back(std::make_unique<Parameter<T>>(name, std::move(shape), trainable));
  return params_.back().get();
}

template <typename T>
GruParams<T> TranslationModel<T>::make_gru(const std::string& prefix, std::size_t in, std::size_t hidden) {
  GruParams<T> p;
  p.w_z = make(prefix + ".w_z", {in, hidden});
  p.w_r = make(prefix + ".w_r", {in, hidden});
  p.w_h = make(prefix + ".w_h", {in, hidden});
  p.u_z = make(prefix + ".u_z", {hidden, hidden});
  p.u_r = make(prefix + ".u_r", {hidden, hidden});
  p.u_h = make(prefix + ".u_h", {hidden, hidden});
  p.b_z = make(prefix + ".b_z", {hidden});
  p.b_r = make(prefix + ".b_r", {hidden});
  p.b_h = make(prefix + ".b_h", {hidden});
  return p;
}

template <typename T>
TranslationModel<T>::TranslationModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  const std::size_t e = config.emb_dim, h = config.hidden_dim;
  if (e == 0 || h == 0 || config.layers == 0) throw ContractError("model: dimensions and layer count must be positive");
  for (std::size_t v : config.vocab_size)
    if (v <= Vocabulary::kReserved) throw ContractError("model: each vocabulary needs at least one regular token");

  for (Lang l : {Lang::L1, Lang::L2}) {
    enc_embedding_[lang_index(l)] =
        make(std::string("encoder.embedding.") + lang_tag(l), {config.vocab_size[lang_index(l)], e}, false);
  }
  for (std::size_t k = 0; k < config.layers; ++k) {
    const std::size_t in = k == 0 ? e : 2 * h;
    enc_fwd_.push_back(make_gru("encoder.layer" + std::to_string(k) + ".fwd", in, h));
    enc_bwd_.push_back(make_gru("encoder.layer" + std::to_string(k) + ".bwd", in, h));
  }
  for (Lang l : {Lang::L1, Lang::L2}) {
    Decoder& d = dec_[lang_index(l)];
    const std::string prefix = std::string("decoder.") + lang_tag(l);
    const std::size_t v = config.vocab_size[lang_index(l)];
    d.embedding = make(prefix + ".embedding", {v, e});
    for (std::size_t k = 0; k < config.layers; ++k)
      d.layers.push_back(make_gru(prefix + ".layer" + std::to_string(k), k == 0 ? e : h, h));
    d.w_a = make(prefix + ".attention.w_a", {2 * h, h});
    d.w_c = make(prefix + ".attention.w_c", {3 * h, h});
    d.out_w = make(prefix + ".output.w", {h, v});
    d.out_b = make(prefix + ".output.b", {v});
    for (std::size_t k = 0; k < config.layers; ++k) {
      d.init_w.push_back(make(prefix + ".init" + std::to_string(k) + ".w", {2 * h, h}));
      d.init_b.push_back(make(prefix + ".init" + std::to_string(k) + ".b", {h}));
    }
  }

  Rng rng(seed);
  std::uniform_real_distribution<double> init(-config.init_range, config.init_range);
  for (auto& p : params_) {
    if (!p->trainable) continue;
    for (T& v : p->value) v = static_cast<T>(init(rng));
  }
}

template <typename T>
void TranslationModel<T>::set_fixed_embeddings(Lang lang, const Matrix<float>& embeddings) {
  Parameter<T>& p = *enc_embedding_[lang_index(lang)];
  if (embeddings.rows != p.shape[0] || embeddings.cols != p.shape[1]) {
    throw DimensionError("fixed embeddings for " + std::string(lang_tag(lang)) + " must be " + shape_string(p.shape) +
                         ", got [" + std::to_string(embeddings.rows) + "x" + std::to_string(embeddings.cols) + "]");
  }
  std::transform(embeddings.data.begin(), embeddings.data.end(), p.value.begin(),
                 [](float v) { return static_cast<T>(v); });
}

template <typename T>
Encoded<T> TranslationModel<T>::encode(Graph<T>& g, const Batch& batch, Lang lang, RunMode mode) const {
  if (batch.lang != lang) {
    throw ContractError(std::string("encode: batch is tagged ") + lang_tag(batch.lang) + " but was fed as " +
                        lang_tag(lang));
  }
  if (batch.rows == 0 || batch.steps == 0) throw ContractError("encode: empty batch");
  const std::size_t b = batch.rows, steps = batch.steps, h = config_.hidden_dim;
  Var<T> table = g.parameter(*enc_embedding_[lang_index(lang)]);

  std::vector<std::vector<std::uint8_t>> valid(steps, std::vector<std::uint8_t>(b));
  std::vector<bool> all_valid(steps, true);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < b; ++i) {
      valid[t][i] = batch.mask[i * steps + t];
      if (!valid[t][i]) all_valid[t] = false;
    }

  std::vector<Var<T>> inputs(steps);
  std::vector<int> ids(b);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < b; ++i) ids[i] = batch.at(i, t);
    inputs[t] = gather_rows(table, std::span<const int>(ids));
  }

  const Var<T> zero = g.constant({b, h}, std::vector<T>(b * h, T(0)));
  for (std::size_t k = 0; k < config_.layers; ++k) {
    std::vector<Var<T>> fwd(steps), bwd(steps);
    Var<T> state = zero;
    for (std::size_t t = 0; t < steps; ++t) {
      Var<T> next = gru_cell(inputs[t], state, enc_fwd_[k]);
      state = all_valid[t] ? next : blend_rows(next, state, std::span<const std::uint8_t>(valid[t]));
      fwd[t] = state;
    }
    state = zero;
    for (std::size_t t = steps; t-- > 0;) {
      Var<T> next = gru_cell(inputs[t], state, enc_bwd_[k]);
      state = all_valid[t] ? next : blend_rows(next, state, std::span<const std::uint8_t>(valid[t]));
      bwd[t] = state;
    }
    for (std::size_t t = 0; t < steps; ++t) {
      const std::array<Var<T>, 2> pair{fwd[t], bwd[t]};
      inputs[t] = concat_cols(std::span<const Var<T>>(pair));
      if (k + 1 < config_.layers) inputs[t] = dropout(inputs[t], config_.dropout, mode.dropout_rng);
    }
  }

  Encoded<T> enc;
  enc.annotations = stack_steps(std::span<const Var<T>>(inputs));
  enc.mask = batch.mask;
  enc.lengths = batch.lengths;
  enc.rows = b;
  enc.steps = steps;
  return enc;
}

template <typename T>
Var<T> TranslationModel<T>::attention_keys(const Encoded<T>& enc, Lang tgt) const {
  Graph<T>& g = enc.annotations.graph();
  const std::size_t h = config_.hidden_dim;
  Var<T> flat = reshape(enc.annotations, {enc.rows * enc.steps, 2 * h});
  return reshape(matmul(flat, g.parameter(*dec_[lang_index(tgt)].w_a)), {enc.rows, enc.steps, h});
}

template <typename T>
DecoderState<T> TranslationModel<T>::init_decoder_state(const Encoded<T>& enc, Lang tgt) const {
  Graph<T>& g = enc.annotations.graph();
  const Decoder& d = dec_[lang_index(tgt)];
  Var<T> mean = masked_mean_steps(enc.annotations, std::span<const std::uint8_t>(enc.mask));
  DecoderState<T> s;
  for (std::size_t k = 0; k < config_.layers; ++k)
    s.layers.push_back(tanh(add_bias(matmul(mean, g.parameter(*d.init_w[k])), g.parameter(*d.init_b[k]))));
  return s;
}

template <typename T>
Attention<T> TranslationModel<T>::attend(Var<T> h_dec, const Encoded<T>& enc, Var<T> keys, Lang tgt) const {
  Graph<T>& g = h_dec.graph();
  Attention<T> a;
  Var<T> scores = batched_dot(h_dec, keys);
  a.weights = masked_softmax_rows(scores, std::span<const std::uint8_t>(enc.mask));
  a.context = weighted_sum(a.weights, enc.annotations);
  const std::array<Var<T>, 2> parts{a.context, h_dec};
  a.attentional = tanh(matmul(concat_cols(std::span<const Var<T>>(parts)), g.parameter(*dec_[lang_index(tgt)].w_c)));
  return a;
}

template <typename T>
Var<T> TranslationModel<T>::attentional_step(Graph<T>& g, std::span<const int> prev, DecoderState<T>& state,
                                             const Encoded<T>& enc, Var<T> keys, Lang tgt, RunMode mode,
                                             Attention<T>* attention) const {
  const Decoder& d = dec_[lang_index(tgt)];
  if (prev.size() != enc.rows) {
    throw ContractError("decode_step: " + std::to_string(prev.size()) + " previous tokens for " +
                        std::to_string(enc.rows) + " rows");
  }
  Var<T> x = gather_rows(g.parameter(*d.embedding), prev);
  for (std::size_t k = 0; k < config_.layers; ++k) {
    if (k > 0) x = dropout(x, config_.dropout, mode.dropout_rng);
    state.layers[k] = gru_cell(x, state.layers[k], d.layers[k]);
    x = state.layers[k];
  }
  Attention<T> a = attend(x, enc, keys, tgt);
  if (attention) *attention = a;
  return a.attentional;
}

template <typename T>
Var<T> TranslationModel<T>::project(Var<T> attentional, Lang tgt) const {
  Graph<T>& g = attentional.graph();
  const Decoder& d = dec_[lang_index(tgt)];
  return add_bias(matmul(attentional, g.parameter(*d.out_w)), g.parameter(*d.out_b));
}

template <typename T>
StepOutput<T> TranslationModel<T>::decode_step(Graph<T>& g, std::span<const int> prev, const DecoderState<T>& state,
                                               const Encoded<T>& enc, Var<T> keys, Lang tgt, RunMode mode) const {
  if (state.layers.size() != config_.layers) throw ContractError("decode_step: state has the wrong layer count");
  StepOutput<T> out;
  out.state = state;
  Var<T> att = attentional_step(g, prev, out.state, enc, keys, tgt, mode, &out.attention);
  out.logits = project(att, tgt);
  return out;
}

namespace {

// Gold previous tokens (SOS first) and targets, laid out step-major so that
// row t*rows + i belongs to sentence i at step t.
struct TeacherInputs {
  std::vector<std::vector<int>> prev;
  std::vector<int> targets;
  std::vector<std::uint8_t> mask;
};

TeacherInputs teacher_inputs(const Batch& tgt) {
  TeacherInputs in;
  in.prev.assign(tgt.steps, std::vector<int>(tgt.rows));
  in.targets.resize(tgt.rows * tgt.steps);
  in.mask.resize(tgt.rows * tgt.steps);
  for (std::size_t t = 0; t < tgt.steps; ++t)
    for (std::size_t i = 0; i < tgt.rows; ++i) {
      in.prev[t][i] = t == 0 ? Vocabulary::kSos : tgt.at(i, t - 1);
      in.targets[t * tgt.rows + i] = tgt.at(i, t);
      in.mask[t * tgt.rows + i] = tgt.mask[i * tgt.steps + t];
    }
  return in;
}

}  // namespace

template <typename T>
Var<T> TranslationModel<T>::forward_teacher_forced(Graph<T>& g, const Batch& src, const Batch& tgt,
                                                   RunMode mode) const {
  if (src.rows != tgt.rows) {
    throw ContractError("forward_teacher_forced: " + std::to_string(src.rows) + " source rows vs " +
                        std::to_string(tgt.rows) + " target rows");
  }
  Encoded<T> enc = encode(g, src, src.lang, mode);
  Var<T> keys = attention_keys(enc, tgt.lang);
  DecoderState<T> state = init_decoder_state(enc, tgt.lang);
  TeacherInputs in = teacher_inputs(tgt);
  std::vector<Var<T>> steps;
  steps.reserve(tgt.steps);
  for (std::size_t t = 0; t < tgt.steps; ++t)
    steps.push_back(attentional_step(g, in.prev[t], state, enc, keys, tgt.lang, mode, nullptr));
  Var<T> logits = project(concat_rows(std::span<const Var<T>>(steps)), tgt.lang);
  return cross_entropy_from_logits(logits, std::span<const int>(in.targets), std::span<const std::uint8_t>(in.mask));
}

template <typename T>
std::pair<double, std::size_t> TranslationModel<T>::teacher_forced_nll(Graph<T>& g, const Batch& src,
                                                                      const Batch& tgt) const {
  Var<T> loss = forward_teacher_forced(g, src, tgt, RunMode{});
  std::size_t count = 0;
  for (std::uint8_t m : tgt.mask) count += m;
  return {static_cast<double>(loss.item()) * static_cast<double>(count), count};
}

template <typename T>
std::vector<Parameter<T>*> TranslationModel<T>::parameters() const {
  std::vector<Parameter<T>*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

template <typename T>
std::vector<Parameter<T>*> TranslationModel<T>::trainable_parameters() const {
  std::vector<Parameter<T>*> out;
  for (const auto& p : params_)
    if (p->trainable) out.push_back(p.get());
  return out;
}

template <typename T>
Parameter<T>* TranslationModel<T>::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

template <typename To, typename From>
void copy_parameters(const TranslationModel<From>& from, TranslationModel<To>& to) {
  for (Parameter<To>* dst : to.parameters()) {
    Parameter<From>* src = from.find(dst->name);
    if (!src || src->shape != dst->shape) throw ContractError("copy_parameters: no matching source for " + dst->name);
    std::transform(src->value.begin(), src->value.end(), dst->value.begin(),
                   [](From v) { return static_cast<To>(v); });
  }
}

template Var<float> gru_cell(Var<float>, Var<float>, const GruParams<float>&);
template Var<double> gru_cell(Var<double>, Var<double>, const GruParams<double>&);
template class TranslationModel<float>;
template class TranslationModel<double>;
template void copy_parameters(const TranslationModel<float>&, TranslationModel<double>&);
template void copy_parameters(const TranslationModel<double>&, TranslationModel<float>&);
template void copy_parameters(const TranslationModel<float>&, TranslationModel<float>&);
template void copy_parameters(const TranslationModel<double>&, TranslationModel<double>&);

}  // namespace unmt
