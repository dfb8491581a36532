#pragma once

// Dual attentional encoder-decoder.
//
// One two-layer bidirectional GRU encoder serves both languages and reads
// fixed (non-trainable) cross-lingual embeddings, one matrix per language.
// Each language owns a decoder: trainable input embeddings, a stack of GRU
// layers, global attention with a bilinear ("general") score, and an output
// projection onto that language's vocabulary.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "unmt/embeddings.hpp"
#include "unmt/tensor.hpp"
#include "unmt/vocab.hpp"

namespace unmt {

struct ModelConfig {
  std::size_t emb_dim = 300;
  std::size_t hidden_dim = 600;
  std::size_t layers = 2;
  std::array<std::size_t, 2> vocab_size{0, 0};
  double dropout = 0.3;
  // Trainable parameters start uniform in [-init_range, init_range].
  double init_range = 0.1;
};

// Dropout is active only when an rng is supplied.
struct RunMode {
  Rng* dropout_rng = nullptr;
  bool training() const { return dropout_rng != nullptr; }
};

template <typename T>
struct GruParams {
  Parameter<T>* w_z = nullptr;
  Parameter<T>* w_r = nullptr;
  Parameter<T>* w_h = nullptr;
  Parameter<T>* u_z = nullptr;
  Parameter<T>* u_r = nullptr;
  Parameter<T>* u_h = nullptr;
  Parameter<T>* b_z = nullptr;
  Parameter<T>* b_r = nullptr;
  Parameter<T>* b_h = nullptr;

  std::array<Parameter<T>*, 9> all() const { return {w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h}; }
};

// z = s(x W_z + h U_z + b_z), r = s(x W_r + h U_r + b_r),
// c = tanh(x W_h + (r * h) U_h + b_h), h' = (1 - z) * h + z * c.
template <typename T>
Var<T> gru_cell(Var<T> x, Var<T> h, const GruParams<T>& p);

template <typename T>
struct Encoded {
  Var<T> annotations;  // [rows x steps x 2*hidden]
  std::vector<std::uint8_t> mask;
  std::vector<int> lengths;
  std::size_t rows = 0;
  std::size_t steps = 0;
};

template <typename T>
struct DecoderState {
  std::vector<Var<T>> layers;  // one [rows x hidden] per layer
};

template <typename T>
struct Attention {
  Var<T> context;      // [rows x 2*hidden]
  Var<T> weights;      // [rows x steps]
  Var<T> attentional;  // tanh(W_c [context; h]) : [rows x hidden]
};

template <typename T>
struct StepOutput {
  Var<T> logits;  // [rows x vocab]
  DecoderState<T> state;
  Attention<T> attention;
};

template <typename T>
class TranslationModel {
 public:
  TranslationModel(const ModelConfig& config, std::uint64_t seed);
  TranslationModel(const TranslationModel&) = delete;
  TranslationModel& operator=(const TranslationModel&) = delete;
  TranslationModel(TranslationModel&&) noexcept = default;
  TranslationModel& operator=(TranslationModel&&) noexcept = default;

  const ModelConfig& config() const { return config_; }
  std::size_t vocab_size(Lang l) const { return config_.vocab_size[lang_index(l)]; }

  void set_fixed_embeddings(Lang lang, const Matrix<float>& embeddings);

  Encoded<T> encode(Graph<T>& g, const Batch& batch, Lang lang, RunMode mode) const;
  // Key projection of the annotations for the given decoder: [rows x steps x hidden].
  Var<T> attention_keys(const Encoded<T>& enc, Lang tgt) const;
  DecoderState<T> init_decoder_state(const Encoded<T>& enc, Lang tgt) const;
  Attention<T> attend(Var<T> h_dec, const Encoded<T>& enc, Var<T> keys, Lang tgt) const;
  StepOutput<T> decode_step(Graph<T>& g, std::span<const int> prev, const DecoderState<T>& state,
                            const Encoded<T>& enc, Var<T> keys, Lang tgt, RunMode mode) const;
  // Masked mean cross-entropy of tgt given src, decoding with gold
  // (SOS-prefixed) previous tokens.
  Var<T> forward_teacher_forced(Graph<T>& g, const Batch& src, const Batch& tgt, RunMode mode) const;
  // Summed negative log-likelihood and token count of a teacher-forced pass.
  std::pair<double, std::size_t> teacher_forced_nll(Graph<T>& g, const Batch& src, const Batch& tgt) const;

  std::vector<Parameter<T>*> parameters() const;
  std::vector<Parameter<T>*> trainable_parameters() const;
  Parameter<T>* find(const std::string& name) const;

  const GruParams<T>& encoder_gru(std::size_t layer, bool backward) const {
    return backward ? enc_bwd_[layer] : enc_fwd_[layer];
  }
  const GruParams<T>& decoder_gru(Lang lang, std::size_t layer) const { return dec_[lang_index(lang)].layers[layer]; }
  Parameter<T>& fixed_embeddings(Lang lang) const { return *enc_embedding_[lang_index(lang)]; }
  Parameter<T>& attention_matrix(Lang lang) const { return *dec_[lang_index(lang)].w_a; }

 private:
  struct Decoder {
    Parameter<T>* embedding = nullptr;
    std::vector<GruParams<T>> layers;
    Parameter<T>* w_a = nullptr;
    Parameter<T>* w_c = nullptr;
    Parameter<T>* out_w = nullptr;
    Parameter<T>* out_b = nullptr;
    std::vector<Parameter<T>*> init_w;
    std::vector<Parameter<T>*> init_b;
  };

  Parameter<T>* make(const std::string& name, Shape shape, bool trainable = true);
  GruParams<T> make_gru(const std::string& prefix, std::size_t in, std::size_t hidden);
  Var<T> attentional_step(Graph<T>& g, std::span<const int> prev, DecoderState<T>& state, const Encoded<T>& enc,
                          Var<T> keys, Lang tgt, RunMode mode, Attention<T>* attention) const;
  Var<T> project(Var<T> attentional, Lang tgt) const;

  ModelConfig config_;
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::array<Parameter<T>*, 2> enc_embedding_{};
  std::vector<GruParams<T>> enc_fwd_;
  std::vector<GruParams<T>> enc_bwd_;
  std::array<Decoder, 2> dec_;
};

// Copies every parameter value across precisions (names and shapes must match).
template <typename To, typename From>
void copy_parameters(const TranslationModel<From>& from, TranslationModel<To>& to);

}  // namespace unmt
