#include "unmt/trainer.hpp"

#include <cmath>
#include <cstdio>

#include "unmt/decoding.hpp"
#include "unmt/noise.hpp"

namespace unmt {

template <typename T>
AdamState<T>::AdamState(std::span<Parameter<T>* const> params, AdamConfig c) : config(c) {
  for (const Parameter<T>* p : params) {
    m.emplace_back(p->trainable ? p->size() : 0, T(0));
    v.emplace_back(p->trainable ? p->size() : 0, T(0));
  }
}

template <typename T>
void adam_update(std::span<Parameter<T>* const> params, AdamState<T>& s) {
  if (params.size() != s.m.size()) throw ContractError("adam_update: parameter list differs from the optimizer state");
  s.t += 1;
  const AdamConfig& c = s.config;
  const double c1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = *params[k];
    if (!p.trainable || !p.has_grad()) continue;
    std::vector<T>& m = s.m[k];
    std::vector<T>& v = s.v[k];
    if (m.size() != p.size()) throw ContractError("adam_update: state shape differs for " + p.name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = static_cast<T>(c.beta1 * m[i] + (1.0 - c.beta1) * g);
      v[i] = static_cast<T>(c.beta2 * v[i] + (1.0 - c.beta2) * g * g);
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] = static_cast<T>(p.value[i] - c.lr * mhat / (std::sqrt(vhat) + c.eps));
    }
  }
}

template <typename T>
double clip_global_norm(std::span<Parameter<T>* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter<T>* p : params)
    if (p->trainable)
      for (T g : p->grad) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  if (norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (Parameter<T>* p : params)
      if (p->trainable)
        for (T& g : p->grad) g *= scale;
  }
  return norm;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_update(std::span<Parameter<float>* const>, AdamState<float>&);
template void adam_update(std::span<Parameter<double>* const>, AdamState<double>&);
template double clip_global_norm(std::span<Parameter<float>* const>, double);
template double clip_global_norm(std::span<Parameter<double>* const>, double);

const char* objective_tag(Objective o) {
  switch (o) {
    case Objective::DenoiseL1: return "denoise_l1";
    case Objective::DenoiseL2: return "denoise_l2";
    case Objective::BacktranslateL1: return "backtranslate_l1";
    case Objective::BacktranslateL2: return "backtranslate_l2";
    case Objective::SupervisedL1L2: return "supervised_l1_l2";
    case Objective::SupervisedL2L1: return "supervised_l2_l1";
  }
  return "?";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "unsupervised") return TrainMode::Unsupervised;
  if (s == "semi") return TrainMode::Semi;
  if (s == "supervised") return TrainMode::Supervised;
  throw ConfigError("mode must be unsupervised, semi or supervised, got '" + s + "'");
}

const char* train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::Unsupervised: return "unsupervised";
    case TrainMode::Semi: return "semi";
    case TrainMode::Supervised: return "supervised";
  }
  return "?";
}

TrainingSchedule TrainingSchedule::for_mode(TrainMode mode, bool backtranslation, std::size_t iterations) {
  TrainingSchedule s;
  s.iterations = iterations;
  if (mode != TrainMode::Supervised) {
    s.rotation = {Objective::DenoiseL1, Objective::DenoiseL2};
    if (backtranslation) {
      s.rotation.push_back(Objective::BacktranslateL1);
      s.rotation.push_back(Objective::BacktranslateL2);
    }
  }
  if (mode != TrainMode::Unsupervised) {
    s.rotation.push_back(Objective::SupervisedL1L2);
    s.rotation.push_back(Objective::SupervisedL2L1);
  }
  return s;
}

std::string format_metric(const MetricRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu %s %.6f", r.iteration, r.objective.c_str(), r.loss);
  return buf;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

enum Stream : std::uint64_t { kNoise = 1, kDropout = 2, kBatches = 16 };

std::vector<Ids> pick(const std::vector<Ids>& corpus, const std::vector<std::size_t>& idx) {
  std::vector<Ids> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(corpus[i]);
  return out;
}

}  // namespace

Trainer::Trainer(TranslationModel<float>& model, TrainOptions options)
    : model_(model),
      options_(std::move(options)),
      params_(model.parameters()),
      adam_(params_, options_.adam),
      noise_rng_(derive_seed(options_.seed, kNoise)),
      dropout_rng_(derive_seed(options_.seed, kDropout)) {
  if (options_.batch_size == 0) throw ConfigError("batch size must be positive");
}

double Trainer::update(const Batch& src, const Batch& tgt) {
  for (Parameter<float>* p : params_) p->grad.clear();
  Graph<float> g;
  Var<float> loss = model_.forward_teacher_forced(g, src, tgt, RunMode{&dropout_rng_});
  const double value = loss.item();
  if (!std::isfinite(value)) throw NumericError("training loss is not finite");
  g.backward(loss);
  clip_global_norm(std::span<Parameter<float>* const>(params_), options_.clip_norm);
  adam_update(std::span<Parameter<float>* const>(params_), adam_);
  return value;
}

double Trainer::denoising_step(std::span<const Ids> sentences, Lang l) {
  std::vector<Ids> noisy;
  noisy.reserve(sentences.size());
  for (const Ids& s : sentences) noisy.push_back(corrupt(s, noise_rng_));
  return update(make_batch(noisy, l), make_batch(sentences, l));
}

double Trainer::backtranslation_step(std::span<const Ids> sentences, Lang l) {
  std::vector<std::size_t> caps;
  for (const Ids& s : sentences) caps.push_back(backtranslation_max_len(s.size()));
  std::vector<Ids> pseudo = greedy_decode_batch(model_, sentences, l, other(l), caps);
  for (Ids& s : pseudo)
    if (s.empty()) {
      s.push_back(Vocabulary::kUnk);
      ++empty_backtranslations_;
    }
  return update(make_batch(pseudo, other(l)), make_batch(sentences, l));
}

double Trainer::supervised_step(std::span<const Ids> src, Lang src_lang, std::span<const Ids> tgt, Lang tgt_lang) {
  if (src.size() != tgt.size()) throw ContractError("supervised_step: source and target batches are misaligned");
  return update(make_batch(src, src_lang), make_batch(tgt, tgt_lang));
}

TrainResult Trainer::train(const TrainCorpora& corpora, const TrainCallbacks& callbacks) {
  const TrainingSchedule& schedule = options_.schedule;
  if (schedule.rotation.empty()) throw ConfigError("the training schedule has no objectives");
  if (corpora.parallel[0].size() != corpora.parallel[1].size())
    throw ConfigError("parallel corpus sides have different sentence counts");

  std::vector<BatchStream> streams;
  for (std::size_t k = 0; k < schedule.rotation.size(); ++k) {
    const Objective o = schedule.rotation[k];
    std::size_t n = 0;
    switch (o) {
      case Objective::DenoiseL1:
      case Objective::BacktranslateL1: n = corpora.mono[0].size(); break;
      case Objective::DenoiseL2:
      case Objective::BacktranslateL2: n = corpora.mono[1].size(); break;
      case Objective::SupervisedL1L2:
      case Objective::SupervisedL2L1: n = corpora.parallel[0].size(); break;
    }
    if (n == 0) throw ConfigError(std::string("no training data for objective ") + objective_tag(o));
    streams.emplace_back(n, options_.batch_size, derive_seed(options_.seed, kBatches + k));
  }

  TrainResult result;
  std::vector<double> sums(schedule.rotation.size(), 0.0);
  std::size_t since_report = 0;
  const std::size_t empty_before = empty_backtranslations_;
  for (std::size_t it = 1; it <= schedule.iterations; ++it) {
    for (std::size_t k = 0; k < schedule.rotation.size(); ++k) {
      const Objective o = schedule.rotation[k];
      const std::vector<std::size_t> idx = streams[k].next();
      double loss = 0.0;
      switch (o) {
        case Objective::DenoiseL1: loss = denoising_step(pick(corpora.mono[0], idx), Lang::L1); break;
        case Objective::DenoiseL2: loss = denoising_step(pick(corpora.mono[1], idx), Lang::L2); break;
        case Objective::BacktranslateL1: loss = backtranslation_step(pick(corpora.mono[0], idx), Lang::L1); break;
        case Objective::BacktranslateL2: loss = backtranslation_step(pick(corpora.mono[1], idx), Lang::L2); break;
        case Objective::SupervisedL1L2:
          loss = supervised_step(pick(corpora.parallel[0], idx), Lang::L1, pick(corpora.parallel[1], idx), Lang::L2);
          break;
        case Objective::SupervisedL2L1:
          loss = supervised_step(pick(corpora.parallel[1], idx), Lang::L2, pick(corpora.parallel[0], idx), Lang::L1);
          break;
      }
      sums[k] += loss;
      ++result.updates;
      if (callbacks.on_step) callbacks.on_step(it, o, loss);
    }
    ++since_report;
    const bool report = options_.log_every > 0 && (it % options_.log_every == 0 || it == schedule.iterations);
    if (report) {
      for (std::size_t k = 0; k < schedule.rotation.size(); ++k) {
        MetricRecord r{it, objective_tag(schedule.rotation[k]), sums[k] / static_cast<double>(since_report)};
        result.metrics.push_back(r);
        if (callbacks.on_metric) callbacks.on_metric(r);
        sums[k] = 0.0;
      }
      since_report = 0;
    }
    if (options_.checkpoint_every > 0 && it % options_.checkpoint_every == 0 && callbacks.on_checkpoint)
      callbacks.on_checkpoint(it);
  }
  result.empty_backtranslations = empty_backtranslations_ - empty_before;
  return result;
}

}  // namespace unmt
