#pragma once

// Adam, the objective rotation and the training loop.
//
// Each iteration runs the same fixed sequence of objectives: denoise L1,
// denoise L2, backtranslate L1 batch, backtranslate L2 batch, then the two
// supervised directions when parallel data is in play. Every objective step
// is one forward/backward pass and one Adam update.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "unmt/model.hpp"

namespace unmt {

struct AdamConfig {
  double lr = 0.0002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t t = 0;
  std::vector<std::vector<T>> m;  // one per parameter, same order as at construction
  std::vector<std::vector<T>> v;

  AdamState(std::span<Parameter<T>* const> params, AdamConfig c);
};

// t += 1, then the bias-corrected Adam update of every trainable parameter
// holding a gradient. Non-trainable parameters and parameters the last
// backward pass never reached are left alone.
template <typename T>
void adam_update(std::span<Parameter<T>* const> params, AdamState<T>& state);

// Rescales all gradients so their joint L2 norm is at most max_norm and
// returns the norm before rescaling. A non-finite norm throws NumericError.
template <typename T>
double clip_global_norm(std::span<Parameter<T>* const> params, double max_norm);

enum class Objective { DenoiseL1, DenoiseL2, BacktranslateL1, BacktranslateL2, SupervisedL1L2, SupervisedL2L1 };

// "denoise_l1", "backtranslate_l1", "supervised_l1_l2", ...
const char* objective_tag(Objective o);

enum class TrainMode { Unsupervised, Semi, Supervised };

TrainMode parse_train_mode(const std::string& s);  // throws ConfigError
const char* train_mode_name(TrainMode m);

struct TrainingSchedule {
  std::vector<Objective> rotation;
  std::size_t iterations = 300000;

  // Supervised mode trains only on parallel data; disabling backtranslation
  // gives the denoising-only arm.
  static TrainingSchedule for_mode(TrainMode mode, bool backtranslation, std::size_t iterations);
};

struct TrainCorpora {
  std::array<std::vector<Ids>, 2> mono;
  std::array<std::vector<Ids>, 2> parallel;  // row-aligned
};

struct TrainOptions {
  TrainingSchedule schedule;
  std::size_t batch_size = 50;
  AdamConfig adam;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t log_every = 100;
  std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints
};

struct MetricRecord {
  std::size_t iteration = 0;
  std::string objective;
  double loss = 0.0;  // mean over the steps since the previous record
};

// "iteration objective loss"
std::string format_metric(const MetricRecord& r);

struct TrainCallbacks {
  std::function<void(const MetricRecord&)> on_metric;
  std::function<void(std::size_t iteration)> on_checkpoint;
  std::function<void(std::size_t iteration, Objective, double loss)> on_step;
};

struct TrainResult {
  std::vector<MetricRecord> metrics;
  std::size_t updates = 0;
  std::size_t empty_backtranslations = 0;
};

// Independent sub-seed for a named purpose (splitmix64 of base and stream).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Backtranslation decode cap during training.
constexpr std::size_t backtranslation_max_len(std::size_t source_len) { return source_len + source_len / 2 + 5; }

class Trainer {
 public:
  Trainer(TranslationModel<float>& model, TrainOptions options);

  // Reconstructs `sentences` (language l) from their corrupted versions.
  double denoising_step(std::span<const Ids> sentences, Lang l);
  // Greedily translates `sentences` into the other language without
  // gradients or dropout, then learns to recover them from that translation.
  double backtranslation_step(std::span<const Ids> sentences, Lang l);
  double supervised_step(std::span<const Ids> src, Lang src_lang, std::span<const Ids> tgt, Lang tgt_lang);

  // Throws ConfigError before any update when a scheduled objective lacks data.
  TrainResult train(const TrainCorpora& corpora, const TrainCallbacks& callbacks = {});

  const AdamState<float>& adam() const { return adam_; }
  std::size_t empty_backtranslations() const { return empty_backtranslations_; }

 private:
  double update(const Batch& src, const Batch& tgt);

  TranslationModel<float>& model_;
  TrainOptions options_;
  std::vector<Parameter<float>*> params_;
  AdamState<float> adam_;
  Rng noise_rng_;
  Rng dropout_rng_;
  std::size_t empty_backtranslations_ = 0;
};

}  // namespace unmt
