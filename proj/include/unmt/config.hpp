#pragma once

// Run configuration: every hyperparameter and path with a default, two named
// presets and a flat "key = value" file format.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "unmt/model.hpp"
#include "unmt/trainer.hpp"

namespace unmt {

struct RunConfig {
  // model
  std::size_t emb_dim = 300;
  std::size_t hidden_dim = 600;
  std::size_t layers = 2;
  double dropout = 0.3;
  double init_range = 0.1;
  // training
  std::string mode = "unsupervised";
  bool backtranslation = true;
  std::size_t batch_size = 50;
  double learning_rate = 0.0002;
  double clip_norm = 5.0;
  std::size_t iterations = 300000;
  std::size_t log_every = 100;
  std::size_t checkpoint_every = 10000;
  std::uint64_t seed = 1;
  // data
  std::size_t vocab_cap = 50000;
  std::size_t max_length = 50;
  std::size_t bpe_ops = 50000;
  // inference
  std::size_t beam = 12;
  // paths; empty means unset
  std::string l1_mono;
  std::string l2_mono;
  std::string l1_embeddings;
  std::string l2_embeddings;
  std::string parallel_l1;
  std::string parallel_l2;
  std::string l1_bpe;
  std::string l2_bpe;
  std::string output_dir = "run";

  // The published hyperparameters; not runnable on a desk machine.
  static RunConfig paper();
  // Small enough to train the synthetic pair on one CPU core in minutes.
  static RunConfig desk();
  static RunConfig preset(const std::string& name);  // "paper" or "desk"

  // Applies one "key = value" assignment; throws ConfigError.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  std::string to_text() const;
  // Assignments on top of *this. Blank lines and '#' comments are ignored.
  void apply_text(const std::string& text);
  void apply_file(const std::filesystem::path& path);

  ModelConfig model_config(std::size_t vocab_l1, std::size_t vocab_l2) const;
  TrainOptions train_options() const;
  void validate() const;  // throws ConfigError

  bool operator==(const RunConfig&) const = default;
};

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace unmt
