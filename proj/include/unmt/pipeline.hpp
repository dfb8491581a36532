#pragma once

// File-level glue shared by the command-line tool and the acceptance suite:
// corpus loading, optional BPE segmentation, vocabularies, fixed embeddings,
// training runs and line-by-line translation.

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "unmt/checkpoint.hpp"
#include "unmt/config.hpp"

namespace unmt {

struct TrainingData {
  std::array<Vocabulary, 2> vocab{Vocabulary("l1"), Vocabulary("l2")};
  std::optional<std::array<MergeTable, 2>> bpe;
  TrainCorpora corpora;
  std::array<EmbeddingMatrix, 2> embeddings;
  std::array<std::vector<std::string>, 2> missing_embeddings;
  std::array<std::size_t, 2> filtered_mono{0, 0};  // dropped by the length filter
  std::size_t filtered_parallel = 0;
};

// Checks that every file the mode needs is named and readable, before any
// compute. Throws ConfigError.
void check_inputs(const RunConfig& config);

TrainingData load_training_data(const RunConfig& config);

// Segments a sentence with the language's merge table when one is present.
Sentence preprocess(const Sentence& s, const std::optional<std::array<MergeTable, 2>>& bpe, Lang l);

struct TrainRun {
  TranslationModel<float> model;
  CheckpointInfo info;
  TrainResult result;
};

// Builds and trains a model. Metric lines go to `metrics` as they are
// produced; periodic checkpoints are written to
// <output_dir>/checkpoint-<iteration>.bin when write_checkpoints is set, and
// the final model to <output_dir>/model.bin.
TrainRun run_training(const RunConfig& config, const TrainingData& data, std::ostream* metrics,
                      bool write_checkpoints);

// Parses "l1-l2" or "l2-l1". Throws ConfigError otherwise.
std::pair<Lang, Lang> parse_direction(const std::string& direction);

// Translates whitespace-tokenised lines. beam == 0 selects greedy decoding;
// max_len == 0 uses the default cap. BPE is applied to the input and undone
// on the output when the checkpoint records merge tables.
std::vector<Sentence> translate_sentences(const TranslationModel<float>& model, const CheckpointInfo& info,
                                          const std::vector<Sentence>& input, Lang src, Lang tgt, std::size_t beam,
                                          std::size_t max_len = 0);

}  // namespace unmt
