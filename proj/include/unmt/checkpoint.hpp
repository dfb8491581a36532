#pragma once

// Binary checkpoint: magic "UNMTCKPT", format version, a key = value text
// block (model configuration and free-form metadata), both vocabularies,
// optional BPE merge tables, then one record per parameter: name, rank,
// dims and 32-bit float values. Integers are little-endian.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "unmt/bpe.hpp"
#include "unmt/model.hpp"

namespace unmt {

struct CheckpointInfo {
  ModelConfig config;
  std::array<Vocabulary, 2> vocab{Vocabulary("l1"), Vocabulary("l2")};
  std::optional<std::array<MergeTable, 2>> bpe;
  std::map<std::string, std::string> meta;
};

void save_checkpoint(const std::filesystem::path& path, const TranslationModel<float>& model,
                     const CheckpointInfo& info);

struct LoadedCheckpoint {
  CheckpointInfo info;
  TranslationModel<float> model;
};

// Throws FormatError on a bad magic, version, truncated record or any
// parameter whose name or shape disagrees with the stored configuration.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace unmt
