#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "ctxtag/model.hpp"
#include "ctxtag/synth.hpp"
#include "ctxtag/train.hpp"

namespace ctxtag {

/// Everything a run needs, as one JSON document. Every field has a default,
/// so `{}` is a complete config (synthetic corpus, random embeddings).
struct RunConfig {
  std::string corpus;      // prepared corpus directory or JSONL file; empty = synthetic
  std::string embeddings;  // "word f1 .. fd" text file; empty = random vectors
  std::size_t embedding_dim = 50;
  std::string out = "run";
  std::uint64_t seed = 1;  // initialization, split and shuffling
  double split_ratio = 0.8;
  double val_fraction = 0.1;
  Variant variant = Variant::multitask;
  ModelConfig model;  // num_classes comes from the data
  TrainConfig train;  // train.seed mirrors `seed`
  SynthConfig synth;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
// Missing keys keep their defaults; unknown keys raise UsageError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& cfg);

}  // namespace ctxtag
