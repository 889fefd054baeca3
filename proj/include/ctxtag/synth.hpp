#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctxtag/corpus.hpp"

namespace ctxtag {

/// Generator settings for the synthetic policy corpus.
///
/// Every document has a topic class. Sentences that are not relevant carry
/// filler words plus markers of the topic. Relevant sentences carry shared
/// cue words. With probability `context_strength` a relevant sentence is
/// labelled with the document topic and has no class-specific words, so its
/// label can only be read off the surrounding sentences. Otherwise it gets a
/// class drawn from `label_distribution` and that class's surface words.
struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_docs = 200;
  std::size_t sents_per_doc = 6;
  std::size_t num_classes = 5;
  double relevance_rate = 0.5;
  double context_strength = 1.0;
  // Relative class frequencies for sentence-determined labels; empty = uniform.
  std::vector<double> label_distribution;
  // Chance that a sentence-determined label shows another class's words.
  double surface_noise = 0.0;
  // Chance that a sentence-determined label gets a second class.
  double second_label_rate = 0.0;
  std::size_t words_per_sentence = 8;
};

std::vector<std::string> synth_class_names(std::size_t num_classes);

std::vector<RawDocument> synth_corpus(const SynthConfig& cfg);

}  // namespace ctxtag
