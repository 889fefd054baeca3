#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ctxtag/checkpoint.hpp"
#include "ctxtag/config.hpp"
#include "ctxtag/corpus.hpp"

namespace ctxtag {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Corpus, vocabulary and split resolved from a RunConfig.
struct Dataset {
  std::vector<RawDocument> raw;
  Vocab vocab;
  std::vector<std::string> classes;
  std::vector<DocumentRecord> docs;
  CorpusSplit split;
};

// `cfg.corpus` may be a prepared directory (corpus.jsonl plus optional
// vocab.txt and classes.txt) or a corpus JSONL file; empty means the
// synthetic generator. The split depends only on the document count and
// `cfg.seed`.
Dataset load_dataset(const RunConfig& cfg);
// Same corpus, encoded with a fixed vocabulary and class list.
Dataset load_dataset(const RunConfig& cfg, const Vocab& vocab, const std::vector<std::string>& classes);

// Pretrained table from `cfg.embeddings`, or seeded random vectors.
Tensor load_pretrained(const RunConfig& cfg, const Vocab& vocab);

std::vector<std::size_t> split_refs(const CorpusSplit& split, const std::string& name);

// Whole command line, argv[0] excluded. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctxtag
