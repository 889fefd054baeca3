#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctxtag/text.hpp"

namespace ctxtag {

inline constexpr std::size_t kMaxSentences = 64;

/// One sentence as it appears in a corpus file: raw text plus class names.
struct RawSentence {
  std::string text;
  std::vector<std::string> labels;
};

struct RawDocument {
  std::string doc_id;
  std::vector<RawSentence> sentences;
};

// One JSON object per line: {"doc_id": ..., "sentences": [{"text": ..., "labels": [...]}]}.
std::vector<RawDocument> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<RawDocument>& docs);

// The 17 goal names in their canonical order, and their labelled-sentence counts.
const std::vector<std::string>& sdg_class_names();
const std::vector<std::size_t>& sdg_class_counts();

// Distinct labels in the corpus: the goal list when every label is a goal
// name, otherwise sorted order.
std::vector<std::string> infer_classes(const std::vector<RawDocument>& docs);

std::vector<std::string> read_classes(const std::filesystem::path& path);
void write_classes(const std::filesystem::path& path, const std::vector<std::string>& classes);

/// A document encoded for the model. Label lists hold sorted class indices.
struct DocumentRecord {
  std::string doc_id;
  std::vector<EncodedSentence> sentences;
  std::vector<bool> relevance;
  std::vector<std::vector<std::size_t>> labels;

  std::size_t size() const { return sentences.size(); }
};

struct EncodeOptions {
  std::size_t max_words = kMaxWords;
  std::size_t max_sentences = kMaxSentences;
};

// Tokenizes and encodes; documents longer than max_sentences keep their first
// sentences. Unknown class names and empty documents raise DataError.
DocumentRecord encode_document(const RawDocument& doc, const Vocab& vocab, const std::vector<std::string>& classes,
                               const EncodeOptions& opts = {});

std::vector<DocumentRecord> encode_corpus(const std::vector<RawDocument>& docs, const Vocab& vocab,
                                          const std::vector<std::string>& classes, const EncodeOptions& opts = {});

// Vocabulary over every tokenized sentence of the corpus.
Vocab corpus_vocab(const std::vector<RawDocument>& docs, std::size_t max_words = kMaxVocabWords);

/// One classifier training unit: a labelled sentence plus its whole document.
struct TrainingSample {
  std::size_t doc_ref = 0;  // index into the document list
  std::size_t sentence_index = 0;
  std::vector<bool> label_vector;
};

std::vector<TrainingSample> broadcast_samples(const DocumentRecord& doc, std::size_t doc_ref, std::size_t num_classes);
std::vector<TrainingSample> broadcast_corpus(const std::vector<DocumentRecord>& docs,
                                             const std::vector<std::size_t>& doc_refs, std::size_t num_classes);

/// Document indices per partition, each sorted ascending.
struct CorpusSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Test gets floor((1 - ratio) * n) documents, validation floor(val_fraction *
// |rest|) of the remainder, train the rest.
CorpusSplit split_corpus(std::size_t n_docs, double ratio, double val_fraction, std::uint64_t seed);

// w_c = sum(counts) / (K * count_c).
std::vector<double> class_weights(const std::vector<std::size_t>& counts);

// Labelled-sentence count per class over the given documents.
std::vector<std::size_t> class_counts(const std::vector<DocumentRecord>& docs, const std::vector<std::size_t>& doc_refs,
                                      std::size_t num_classes);

// {irrelevant, relevant} sentence counts over the given documents.
std::vector<std::size_t> relevance_counts(const std::vector<DocumentRecord>& docs,
                                          const std::vector<std::size_t>& doc_refs);

// class_weights after raising every count to at least one.
std::vector<double> smoothed_class_weights(std::vector<std::size_t> counts);

}  // namespace ctxtag
