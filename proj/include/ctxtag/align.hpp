#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxtag/corpus.hpp"

namespace ctxtag {

// Splits after '.', '!' or '?' when followed by whitespace. Pieces are
// trimmed; empty pieces are dropped.
std::vector<std::string> split_sentences(std::string_view text);

// Lowercase, collapse whitespace runs to one space, strip leading and
// trailing punctuation and spaces.
std::string normalize_text(std::string_view text);

/// An extracted phrase with the classes it was coded under.
struct Phrase {
  std::string text;
  std::vector<std::string> labels;
};

/// Unsegmented source document plus its coded phrases.
struct RawPolicy {
  std::string doc_id;
  std::string text;
  std::vector<Phrase> phrases;
};

// {"doc_id": ..., "text": ..., "phrases": [{"text": ..., "labels": [...]}]} per line.
std::vector<RawPolicy> read_policies(const std::filesystem::path& path);

struct PhraseMatch {
  std::string phrase;
  std::optional<std::size_t> sentence_index;
};

struct DocumentAlignment {
  std::string doc_id;
  std::vector<PhraseMatch> matches;

  std::size_t matched() const;
  double accuracy() const;  // matched / phrases; 1 for a document without phrases
  bool flagged() const { return matched() != matches.size(); }
};

struct AlignedDocument {
  RawDocument document;  // sentences with the labels of every phrase they contain
  DocumentAlignment alignment;
};

// Each phrase goes to the first sentence that contains it after
// normalization, or failing that, the first sentence whose word sequence
// (punctuation dropped) contains the phrase's word sequence.
AlignedDocument align_phrases(const std::string& doc_id, std::string_view text, const std::vector<Phrase>& phrases);

/// Outcome of aligning a whole corpus.
struct MatchReport {
  std::vector<DocumentAlignment> documents;

  std::vector<std::string> excluded() const;
  std::size_t total_phrases() const;
  std::size_t matched_phrases() const;
  double accuracy() const;

  // Columns: phrase, doc_id, sentence_index (or UNMATCHED).
  void write_csv(const std::filesystem::path& path) const;
  // Columns: doc_id, matched, total, accuracy, flagged.
  void write_summary_csv(const std::filesystem::path& path) const;
};

}  // namespace ctxtag
