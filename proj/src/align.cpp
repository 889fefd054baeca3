#include "ctxtag/align.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "ctxtag/csv.hpp"
#include "ctxtag/error.hpp"

namespace ctxtag {

using json = nlohmann::json;

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

// Tokens with pure-punctuation entries removed.
Tokens word_sequence(std::string_view text) {
  Tokens out;
  for (std::string& t : tokenize(text)) {
    if (!std::all_of(t.begin(), t.end(), is_punct)) out.push_back(std::move(t));
  }
  return out;
}

bool contains_sequence(const Tokens& haystack, const Tokens& needle) {
  if (needle.empty()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && i + 1 < text.size() && is_space(text[i + 1])) {
      std::string piece = trim(text.substr(start, i + 1 - start));
      if (!piece.empty()) out.push_back(std::move(piece));
      start = i + 1;
    }
  }
  std::string rest = trim(text.substr(std::min(start, text.size())));
  if (!rest.empty()) out.push_back(std::move(rest));
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  std::size_t b = 0;
  std::size_t e = out.size();
  while (b < e && (is_punct(out[b]) || out[b] == ' ')) ++b;
  while (e > b && (is_punct(out[e - 1]) || out[e - 1] == ' ')) --e;
  return out.substr(b, e - b);
}

std::vector<RawPolicy> read_policies(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<RawPolicy> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json obj = json::parse(line);
      RawPolicy p;
      p.doc_id = obj.at("doc_id").get<std::string>();
      p.text = obj.at("text").get<std::string>();
      for (const json& ph : obj.at("phrases")) {
        p.phrases.push_back(Phrase{ph.at("text").get<std::string>(),
                                   ph.value("labels", std::vector<std::string>{})});
      }
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::size_t DocumentAlignment::matched() const {
  return static_cast<std::size_t>(
      std::count_if(matches.begin(), matches.end(), [](const PhraseMatch& m) { return m.sentence_index.has_value(); }));
}

double DocumentAlignment::accuracy() const {
  if (matches.empty()) return 1.0;
  return static_cast<double>(matched()) / static_cast<double>(matches.size());
}

AlignedDocument align_phrases(const std::string& doc_id, std::string_view text, const std::vector<Phrase>& phrases) {
  AlignedDocument out;
  out.document.doc_id = doc_id;
  out.alignment.doc_id = doc_id;
  const std::vector<std::string> sentences = split_sentences(text);
  std::vector<std::string> normalized;
  std::vector<Tokens> words;
  for (const std::string& s : sentences) {
    out.document.sentences.push_back(RawSentence{s, {}});
    normalized.push_back(normalize_text(s));
    words.push_back(word_sequence(s));
  }
  for (const Phrase& phrase : phrases) {
    PhraseMatch match{phrase.text, std::nullopt};
    const std::string norm = normalize_text(phrase.text);
    if (!norm.empty()) {
      for (std::size_t i = 0; i < normalized.size() && !match.sentence_index; ++i) {
        if (normalized[i].find(norm) != std::string::npos) match.sentence_index = i;
      }
      if (!match.sentence_index) {
        const Tokens needle = word_sequence(phrase.text);
        for (std::size_t i = 0; i < words.size() && !match.sentence_index; ++i) {
          if (contains_sequence(words[i], needle)) match.sentence_index = i;
        }
      }
    }
    if (match.sentence_index) {
      auto& labels = out.document.sentences[*match.sentence_index].labels;
      for (const std::string& l : phrase.labels) {
        if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
      }
    }
    out.alignment.matches.push_back(std::move(match));
  }
  return out;
}

std::vector<std::string> MatchReport::excluded() const {
  std::vector<std::string> out;
  for (const auto& d : documents) {
    if (d.flagged()) out.push_back(d.doc_id);
  }
  return out;
}

std::size_t MatchReport::total_phrases() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.matches.size();
  return n;
}

std::size_t MatchReport::matched_phrases() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.matched();
  return n;
}

double MatchReport::accuracy() const {
  const std::size_t total = total_phrases();
  return total == 0 ? 1.0 : static_cast<double>(matched_phrases()) / static_cast<double>(total);
}

void MatchReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_csv_row(out, {"phrase", "doc_id", "sentence_index"});
  for (const auto& d : documents) {
    for (const auto& m : d.matches) {
      write_csv_row(out, {m.phrase, d.doc_id, m.sentence_index ? std::to_string(*m.sentence_index) : "UNMATCHED"});
    }
  }
}

void MatchReport::write_summary_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_csv_row(out, {"doc_id", "matched", "total", "accuracy", "flagged"});
  for (const auto& d : documents) {
    write_csv_row(out, {d.doc_id, std::to_string(d.matched()), std::to_string(d.matches.size()),
                        format_double(d.accuracy()), d.flagged() ? "1" : "0"});
  }
}

}  // namespace ctxtag
