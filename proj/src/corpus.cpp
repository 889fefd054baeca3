#include "ctxtag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "ctxtag/error.hpp"
#include "ctxtag/rng.hpp"

namespace ctxtag {

using json = nlohmann::json;

std::vector<RawDocument> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read corpus " + path.string());
  std::vector<RawDocument> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      const json obj = json::parse(line);
      RawDocument doc;
      doc.doc_id = obj.at("doc_id").get<std::string>();
      for (const json& s : obj.at("sentences")) {
        RawSentence sentence;
        sentence.text = s.at("text").get<std::string>();
        if (s.contains("labels")) sentence.labels = s.at("labels").get<std::vector<std::string>>();
        doc.sentences.push_back(std::move(sentence));
      }
      docs.push_back(std::move(doc));
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return docs;
}

void write_corpus(const std::filesystem::path& path, const std::vector<RawDocument>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus " + path.string());
  for (const RawDocument& doc : docs) {
    json sentences = json::array();
    for (const RawSentence& s : doc.sentences) {
      sentences.push_back(json{{"text", s.text}, {"labels", s.labels}});
    }
    out << json{{"doc_id", doc.doc_id}, {"sentences", sentences}}.dump() << '\n';
  }
}

const std::vector<std::string>& sdg_class_names() {
  static const std::vector<std::string> names = {
      "No Poverty",         "Zero Hunger",          "Good Health",     "Education",         "Gender Equality",
      "Clean Water",        "Clean Energy",         "Economic Growth", "Infrastructure",    "Reduced Inequality",
      "Sustainable Cities", "Responsible Production", "Climate Action", "Aquatic Life",      "Land Life",
      "Peace and Justice",  "Partnerships"};
  return names;
}

const std::vector<std::size_t>& sdg_class_counts() {
  static const std::vector<std::size_t> counts = {15,  850, 1042, 322,  367, 841,  2258, 241, 579,
                                                  65,  591, 625,  1106, 283, 1056, 121,  406};
  return counts;
}

std::vector<std::string> infer_classes(const std::vector<RawDocument>& docs) {
  std::set<std::string> seen;
  for (const RawDocument& d : docs) {
    for (const RawSentence& s : d.sentences) seen.insert(s.labels.begin(), s.labels.end());
  }
  const auto& sdg = sdg_class_names();
  const bool all_sdg = std::all_of(seen.begin(), seen.end(), [&](const std::string& label) {
    return std::find(sdg.begin(), sdg.end(), label) != sdg.end();
  });
  if (all_sdg && !seen.empty()) return sdg;
  return {seen.begin(), seen.end()};
}

std::vector<std::string> read_classes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read classes " + path.string());
  std::vector<std::string> classes;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) classes.push_back(line);
  }
  if (classes.empty()) throw DataError("class list " + path.string() + " is empty");
  return classes;
}

void write_classes(const std::filesystem::path& path, const std::vector<std::string>& classes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write classes " + path.string());
  for (const std::string& c : classes) out << c << '\n';
}

DocumentRecord encode_document(const RawDocument& doc, const Vocab& vocab, const std::vector<std::string>& classes,
                               const EncodeOptions& opts) {
  if (doc.sentences.empty()) throw DataError("document '" + doc.doc_id + "' has no sentences");
  DocumentRecord rec;
  rec.doc_id = doc.doc_id;
  const std::size_t n = std::min(doc.sentences.size(), opts.max_sentences);
  for (std::size_t i = 0; i < n; ++i) {
    const RawSentence& s = doc.sentences[i];
    const Tokens tokens = tokenize(s.text);
    if (tokens.empty()) throw DataError("document '" + doc.doc_id + "' sentence " + std::to_string(i) + " is empty");
    rec.sentences.push_back(encode_pad(vocab, tokens, opts.max_words));
    std::vector<std::size_t> ids;
    for (const std::string& label : s.labels) {
      auto it = std::find(classes.begin(), classes.end(), label);
      if (it == classes.end()) throw DataError("document '" + doc.doc_id + "': unknown class '" + label + "'");
      ids.push_back(static_cast<std::size_t>(it - classes.begin()));
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    rec.relevance.push_back(!ids.empty());
    rec.labels.push_back(std::move(ids));
  }
  return rec;
}

std::vector<DocumentRecord> encode_corpus(const std::vector<RawDocument>& docs, const Vocab& vocab,
                                          const std::vector<std::string>& classes, const EncodeOptions& opts) {
  std::vector<DocumentRecord> out;
  out.reserve(docs.size());
  for (const RawDocument& d : docs) out.push_back(encode_document(d, vocab, classes, opts));
  return out;
}

Vocab corpus_vocab(const std::vector<RawDocument>& docs, std::size_t max_words) {
  std::vector<Tokens> sentences;
  for (const RawDocument& d : docs) {
    for (const RawSentence& s : d.sentences) sentences.push_back(tokenize(s.text));
  }
  return Vocab::build(sentences, max_words);
}

std::vector<TrainingSample> broadcast_samples(const DocumentRecord& doc, std::size_t doc_ref,
                                              std::size_t num_classes) {
  std::vector<TrainingSample> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc.relevance[i]) continue;
    TrainingSample sample{doc_ref, i, std::vector<bool>(num_classes, false)};
    for (std::size_t c : doc.labels[i]) {
      if (c >= num_classes) throw DataError("class index " + std::to_string(c) + " outside " + std::to_string(num_classes));
      sample.label_vector[c] = true;
    }
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<TrainingSample> broadcast_corpus(const std::vector<DocumentRecord>& docs,
                                             const std::vector<std::size_t>& doc_refs, std::size_t num_classes) {
  std::vector<TrainingSample> out;
  for (std::size_t ref : doc_refs) {
    auto samples = broadcast_samples(docs.at(ref), ref, num_classes);
    out.insert(out.end(), std::make_move_iterator(samples.begin()), std::make_move_iterator(samples.end()));
  }
  return out;
}

namespace {

// floor() that is not thrown off by products like 0.2 * 5 = 0.9999999999999998.
std::size_t floor_count(double x) { return static_cast<std::size_t>(std::floor(x + 1e-9)); }

}  // namespace

CorpusSplit split_corpus(std::size_t n_docs, double ratio, double val_fraction, std::uint64_t seed) {
  if (n_docs < 3) throw DataError("need at least 3 documents to split, got " + std::to_string(n_docs));
  if (!(ratio > 0.0 && ratio <= 1.0)) throw UsageError("train ratio must be in (0, 1]");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw UsageError("validation fraction must be in [0, 1)");
  std::vector<std::size_t> order(n_docs);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t n_test = floor_count((1.0 - ratio) * static_cast<double>(n_docs));
  const std::size_t n_val = floor_count(val_fraction * static_cast<double>(n_docs - n_test));
  CorpusSplit split;
  split.test.assign(order.begin(), order.begin() + n_test);
  split.val.assign(order.begin() + n_test, order.begin() + n_test + n_val);
  split.train.assign(order.begin() + n_test + n_val, order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<double> class_weights(const std::vector<std::size_t>& counts) {
  if (counts.empty()) throw DataError("class_weights needs at least one class");
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  const double k = static_cast<double>(counts.size());
  std::vector<double> w;
  w.reserve(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw DataError("class " + std::to_string(c) + " has zero count");
    w.push_back(total / (k * static_cast<double>(counts[c])));
  }
  return w;
}

std::vector<std::size_t> class_counts(const std::vector<DocumentRecord>& docs, const std::vector<std::size_t>& doc_refs,
                                      std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t ref : doc_refs) {
    for (const auto& labels : docs.at(ref).labels) {
      for (std::size_t c : labels) ++counts.at(c);
    }
  }
  return counts;
}

std::vector<std::size_t> relevance_counts(const std::vector<DocumentRecord>& docs,
                                          const std::vector<std::size_t>& doc_refs) {
  std::vector<std::size_t> counts(2, 0);
  for (std::size_t ref : doc_refs) {
    for (bool r : docs.at(ref).relevance) ++counts[r ? 1 : 0];
  }
  return counts;
}

std::vector<double> smoothed_class_weights(std::vector<std::size_t> counts) {
  for (std::size_t& c : counts) c = std::max<std::size_t>(c, 1);
  return class_weights(counts);
}

}  // namespace ctxtag
