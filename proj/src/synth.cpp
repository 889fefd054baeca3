#include "ctxtag/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "ctxtag/error.hpp"
#include "ctxtag/rng.hpp"

namespace ctxtag {

namespace {

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "the",     "national", "policy",   "framework", "shall",    "be",      "of",        "and",
      "in",      "for",      "with",     "section",  "council",  "public",  "sector",    "plan",
      "measure", "period",   "strategy", "local",    "program",  "support", "approach",  "review",
      "report",  "state",    "areas",    "level",    "existing", "process", "resources", "law"};
  return words;
}

const std::vector<std::string>& cue_words() {
  static const std::vector<std::string> words = {"target", "goal",   "improve", "ensure",
                                                 "increase", "reduce", "promote", "achieve"};
  return words;
}

std::string class_word(const char* stem, std::size_t c, char variant) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%02zu%c", stem, c, variant);
  return buf;
}

std::size_t draw_class(Rng& rng, const std::vector<double>& cumulative) {
  const double u = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

// Fillers with `specials` dropped in at distinct random positions.
std::string make_sentence(Rng& rng, std::size_t length, const std::vector<std::string>& specials) {
  const auto& fillers = filler_words();
  std::vector<std::string> words(std::max(length, specials.size()));
  for (auto& w : words) w = fillers[rng.index(fillers.size())];
  std::vector<std::size_t> slots(words.size());
  std::iota(slots.begin(), slots.end(), 0);
  rng.shuffle(slots);
  for (std::size_t i = 0; i < specials.size(); ++i) words[slots[i]] = specials[i];
  std::string text;
  for (const auto& w : words) {
    if (!text.empty()) text.push_back(' ');
    text += w;
  }
  text.push_back('.');
  return text;
}

}  // namespace

std::vector<std::string> synth_class_names(std::size_t num_classes) {
  std::vector<std::string> names;
  char buf[32];
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::snprintf(buf, sizeof buf, "topic%02zu", c);
    names.emplace_back(buf);
  }
  return names;
}

std::vector<RawDocument> synth_corpus(const SynthConfig& cfg) {
  if (cfg.n_docs == 0 || cfg.sents_per_doc == 0 || cfg.words_per_sentence < 4) {
    throw UsageError("synthetic corpus needs documents, sentences and at least 4 words per sentence");
  }
  if (cfg.num_classes < 1 || cfg.num_classes > 17) throw UsageError("synthetic class count must be in [1, 17]");
  if (cfg.relevance_rate < 0.0 || cfg.relevance_rate > 1.0 || cfg.context_strength < 0.0 ||
      cfg.context_strength > 1.0 || cfg.surface_noise < 0.0 || cfg.surface_noise > 1.0 ||
      cfg.second_label_rate < 0.0 || cfg.second_label_rate > 1.0) {
    throw UsageError("synthetic rates must lie in [0, 1]");
  }
  std::vector<double> weights = cfg.label_distribution;
  if (weights.empty()) weights.assign(cfg.num_classes, 1.0);
  if (weights.size() != cfg.num_classes) throw UsageError("label distribution needs one weight per class");
  std::vector<double> cumulative(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
  if (!(cumulative.back() > 0.0)) throw UsageError("label distribution must have positive mass");

  const auto names = synth_class_names(cfg.num_classes);
  const auto& cues = cue_words();
  const std::size_t k = cfg.num_classes;
  Rng rng(cfg.seed);
  std::vector<RawDocument> docs;
  for (std::size_t d = 0; d < cfg.n_docs; ++d) {
    char id[32];
    std::snprintf(id, sizeof id, "synth%05zu", d);
    RawDocument doc{id, {}};
    const std::size_t topic = rng.index(k);
    std::vector<bool> relevant(cfg.sents_per_doc);
    for (std::size_t i = 0; i < relevant.size(); ++i) relevant[i] = rng.bernoulli(cfg.relevance_rate);
    // Lead with context so a left-to-right reader sees the topic first.
    const auto first_context = std::find(relevant.begin(), relevant.end(), false);
    if (first_context != relevant.end()) std::swap(*first_context, relevant.front());

    for (bool is_relevant : relevant) {
      RawSentence s;
      std::vector<std::string> specials;
      if (!is_relevant) {
        specials.push_back(class_word("ctx", topic, static_cast<char>('a' + rng.index(3))));
        specials.push_back(class_word("ctx", topic, static_cast<char>('a' + rng.index(3))));
      } else {
        specials.push_back(cues[rng.index(cues.size())]);
        specials.push_back(cues[rng.index(cues.size())]);
        if (rng.bernoulli(cfg.context_strength)) {
          s.labels.push_back(names[topic]);
        } else {
          std::vector<std::size_t> classes{draw_class(rng, cumulative)};
          if (k > 1 && rng.bernoulli(cfg.second_label_rate)) {
            std::size_t extra = rng.index(k - 1);
            if (extra >= classes[0]) ++extra;
            classes.push_back(extra);
          }
          for (std::size_t c : classes) {
            s.labels.push_back(names[c]);
            std::size_t shown = c;
            if (k > 1 && rng.bernoulli(cfg.surface_noise)) {
              shown = rng.index(k - 1);
              if (shown >= c) ++shown;
            }
            specials.push_back(class_word("lab", shown, static_cast<char>('a' + rng.index(2))));
          }
        }
      }
      s.text = make_sentence(rng, cfg.words_per_sentence, specials);
      doc.sentences.push_back(std::move(s));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace ctxtag
