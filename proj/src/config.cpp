#include "ctxtag/config.hpp"

#include <fstream>
#include <set>

#include "ctxtag/error.hpp"

namespace ctxtag {

namespace {

using nlohmann::json;

// Reads fields out of one JSON object and rejects whatever is left over.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw UsageError(where_ + " must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& field) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      field = it->template get<T>();
    } catch (const json::exception&) {
      throw UsageError(where_ + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw UsageError("unknown config key '" + where_ + "." + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json model_json(const ModelConfig& m) {
  return {{"learned_dim", m.learned_dim},
          {"word_hidden", m.word_hidden},
          {"sentence_hidden", m.sentence_hidden},
          {"attention_dim", m.attention_dim},
          {"max_words", m.max_words},
          {"max_sentences", m.max_sentences},
          {"sentence_bidirectional", m.sentence_bidirectional},
          {"classifier_learned_embedding", m.classifier_learned_embedding}};
}

void read_model(const json& j, ModelConfig& m) {
  ObjectReader r(j, "model");
  r.get("learned_dim", m.learned_dim);
  r.get("word_hidden", m.word_hidden);
  r.get("sentence_hidden", m.sentence_hidden);
  r.get("attention_dim", m.attention_dim);
  r.get("max_words", m.max_words);
  r.get("max_sentences", m.max_sentences);
  r.get("sentence_bidirectional", m.sentence_bidirectional);
  r.get("classifier_learned_embedding", m.classifier_learned_embedding);
  r.finish();
}

json train_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"l1", t.l1},
          {"l2", t.l2},                       {"epochs", t.epochs},
          {"batch_size", t.batch_size},       {"beta1", t.beta1},
          {"beta2", t.beta2},                 {"adam_eps", t.adam_eps},
          {"class_weighting", weighting_name(t.class_weighting)},
          {"weight_relevance", t.weight_relevance}};
}

void read_train(const json& j, TrainConfig& t) {
  ObjectReader r(j, "train");
  r.get("learning_rate", t.learning_rate);
  r.get("l1", t.l1);
  r.get("l2", t.l2);
  r.get("epochs", t.epochs);
  r.get("batch_size", t.batch_size);
  r.get("beta1", t.beta1);
  r.get("beta2", t.beta2);
  r.get("adam_eps", t.adam_eps);
  std::string weighting = weighting_name(t.class_weighting);
  r.get("class_weighting", weighting);
  t.class_weighting = parse_weighting(weighting);
  r.get("weight_relevance", t.weight_relevance);
  r.finish();
}

json synth_json(const SynthConfig& s) {
  return {{"seed", s.seed},
          {"n_docs", s.n_docs},
          {"sents_per_doc", s.sents_per_doc},
          {"num_classes", s.num_classes},
          {"relevance_rate", s.relevance_rate},
          {"context_strength", s.context_strength},
          {"label_distribution", s.label_distribution},
          {"surface_noise", s.surface_noise},
          {"second_label_rate", s.second_label_rate},
          {"words_per_sentence", s.words_per_sentence}};
}

void read_synth(const json& j, SynthConfig& s) {
  ObjectReader r(j, "synth");
  r.get("seed", s.seed);
  r.get("n_docs", s.n_docs);
  r.get("sents_per_doc", s.sents_per_doc);
  r.get("num_classes", s.num_classes);
  r.get("relevance_rate", s.relevance_rate);
  r.get("context_strength", s.context_strength);
  r.get("label_distribution", s.label_distribution);
  r.get("surface_noise", s.surface_noise);
  r.get("second_label_rate", s.second_label_rate);
  r.get("words_per_sentence", s.words_per_sentence);
  r.finish();
}

}  // namespace

void RunConfig::validate() const {
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw UsageError("split_ratio must be in (0, 1)");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw UsageError("val_fraction must be in [0, 1)");
  if (embeddings.empty() && embedding_dim == 0) throw UsageError("embedding_dim must be positive");
  if (model.learned_dim == 0 || model.word_hidden == 0 || model.sentence_hidden == 0) {
    throw UsageError("model dimensions must be positive");
  }
  if (model.max_words == 0 || model.max_sentences == 0) throw UsageError("max_words and max_sentences must be positive");
  train.validate();
}

nlohmann::json to_json(const RunConfig& cfg) {
  return {{"corpus", cfg.corpus},
          {"embeddings", cfg.embeddings},
          {"embedding_dim", cfg.embedding_dim},
          {"out", cfg.out},
          {"seed", cfg.seed},
          {"split_ratio", cfg.split_ratio},
          {"val_fraction", cfg.val_fraction},
          {"variant", variant_name(cfg.variant)},
          {"model", model_json(cfg.model)},
          {"train", train_json(cfg.train)},
          {"synth", synth_json(cfg.synth)}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  ObjectReader r(j, "config");
  r.get("corpus", cfg.corpus);
  r.get("embeddings", cfg.embeddings);
  r.get("embedding_dim", cfg.embedding_dim);
  r.get("out", cfg.out);
  r.get("seed", cfg.seed);
  r.get("split_ratio", cfg.split_ratio);
  r.get("val_fraction", cfg.val_fraction);
  std::string variant = variant_name(cfg.variant);
  r.get("variant", variant);
  cfg.variant = parse_variant(variant);
  if (const json* m = r.child("model")) read_model(*m, cfg.model);
  if (const json* t = r.child("train")) read_train(*t, cfg.train);
  if (const json* s = r.child("synth")) read_synth(*s, cfg.synth);
  r.finish();
  cfg.train.seed = cfg.seed;
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write config " + path.string());
  out << to_json(cfg).dump(2) << '\n';
}

}  // namespace ctxtag
