#include "ctxtag/train.hpp"

#include <cmath>
#include <limits>

#include "ctxtag/error.hpp"

namespace ctxtag {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Mean over `samples` of the variant's cross-entropy terms, as a graph.
Tensor batch_loss(const MultiTaskModel& model, const std::vector<DocumentRecord>& docs,
                  std::span<const TrainingSample> samples, const LossConfig& loss) {
  // Group by document, in order of first appearance.
  std::vector<std::size_t> doc_order;
  std::map<std::size_t, std::vector<const TrainingSample*>> by_doc;
  for (const TrainingSample& s : samples) {
    auto [it, fresh] = by_doc.try_emplace(s.doc_ref);
    if (fresh) doc_order.push_back(s.doc_ref);
    it->second.push_back(&s);
  }
  const bool relevance_term = model.variant() != Variant::baseline_classifier;
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t ref : doc_order) {
    const DocumentRecord& doc = docs.at(ref);
    const auto& group = by_doc[ref];
    std::optional<SummarizerOutput> summary;
    if (model.has_summarizer()) summary = summarizer_forward(model.summarizer(), doc);
    if (relevance_term) {
      total = add(total, scale(relevance_loss(summary->y_d, doc.relevance, loss), static_cast<double>(group.size())));
    }
    if (!model.has_classifier()) continue;
    for (const TrainingSample* s : group) {
      const EncodedSentence& sentence = doc.sentences.at(s->sentence_index);
      const Tensor y_s = model.variant() == Variant::multitask
                             ? classifier_forward(model.classifier(), sentence, gather_rows(summary->h_e, s->sentence_index))
                             : baseline_classifier_forward(model, sentence);
      total = add(total, label_loss(y_s, s->label_vector, loss));
    }
  }
  return scale(total, 1.0 / static_cast<double>(samples.size()));
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !(l1 >= 0.0) || !(l2 >= 0.0)) {
    throw UsageError("learning rate and regularization must be non-negative");
  }
  if (batch_size == 0) throw UsageError("batch size must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) throw UsageError("Adam betas must be in (0, 1)");
  if (!(adam_eps > 0.0)) throw UsageError("Adam epsilon must be positive");
}

ParameterSnapshot snapshot(const NamedTensors& params) {
  ParameterSnapshot out;
  for (const auto& [name, t] : params) out.emplace(name, std::vector<double>(t.data().begin(), t.data().end()));
  return out;
}

void restore(NamedTensors& params, const ParameterSnapshot& snap) {
  for (auto& [name, t] : params) {
    auto it = snap.find(name);
    if (it == snap.end()) throw DataError("snapshot has no parameter '" + name + "'");
    auto values = t.mutable_data();
    if (it->second.size() != values.size()) throw ShapeError("snapshot size mismatch for '" + name + "'");
    std::copy(it->second.begin(), it->second.end(), values.begin());
  }
}

LossConfig derive_loss_config(const std::vector<DocumentRecord>& docs, const std::vector<std::size_t>& train_docs,
                              std::size_t num_classes, const TrainConfig& cfg) {
  LossConfig loss;
  loss.l1 = cfg.l1;
  loss.l2 = cfg.l2;
  loss.weighting = cfg.class_weighting;
  if (cfg.class_weighting != ClassWeighting::none) {
    loss.class_weights = smoothed_class_weights(class_counts(docs, train_docs, num_classes));
  }
  if (cfg.weight_relevance) {
    const auto w = smoothed_class_weights(relevance_counts(docs, train_docs));
    loss.relevance_weights = {w[0], w[1]};
  }
  return loss;
}

double sample_loss(const MultiTaskModel& model, const std::vector<DocumentRecord>& docs,
                   const std::vector<TrainingSample>& samples, const LossConfig& loss) {
  if (samples.empty()) return kNaN;
  NoGradGuard no_grad;
  return batch_loss(model, docs, samples, loss).item();
}

TrainResult train(MultiTaskModel& model, const std::vector<DocumentRecord>& docs, const CorpusSplit& split,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  const std::size_t k = model.config().num_classes;
  std::vector<TrainingSample> train_samples = broadcast_corpus(docs, split.train, k);
  const std::vector<TrainingSample> val_samples = broadcast_corpus(docs, split.val, k);
  if (train_samples.empty()) throw DataError("training split has no labelled sentences");

  TrainResult result;
  result.loss = derive_loss_config(docs, split.train, k, cfg);
  NamedTensors params = model.parameters();
  const NamedTensors regularized = model.regularized_parameters();
  const AdamConfig adam = cfg.adam();
  AdamState state;
  Rng rng(cfg.seed);

  result.best = snapshot(params);
  result.best_epoch = 0;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  if (cfg.epochs == 0) {
    result.best_val_loss = sample_loss(model, docs, val_samples.empty() ? train_samples : val_samples, result.loss);
  }

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(train_samples);
    double running = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < train_samples.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, train_samples.size());
      for (auto& [name, p] : params) p.zero_grad();
      const std::span<const TrainingSample> batch(train_samples.data() + start, end - start);
      const Tensor loss = add(batch_loss(model, docs, batch, result.loss),
                              l1l2_penalty(regularized, result.loss.l1, result.loss.l2));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(steps + 1));
      }
      loss.backward();
      adam_step(params, state, adam);
      model.after_update();
      running += value;
      ++steps;
    }
    EpochRecord record{epoch, running / static_cast<double>(steps), kNaN};
    double selection = record.train_loss;
    if (!val_samples.empty()) {
      record.val_loss = sample_loss(model, docs, val_samples, result.loss);
      if (!std::isfinite(record.val_loss)) {
        throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
      }
      selection = record.val_loss;
    }
    const bool improved = selection < result.best_val_loss;
    if (improved) {
      result.best_val_loss = selection;
      result.best_epoch = epoch;
      result.best = snapshot(params);
    }
    result.history.push_back(record);
    if (on_epoch && !on_epoch(record, improved, model)) break;
  }
  restore(params, result.best);
  return result;
}

Predictions predict(const MultiTaskModel& model, const std::vector<DocumentRecord>& docs,
                    const std::vector<std::size_t>& doc_refs) {
  NoGradGuard no_grad;
  Predictions out;
  for (std::size_t ref : doc_refs) {
    const DocumentRecord& doc = docs.at(ref);
    std::optional<SummarizerOutput> summary;
    if (model.has_summarizer()) {
      summary = summarizer_forward(model.summarizer(), doc);
      for (std::size_t i = 0; i < doc.size(); ++i) {
        out.relevance.push_back(summary->y_d.at(i));
        out.gold_relevance.push_back(doc.relevance[i]);
      }
    }
    if (!model.has_classifier()) continue;
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (!doc.relevance[i]) continue;
      const Tensor y_s = model.variant() == Variant::multitask
                             ? classifier_forward(model.classifier(), doc.sentences[i], gather_rows(summary->h_e, i))
                             : baseline_classifier_forward(model, doc.sentences[i]);
      out.labels.emplace_back(y_s.data().begin(), y_s.data().end());
      out.gold_labels.push_back(doc.labels[i]);
    }
  }
  return out;
}

MetricsReport evaluate_model(const MultiTaskModel& model, const std::vector<DocumentRecord>& docs,
                             const std::vector<std::size_t>& doc_refs, const LossConfig& loss) {
  MetricsReport report;
  report.loss = sample_loss(model, docs, broadcast_corpus(docs, doc_refs, model.config().num_classes), loss);
  const Predictions p = predict(model, docs, doc_refs);
  report.sentences = p.labels.size();
  report.scored_sentences = p.relevance.size();
  if (model.has_classifier()) {
    const ClassificationMetrics cm = evaluate_classification(p.labels, p.gold_labels);
    report.top1 = cm.top1;
    report.top3 = cm.top3;
    report.per_class_accuracy = cm.per_class_accuracy;
    report.label_count_confusion = label_count_confusion(p.labels, p.gold_labels);
    report.false_negative_rate = report.label_count_confusion.false_negative_rate;
  } else {
    report.top1 = report.top3 = report.false_negative_rate = kNaN;
    report.per_class_accuracy.assign(model.config().num_classes, kNaN);
  }
  if (model.has_summarizer()) {
    const SummarizationMetrics sm = evaluate_summarization(p.relevance, p.gold_relevance);
    report.precision = sm.precision;
    report.recall = sm.recall;
  } else {
    report.precision = report.recall = kNaN;
  }
  return report;
}

}  // namespace ctxtag
