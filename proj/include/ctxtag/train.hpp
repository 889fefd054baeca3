#pragma once

#include <functional>
#include <vector>

#include "ctxtag/corpus.hpp"
#include "ctxtag/metrics.hpp"
#include "ctxtag/model.hpp"
#include "ctxtag/optim.hpp"

namespace ctxtag {

struct TrainConfig {
  double learning_rate = 2.5e-5;
  double l1 = 1e-5;
  double l2 = 1e-5;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  ClassWeighting class_weighting = ClassWeighting::positive_only;
  bool weight_relevance = true;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, adam_eps}; }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation split
};

/// Deep copy of parameter values, used for checkpoints.
using ParameterSnapshot = std::map<std::string, std::vector<double>>;

ParameterSnapshot snapshot(const NamedTensors& params);
void restore(NamedTensors& params, const ParameterSnapshot& snap);

struct TrainResult {
  std::vector<EpochRecord> history;
  ParameterSnapshot best;
  double best_val_loss = 0.0;
  std::size_t best_epoch = 0;  // 0 = initialization
  LossConfig loss;             // weights derived from the training split
};

// Return false to stop after this epoch.
using EpochCallback = std::function<bool(const EpochRecord& record, bool improved, const MultiTaskModel& model)>;

// Loss weights from the training documents: inverse-frequency class weights
// (empty classes counted once) and relevant/irrelevant sentence weights.
LossConfig derive_loss_config(const std::vector<DocumentRecord>& docs, const std::vector<std::size_t>& train_docs,
                              std::size_t num_classes, const TrainConfig& cfg);

// Mean over the samples of label + relevance cross entropy, whichever parts
// the variant has, without the penalty.
double sample_loss(const MultiTaskModel& model, const std::vector<DocumentRecord>& docs,
                   const std::vector<TrainingSample>& samples, const LossConfig& loss);

// Per epoch: shuffle the broadcast training samples, and for each batch
// backpropagate the mean joint loss plus the l1-l2 penalty, then step Adam.
// Samples from one document within a batch share a summarizer pass. The
// validation loss after each epoch picks the best parameters, which are
// loaded back into the model at the end. Without validation documents the
// epoch's training loss is used instead.
TrainResult train(MultiTaskModel& model, const std::vector<DocumentRecord>& docs, const CorpusSplit& split,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Classification metrics over the labelled sentences of `doc_refs`,
// summarization metrics over all of their sentences.
MetricsReport evaluate_model(const MultiTaskModel& model, const std::vector<DocumentRecord>& docs,
                             const std::vector<std::size_t>& doc_refs, const LossConfig& loss);

// Class and relevance probabilities for the given documents.
struct Predictions {
  std::vector<std::vector<double>> labels;  // per labelled sentence
  std::vector<LabelSet> gold_labels;
  std::vector<double> relevance;  // per sentence
  std::vector<bool> gold_relevance;
};

Predictions predict(const MultiTaskModel& model, const std::vector<DocumentRecord>& docs,
                    const std::vector<std::size_t>& doc_refs);

}  // namespace ctxtag
