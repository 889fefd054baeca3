#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctxtag/corpus.hpp"
#include "ctxtag/layers.hpp"

namespace ctxtag {

struct ModelConfig {
  std::size_t num_classes = 17;
  std::size_t learned_dim = 25;      // summarizer's trainable embedding width
  std::size_t word_hidden = 50;      // per direction
  std::size_t sentence_hidden = 50;  // per direction
  std::size_t attention_dim = 0;     // 0 = 2 * word_hidden
  std::size_t max_words = kMaxWords;
  std::size_t max_sentences = kMaxSentences;
  bool sentence_bidirectional = false;
  bool classifier_learned_embedding = false;

  std::size_t attention_width() const { return attention_dim ? attention_dim : 2 * word_hidden; }
  std::size_t sentence_width() const { return sentence_bidirectional ? 2 * sentence_hidden : sentence_hidden; }
};

enum class Variant { multitask, baseline_classifier, baseline_summarizer };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

/// Bidirectional word GRU followed by attention pooling.
struct SentenceEncoder {
  EmbeddingLayer embedding;
  GruCell forward;
  GruCell backward;
  AttentionPool attention;

  static SentenceEncoder create(const Tensor& pretrained, std::size_t learned_dim, std::size_t hidden,
                                std::size_t attention_dim, Rng& rng);
  std::size_t output_width() const { return 2 * forward.hidden_dim(); }
  void register_into(NamedTensors& out, const std::string& prefix) const;
};

// Pooled encoding of one padded sentence, length 2 * hidden.
Tensor encode_sentence(const SentenceEncoder& enc, const EncodedSentence& sentence);

/// Document summarizer: sentence encodings, a sentence-level GRU for
/// cross-sentence context, and a per-sentence relevance head.
struct SummarizerBranch {
  SentenceEncoder encoder;
  GruCell sentence_forward;
  std::optional<GruCell> sentence_backward;
  DenseHead relevance_head;

  std::size_t output_width() const;
  void register_into(NamedTensors& out, const std::string& prefix) const;
  // The sentence-level GRU weights, which alone carry the l1-l2 penalty.
  void register_regularized(NamedTensors& out, const std::string& prefix) const;
};

/// Sentence classifier; the label head sees the sentence encoding and,
/// in the joint model, the summarizer's encoding of the same sentence.
struct ClassifierBranch {
  SentenceEncoder encoder;
  DenseHead label_head;

  std::size_t shared_width() const { return label_head.in_dim() - encoder.output_width(); }
  void register_into(NamedTensors& out, const std::string& prefix) const;
};

struct SummarizerOutput {
  Tensor h_e;  // S x sentence width
  Tensor y_d;  // S
};

SummarizerOutput summarizer_forward(const SummarizerBranch& branch, const DocumentRecord& doc);

// sigmoid head over [shared_row, pooled sentence encoding], length K; the
// same layout share_slice produces.
Tensor classifier_forward(const ClassifierBranch& branch, const EncodedSentence& sentence, const Tensor& shared_row);

class MultiTaskModel {
 public:
  // Branch weights come from independent streams of `seed`, so a branch
  // starts from the same values in every variant that contains it. Only
  // the label head differs between the joint model and the lone classifier.
  static MultiTaskModel create(const ModelConfig& cfg, Variant variant, const Tensor& pretrained,
                               std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  Variant variant() const { return variant_; }
  bool has_summarizer() const { return summarizer_.has_value(); }
  bool has_classifier() const { return classifier_.has_value(); }
  const SummarizerBranch& summarizer() const;
  const ClassifierBranch& classifier() const;
  const Tensor& pretrained() const { return pretrained_; }

  // Trainable tensors by dotted name, e.g. "summarizer.sentence_gru.fwd.w_z".
  NamedTensors parameters() const;
  NamedTensors regularized_parameters() const;
  std::size_t parameter_count() const;

  // Keeps the PAD rows of learned embeddings at zero after an update.
  void after_update();

 private:
  ModelConfig config_;
  Variant variant_ = Variant::multitask;
  Tensor pretrained_;
  std::optional<SummarizerBranch> summarizer_;
  std::optional<ClassifierBranch> classifier_;
};

struct MultiTaskOutput {
  Tensor y_s;  // K
  Tensor y_d;  // S
  Tensor h_e;  // S x sentence width
};

MultiTaskOutput multitask_forward(const MultiTaskModel& model, const DocumentRecord& doc, const TrainingSample& sample);

// The classifier alone; depends only on the sentence.
Tensor baseline_classifier_forward(const MultiTaskModel& model, const EncodedSentence& sentence);

// The summarizer alone; relevance per sentence.
Tensor baseline_summarizer_forward(const MultiTaskModel& model, const DocumentRecord& doc);

// How class weights enter the label cross entropy. `positive_only` scales
// the positive term of class c by w_c and leaves the negative term at 1;
// `both_terms` scales both terms of class c by w_c.
enum class ClassWeighting { positive_only, both_terms, none };

std::string weighting_name(ClassWeighting w);
ClassWeighting parse_weighting(const std::string& name);

inline constexpr double kProbEpsilon = 1e-7;

struct LossConfig {
  std::vector<double> class_weights;                  // empty = all ones
  std::array<double, 2> relevance_weights{1.0, 1.0};  // {irrelevant, relevant}
  double l1 = 1e-5;
  double l2 = 1e-5;
  ClassWeighting weighting = ClassWeighting::positive_only;
};

// Weighted binary cross entropy summed over the K label outputs.
Tensor label_loss(const Tensor& y_s, const std::vector<bool>& gold, const LossConfig& cfg);

// Cross entropy summed over sentences, each term scaled by the weight of
// its gold relevance.
Tensor relevance_loss(const Tensor& y_d, const std::vector<bool>& gold, const LossConfig& cfg);

// l1 * sum|w| + l2 * sum w^2 over the given tensors.
Tensor l1l2_penalty(const NamedTensors& params, double l1, double l2);

// label_loss + relevance_loss + penalty over `regularized`.
Tensor joint_loss(const Tensor& y_s, const std::vector<bool>& gold_labels, const Tensor& y_d,
                  const std::vector<bool>& gold_relevance, const NamedTensors& regularized, const LossConfig& cfg);

}  // namespace ctxtag
