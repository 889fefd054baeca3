#include "ctxtag/model.hpp"

#include "ctxtag/error.hpp"

namespace ctxtag {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::multitask: return "multitask";
    case Variant::baseline_classifier: return "baseline_classifier";
    case Variant::baseline_summarizer: return "baseline_summarizer";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::multitask, Variant::baseline_classifier, Variant::baseline_summarizer}) {
    if (variant_name(v) == name) return v;
  }
  throw UsageError("unknown model variant '" + name + "'");
}

std::string weighting_name(ClassWeighting w) {
  switch (w) {
    case ClassWeighting::positive_only: return "positive_only";
    case ClassWeighting::both_terms: return "both_terms";
    case ClassWeighting::none: return "none";
  }
  return "unknown";
}

ClassWeighting parse_weighting(const std::string& name) {
  for (ClassWeighting w : {ClassWeighting::positive_only, ClassWeighting::both_terms, ClassWeighting::none}) {
    if (weighting_name(w) == name) return w;
  }
  throw UsageError("unknown class weighting '" + name + "'");
}

// ---------------------------------------------------------------------------
// Branches

SentenceEncoder SentenceEncoder::create(const Tensor& pretrained, std::size_t learned_dim, std::size_t hidden,
                                        std::size_t attention_dim, Rng& rng) {
  EmbeddingLayer embedding = EmbeddingLayer::create(pretrained, learned_dim, rng);
  const std::size_t in = embedding.width();
  GruCell fwd = GruCell::create(in, hidden, rng);
  GruCell bwd = GruCell::create(in, hidden, rng);
  AttentionPool att = AttentionPool::create(2 * hidden, attention_dim, rng);
  return SentenceEncoder{std::move(embedding), std::move(fwd), std::move(bwd), std::move(att)};
}

void SentenceEncoder::register_into(NamedTensors& out, const std::string& prefix) const {
  embedding.register_into(out, prefix + "embedding.");
  forward.register_into(out, prefix + "word_gru.fwd.");
  backward.register_into(out, prefix + "word_gru.bwd.");
  attention.register_into(out, prefix + "word_attention.");
}

Tensor encode_sentence(const SentenceEncoder& enc, const EncodedSentence& sentence) {
  if (sentence.ids.size() != sentence.mask.size()) throw ShapeError("sentence ids and mask differ in length");
  // Masked positions neither move the GRU state nor receive attention, so
  // dropping them up front gives the same encoding.
  std::vector<TokenId> live;
  for (std::size_t i = 0; i < sentence.ids.size(); ++i) {
    if (sentence.mask[i]) live.push_back(sentence.ids[i]);
  }
  if (live.empty()) throw ShapeError("sentence has no real tokens");
  const Mask all(live.size(), true);
  const Tensor states = bigru(enc.forward, enc.backward, embed_lookup(enc.embedding, live), all);
  return attention_pool(enc.attention, states, all).pooled;
}

std::size_t SummarizerBranch::output_width() const {
  return sentence_forward.hidden_dim() * (sentence_backward ? 2 : 1);
}

void SummarizerBranch::register_into(NamedTensors& out, const std::string& prefix) const {
  encoder.register_into(out, prefix);
  register_regularized(out, prefix);
  relevance_head.register_into(out, prefix + "relevance_head.");
}

void SummarizerBranch::register_regularized(NamedTensors& out, const std::string& prefix) const {
  sentence_forward.register_into(out, prefix + "sentence_gru.fwd.");
  if (sentence_backward) sentence_backward->register_into(out, prefix + "sentence_gru.bwd.");
}

void ClassifierBranch::register_into(NamedTensors& out, const std::string& prefix) const {
  encoder.register_into(out, prefix);
  label_head.register_into(out, prefix + "label_head.");
}

SummarizerOutput summarizer_forward(const SummarizerBranch& branch, const DocumentRecord& doc) {
  if (doc.size() == 0) throw ShapeError("document '" + doc.doc_id + "' has no sentences");
  std::vector<Tensor> rows;
  rows.reserve(doc.size());
  for (const EncodedSentence& s : doc.sentences) rows.push_back(encode_sentence(branch.encoder, s));
  const Tensor encodings = stack_rows(rows);
  const Mask all(doc.size(), true);
  Tensor h_e = branch.sentence_backward
                   ? bigru(branch.sentence_forward, *branch.sentence_backward, encodings, all)
                   : gru_sequence(branch.sentence_forward, encodings, all, false);
  Tensor y_d = reshape(dense_sigmoid(branch.relevance_head, h_e), {doc.size()});
  return SummarizerOutput{std::move(h_e), std::move(y_d)};
}

Tensor classifier_forward(const ClassifierBranch& branch, const EncodedSentence& sentence, const Tensor& shared_row) {
  if (shared_row.rank() != 1 || shared_row.numel() != branch.shared_width()) {
    throw ShapeError("shared row " + shape_str(shared_row.shape()) + " does not match width " +
                     std::to_string(branch.shared_width()));
  }
  const Tensor pooled = encode_sentence(branch.encoder, sentence);
  return dense_sigmoid(branch.label_head, concat({shared_row, pooled}, 0));
}

// ---------------------------------------------------------------------------
// Model

MultiTaskModel MultiTaskModel::create(const ModelConfig& cfg, Variant variant, const Tensor& pretrained,
                                      std::uint64_t seed) {
  if (cfg.num_classes == 0 || cfg.word_hidden == 0 || cfg.sentence_hidden == 0) {
    throw UsageError("model dimensions must be positive");
  }
  if (pretrained.rank() != 2) throw ShapeError("pretrained table must be a matrix");
  MultiTaskModel m;
  m.config_ = cfg;
  m.variant_ = variant;
  m.pretrained_ = pretrained.requires_grad() ? pretrained.detach() : pretrained;
  Rng root(seed);
  Rng summarizer_rng = root.fork(1);
  Rng classifier_rng = root.fork(2);
  Rng head_rng = root.fork(3);
  if (variant != Variant::baseline_classifier) {
    Rng& rng = summarizer_rng;
    SummarizerBranch s{SentenceEncoder::create(m.pretrained_, cfg.learned_dim, cfg.word_hidden,
                                               cfg.attention_width(), rng),
                       GruCell{}, std::nullopt, DenseHead{}};
    s.sentence_forward = GruCell::create(s.encoder.output_width(), cfg.sentence_hidden, rng);
    if (cfg.sentence_bidirectional) s.sentence_backward = GruCell::create(s.encoder.output_width(), cfg.sentence_hidden, rng);
    s.relevance_head = DenseHead::create(s.output_width(), 1, rng);
    m.summarizer_ = std::move(s);
  }
  if (variant != Variant::baseline_summarizer) {
    Rng& rng = classifier_rng;
    SentenceEncoder enc = SentenceEncoder::create(m.pretrained_, cfg.classifier_learned_embedding ? cfg.learned_dim : 0,
                                                  cfg.word_hidden, cfg.attention_width(), rng);
    const std::size_t shared = variant == Variant::multitask ? cfg.sentence_width() : 0;
    DenseHead head = DenseHead::create(enc.output_width() + shared, cfg.num_classes, head_rng);
    m.classifier_ = ClassifierBranch{std::move(enc), std::move(head)};
  }
  return m;
}

const SummarizerBranch& MultiTaskModel::summarizer() const {
  if (!summarizer_) throw UsageError(variant_name(variant_) + " model has no summarizer");
  return *summarizer_;
}

const ClassifierBranch& MultiTaskModel::classifier() const {
  if (!classifier_) throw UsageError(variant_name(variant_) + " model has no classifier");
  return *classifier_;
}

NamedTensors MultiTaskModel::parameters() const {
  NamedTensors out;
  if (summarizer_) summarizer_->register_into(out, "summarizer.");
  if (classifier_) classifier_->register_into(out, "classifier.");
  return out;
}

NamedTensors MultiTaskModel::regularized_parameters() const {
  NamedTensors out;
  if (summarizer_) summarizer_->register_regularized(out, "summarizer.");
  return out;
}

std::size_t MultiTaskModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters()) n += t.numel();
  return n;
}

void MultiTaskModel::after_update() {
  if (summarizer_) summarizer_->encoder.embedding.reset_pad_row();
  if (classifier_) classifier_->encoder.embedding.reset_pad_row();
}

MultiTaskOutput multitask_forward(const MultiTaskModel& model, const DocumentRecord& doc, const TrainingSample& sample) {
  if (model.variant() != Variant::multitask) throw UsageError("multitask_forward needs the joint model");
  if (sample.sentence_index >= doc.size()) {
    throw ShapeError("sentence index " + std::to_string(sample.sentence_index) + " outside document of " +
                     std::to_string(doc.size()) + " sentences");
  }
  SummarizerOutput s = summarizer_forward(model.summarizer(), doc);
  const Tensor shared = gather_rows(s.h_e, sample.sentence_index);
  Tensor y_s = classifier_forward(model.classifier(), doc.sentences[sample.sentence_index], shared);
  return MultiTaskOutput{std::move(y_s), std::move(s.y_d), std::move(s.h_e)};
}

Tensor baseline_classifier_forward(const MultiTaskModel& model, const EncodedSentence& sentence) {
  const ClassifierBranch& branch = model.classifier();
  if (branch.shared_width() != 0) throw UsageError("joint model's classifier needs a shared row");
  return dense_sigmoid(branch.label_head, encode_sentence(branch.encoder, sentence));
}

Tensor baseline_summarizer_forward(const MultiTaskModel& model, const DocumentRecord& doc) {
  return summarizer_forward(model.summarizer(), doc).y_d;
}

// ---------------------------------------------------------------------------
// Losses

namespace {

// sum_i pos_i * log(p_i) + neg_i * log(1 - p_i), p clamped away from 0 and 1.
Tensor weighted_log_likelihood(const Tensor& y, std::vector<double> pos, std::vector<double> neg) {
  const Shape shape{pos.size()};
  const Tensor p = clamp(y, kProbEpsilon, 1.0 - kProbEpsilon);
  return sum(add(mul(log(p), Tensor(shape, std::move(pos))), mul(log(one_minus(p)), Tensor(shape, std::move(neg)))));
}

}  // namespace

Tensor label_loss(const Tensor& y_s, const std::vector<bool>& gold, const LossConfig& cfg) {
  const std::size_t k = gold.size();
  if (y_s.rank() != 1 || y_s.numel() != k) {
    throw ShapeError("label output " + shape_str(y_s.shape()) + " vs " + std::to_string(k) + " gold labels");
  }
  if (!cfg.class_weights.empty() && cfg.class_weights.size() != k) {
    throw ShapeError("expected " + std::to_string(k) + " class weights, got " + std::to_string(cfg.class_weights.size()));
  }
  std::vector<double> pos(k, 0.0);
  std::vector<double> neg(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const double w = cfg.class_weights.empty() || cfg.weighting == ClassWeighting::none ? 1.0 : cfg.class_weights[c];
    if (gold[c]) {
      pos[c] = -w;
    } else {
      neg[c] = cfg.weighting == ClassWeighting::both_terms ? -w : -1.0;
    }
  }
  return weighted_log_likelihood(y_s, std::move(pos), std::move(neg));
}

Tensor relevance_loss(const Tensor& y_d, const std::vector<bool>& gold, const LossConfig& cfg) {
  const std::size_t s = gold.size();
  if (y_d.rank() != 1 || y_d.numel() != s) {
    throw ShapeError("relevance output " + shape_str(y_d.shape()) + " vs " + std::to_string(s) + " gold values");
  }
  std::vector<double> pos(s, 0.0);
  std::vector<double> neg(s, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    if (gold[i]) {
      pos[i] = -cfg.relevance_weights[1];
    } else {
      neg[i] = -cfg.relevance_weights[0];
    }
  }
  return weighted_log_likelihood(y_d, std::move(pos), std::move(neg));
}

Tensor l1l2_penalty(const NamedTensors& params, double l1, double l2) {
  if (l1 < 0.0 || l2 < 0.0) throw UsageError("regularization coefficients must be non-negative");
  Tensor total = Tensor::scalar(0.0);
  for (const auto& [name, w] : params) {
    if (l1 > 0.0) total = add(total, scale(sum(abs(w)), l1));
    if (l2 > 0.0) total = add(total, scale(sum(mul(w, w)), l2));
  }
  return total;
}

Tensor joint_loss(const Tensor& y_s, const std::vector<bool>& gold_labels, const Tensor& y_d,
                  const std::vector<bool>& gold_relevance, const NamedTensors& regularized, const LossConfig& cfg) {
  return add(add(label_loss(y_s, gold_labels, cfg), relevance_loss(y_d, gold_relevance, cfg)),
             l1l2_penalty(regularized, cfg.l1, cfg.l2));
}

}  // namespace ctxtag
