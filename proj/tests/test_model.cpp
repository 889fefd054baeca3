#include <gtest/gtest.h>

#include <cmath>

#include "ctxtag/error.hpp"
#include "ctxtag/grad_check.hpp"
#include "ctxtag/model.hpp"

using namespace ctxtag;

namespace {

constexpr std::size_t kVocab = 14;

Tensor random_pretrained(std::uint64_t seed, std::size_t dim = 3) {
  Rng rng(seed);
  std::vector<double> v(kVocab * dim);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  for (std::size_t j = 0; j < dim; ++j) v[j] = 0.0;
  return Tensor::matrix(kVocab, dim, std::move(v));
}

ModelConfig tiny_config(std::size_t k = 3) {
  ModelConfig cfg;
  cfg.num_classes = k;
  cfg.learned_dim = 2;
  cfg.word_hidden = 3;
  cfg.sentence_hidden = 3;
  cfg.attention_dim = 3;
  return cfg;
}

DocumentRecord random_document(Rng& rng, std::size_t sentences, std::size_t k) {
  DocumentRecord doc;
  doc.doc_id = "doc";
  for (std::size_t i = 0; i < sentences; ++i) {
    EncodedSentence s{std::vector<TokenId>(kMaxWords, kPadId), Mask(kMaxWords, false)};
    const std::size_t len = 1 + rng.index(5);
    for (std::size_t t = 0; t < len; ++t) {
      s.ids[t] = static_cast<TokenId>(1 + rng.index(kVocab - 1));
      s.mask[t] = true;
    }
    doc.sentences.push_back(std::move(s));
    std::vector<std::size_t> labels;
    if (rng.bernoulli(0.6)) labels.push_back(rng.index(k));
    doc.relevance.push_back(!labels.empty());
    doc.labels.push_back(std::move(labels));
  }
  if (!doc.relevance[0]) {
    doc.relevance[0] = true;
    doc.labels[0] = {0};
  }
  return doc;
}

void expect_open_unit(const Tensor& t) {
  for (double v : t.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (a.data()[i] != b.data()[i]) return false;
  }
  return true;
}

}  // namespace

TEST(Summarizer, ShapesAndRange) {
  const auto model = MultiTaskModel::create(tiny_config(), Variant::multitask, random_pretrained(1), 7);
  Rng rng(3);
  const auto doc = random_document(rng, 3, 3);
  const auto out = summarizer_forward(model.summarizer(), doc);
  EXPECT_EQ(out.h_e.shape(), (Shape{3, 3}));
  EXPECT_EQ(out.y_d.shape(), (Shape{3}));
  expect_open_unit(out.y_d);
}

TEST(Summarizer, BidirectionalWidth) {
  auto cfg = tiny_config();
  cfg.sentence_bidirectional = true;
  const auto model = MultiTaskModel::create(cfg, Variant::multitask, random_pretrained(1), 7);
  Rng rng(3);
  const auto doc = random_document(rng, 4, 3);
  EXPECT_EQ(summarizer_forward(model.summarizer(), doc).h_e.shape(), (Shape{4, 6}));
  EXPECT_EQ(model.classifier().shared_width(), 6u);
  EXPECT_EQ(model.regularized_parameters().size(), 18u);
}

TEST(Summarizer, EmptyDocumentThrows) {
  const auto model = MultiTaskModel::create(tiny_config(), Variant::multitask, random_pretrained(1), 7);
  EXPECT_THROW(summarizer_forward(model.summarizer(), DocumentRecord{}), ShapeError);
}

TEST(Summarizer, SentenceOrderMattersAfterTraining) {
  auto model = MultiTaskModel::create(tiny_config(), Variant::baseline_summarizer, random_pretrained(2), 5);
  Rng rng(9);
  const auto doc = random_document(rng, 4, 3);
  const LossConfig loss_cfg;
  auto params = model.parameters();
  for (int step = 0; step < 30; ++step) {
    for (auto& [name, p] : params) p.zero_grad();
    relevance_loss(summarizer_forward(model.summarizer(), doc).y_d, doc.relevance, loss_cfg).backward();
    for (auto& [name, p] : params) {
      auto data = p.mutable_data();
      const auto grad = p.grad();
      for (std::size_t i = 0; i < data.size(); ++i) data[i] -= 0.1 * grad[i];
    }
    model.after_update();
  }
  const Tensor before = summarizer_forward(model.summarizer(), doc).y_d;
  DocumentRecord swapped = doc;
  std::swap(swapped.sentences[0], swapped.sentences[3]);
  const Tensor after = summarizer_forward(model.summarizer(), swapped).y_d;
  // Sentences 1 and 2 are unchanged; only their context moved.
  const double change = std::max(std::abs(before.at(1) - after.at(1)), std::abs(before.at(2) - after.at(2)));
  EXPECT_GT(change, 1e-6);
}

TEST(Classifier, SeventeenOutputsInRange) {
  const auto model = MultiTaskModel::create(tiny_config(17), Variant::multitask, random_pretrained(1), 7);
  Rng rng(4);
  const auto doc = random_document(rng, 2, 17);
  const Tensor shared = Tensor::vector({0.3, -0.2, 0.5});
  const Tensor y = classifier_forward(model.classifier(), doc.sentences[0], shared);
  EXPECT_EQ(y.shape(), (Shape{17}));
  expect_open_unit(y);
}

TEST(Classifier, SharedRowReachesHead) {
  const auto model = MultiTaskModel::create(tiny_config(), Variant::multitask, random_pretrained(1), 7);
  Rng rng(4);
  const auto doc = random_document(rng, 2, 3);
  const Tensor zero = classifier_forward(model.classifier(), doc.sentences[0], Tensor::zeros({3}));
  const Tensor other = classifier_forward(model.classifier(), doc.sentences[0], Tensor::vector({0.9, -0.4, 0.2}));
  EXPECT_FALSE(bitwise_equal(zero, other));
}

TEST(Classifier, WidthMismatchThrows) {
  const auto model = MultiTaskModel::create(tiny_config(), Variant::multitask, random_pretrained(1), 7);
  Rng rng(4);
  const auto doc = random_document(rng, 2, 3);
  EXPECT_THROW(classifier_forward(model.classifier(), doc.sentences[0], Tensor::zeros({4})), ShapeError);
  EXPECT_THROW(baseline_classifier_forward(model, doc.sentences[0]), UsageError);
}

TEST(MultiTask, EqualsCompositionOfParts) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    const auto model = MultiTaskModel::create(tiny_config(), Variant::multitask, random_pretrained(seed), seed);
    const auto doc = random_document(rng, 1 + rng.index(5), 3);
    const std::size_t idx = rng.index(doc.size());
    const TrainingSample sample{0, idx, {true, false, false}};
    const auto joint = multitask_forward(model, doc, sample);
    const auto s = summarizer_forward(model.summarizer(), doc);
    const Tensor shared = share_slice(s.h_e, idx, encode_sentence(model.classifier().encoder, doc.sentences[idx]));
    const Tensor y_s = dense_sigmoid(model.classifier().label_head, shared);
    const Tensor y_s_direct = classifier_forward(model.classifier(), doc.sentences[idx], gather_rows(s.h_e, idx));
    ASSERT_TRUE(bitwise_equal(joint.y_d, s.y_d));
    ASSERT_TRUE(bitwise_equal(joint.h_e, s.h_e));
    ASSERT_TRUE(bitwise_equal(joint.y_s, y_s_direct));
    ASSERT_TRUE(bitwise_equal(joint.y_s, y_s));
  }
}

TEST(MultiTask, Deterministic) {
  Rng rng(3);
  const auto doc = random_document(rng, 4, 3);
  const TrainingSample sample{0, 0, {true, false, false}};
  const auto a = multitask_forward(MultiTaskModel::create(tiny_config(), Variant::multitask, random_pretrained(1), 9),
                                   doc, sample);
  const auto b = multitask_forward(MultiTaskModel::create(tiny_config(), Variant::multitask, random_pretrained(1), 9),
                                   doc, sample);
  EXPECT_TRUE(bitwise_equal(a.y_s, b.y_s));
  EXPECT_TRUE(bitwise_equal(a.y_d, b.y_d));
}

TEST(MultiTask, LabelLossReachesSummarizer) {
  const auto model = MultiTaskModel::create(tiny_config(), Variant::multitask, random_pretrained(1), 9);
  Rng rng(3);
  const auto doc = random_document(rng, 4, 3);
  const TrainingSample sample{0, 2, {false, true, false}};
  const auto out = multitask_forward(model, doc, sample);
  label_loss(out.y_s, sample.label_vector, LossConfig{}).backward();
  double summarizer_mass = 0.0;
  for (const auto& [name, p] : model.parameters()) {
    if (name.rfind("summarizer.", 0) != 0 || !p.has_grad()) continue;
    for (double g : p.grad()) summarizer_mass += std::abs(g);
  }
  EXPECT_GT(summarizer_mass, 0.0);
  // The relevance head is not on the label path.
  const auto params = model.parameters();
  const Tensor& head = params.at("summarizer.relevance_head.w");
  if (head.has_grad()) {
    for (double g : head.grad()) EXPECT_EQ(g, 0.0);
  }
}

TEST(MultiTask, SampleIndexOutOfRange) {
  const auto model = MultiTaskModel::create(tiny_config(), Variant::multitask, random_pretrained(1), 9);
  Rng rng(3);
  const auto doc = random_document(rng, 2, 3);
  EXPECT_THROW(multitask_forward(model, doc, TrainingSample{0, 2, {true, false, false}}), ShapeError);
}

// End to end through both branches, with respect to the trainable
// embedding tables that feed them.
TEST(MultiTask, GradientCheckFullForward) {
  auto cfg = tiny_config();
  cfg.classifier_learned_embedding = true;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto model = MultiTaskModel::create(cfg, Variant::multitask, random_pretrained(seed), seed);
    Rng rng(seed);
    const auto doc = random_document(rng, 3, 3);
    const TrainingSample sample{0, 0, {true, false, true}};
    LossConfig loss_cfg;
    loss_cfg.class_weights = {2.0, 0.5, 1.5};
    loss_cfg.relevance_weights = {0.7, 1.4};
    const auto params = model.parameters();
    std::vector<Tensor> inputs{params.at("summarizer.embedding.learned"), params.at("classifier.embedding.learned")};
    const auto regularized = model.regularized_parameters();
    const double err = grad_check(
        [&] {
          const auto out = multitask_forward(model, doc, sample);
          return joint_loss(out.y_s, sample.label_vector, out.y_d, doc.relevance, regularized, loss_cfg);
        },
        inputs);
    EXPECT_LT(err, 1e-5) << "seed " << seed;
  }
}

// Every parameter element against central differences. Components of a few
// 1e-6 sit at the finite-difference rounding floor (about ulp(loss) / 2h), so
// this compares absolute differences.
TEST(MultiTask, EveryParameterGradientMatchesFiniteDifferences) {
  const auto model = MultiTaskModel::create(tiny_config(), Variant::multitask, random_pretrained(5), 5);
  Rng rng(5);
  const auto doc = random_document(rng, 3, 3);
  const TrainingSample sample{0, 2, {false, true, false}};
  LossConfig loss_cfg;
  loss_cfg.class_weights = {2.0, 0.5, 1.5};
  const auto regularized = model.regularized_parameters();
  const ScalarFn f = [&] {
    const auto out = multitask_forward(model, doc, sample);
    return joint_loss(out.y_s, sample.label_vector, out.y_d, doc.relevance, regularized, loss_cfg);
  };
  auto params = model.parameters();
  for (auto& [name, p] : params) p.zero_grad();
  f().backward();
  for (auto& [name, p] : params) {
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    const auto numeric = numeric_gradient(f, p);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      ASSERT_NEAR(analytic[i], numeric[i], 1e-8) << name << "[" << i << "]";
    }
  }
}

TEST(BaselineClassifier, OutputAndDocumentInvariance) {
  const auto model = MultiTaskModel::create(tiny_config(17), Variant::baseline_classifier, random_pretrained(1), 7);
  EXPECT_FALSE(model.has_summarizer());
  Rng rng(5);
  auto doc_a = random_document(rng, 3, 17);
  auto doc_b = random_document(rng, 5, 17);
  doc_b.sentences[4] = doc_a.sentences[1];
  const Tensor a = baseline_classifier_forward(model, doc_a.sentences[1]);
  const Tensor b = baseline_classifier_forward(model, doc_b.sentences[4]);
  EXPECT_EQ(a.shape(), (Shape{17}));
  expect_open_unit(a);
  EXPECT_TRUE(bitwise_equal(a, b));
}

TEST(BaselineClassifier, GradientCheck) {
  auto cfg = tiny_config();
  cfg.classifier_learned_embedding = true;
  const auto model = MultiTaskModel::create(cfg, Variant::baseline_classifier, random_pretrained(4), 4);
  Rng rng(6);
  const auto doc = random_document(rng, 2, 3);
  std::vector<Tensor> params{model.parameters().at("classifier.embedding.learned")};
  const double err = grad_check(
      [&] { return label_loss(baseline_classifier_forward(model, doc.sentences[1]), {false, true, false}, LossConfig{}); },
      params);
  EXPECT_LT(err, 1e-5);
}

TEST(BaselineSummarizer, OutputAndGradientCheck) {
  const auto model = MultiTaskModel::create(tiny_config(), Variant::baseline_summarizer, random_pretrained(4), 4);
  EXPECT_FALSE(model.has_classifier());
  Rng rng(6);
  const auto doc = random_document(rng, 4, 3);
  const Tensor y = baseline_summarizer_forward(model, doc);
  EXPECT_EQ(y.shape(), (Shape{4}));
  expect_open_unit(y);
  std::vector<Tensor> params{model.parameters().at("summarizer.embedding.learned")};
  LossConfig cfg;
  cfg.relevance_weights = {0.6, 2.0};
  const double err =
      grad_check([&] { return relevance_loss(baseline_summarizer_forward(model, doc), doc.relevance, cfg); }, params);
  EXPECT_LT(err, 1e-5);
}

TEST(ParameterCount, JointModelAddsOnlyHeadWidth) {
  for (bool bidirectional : {false, true}) {
    auto cfg = tiny_config(17);
    cfg.sentence_bidirectional = bidirectional;
    const Tensor pre = random_pretrained(1);
    const auto joint = MultiTaskModel::create(cfg, Variant::multitask, pre, 1);
    const auto cls = MultiTaskModel::create(cfg, Variant::baseline_classifier, pre, 1);
    const auto summ = MultiTaskModel::create(cfg, Variant::baseline_summarizer, pre, 1);
    const std::size_t delta = cfg.sentence_width() * cfg.num_classes;
    EXPECT_EQ(joint.parameter_count(), cls.parameter_count() + summ.parameter_count() + delta);
    std::size_t summarizer_part = 0;
    for (const auto& [name, t] : joint.parameters()) {
      if (name.rfind("summarizer.", 0) == 0) summarizer_part += t.numel();
    }
    EXPECT_EQ(summarizer_part, summ.parameter_count());
  }
}

TEST(ParameterCount, SharedInitializationAcrossVariants) {
  const Tensor pre = random_pretrained(1);
  const auto joint = MultiTaskModel::create(tiny_config(), Variant::multitask, pre, 3);
  const auto summ = MultiTaskModel::create(tiny_config(), Variant::baseline_summarizer, pre, 3);
  const auto cls = MultiTaskModel::create(tiny_config(), Variant::baseline_classifier, pre, 3);
  const auto jp = joint.parameters();
  for (const auto& [name, t] : summ.parameters()) EXPECT_TRUE(bitwise_equal(jp.at(name), t)) << name;
  for (const auto& [name, t] : cls.parameters()) {
    if (name.find("label_head") == std::string::npos) {
      EXPECT_TRUE(bitwise_equal(jp.at(name), t)) << name;
    }
  }
}

TEST(JointLoss, PerfectPredictionsNearZero) {
  const double eps = kProbEpsilon;
  const Tensor y_s = Tensor::vector({1 - eps, eps, 1 - eps});
  const Tensor y_d = Tensor::vector({eps, 1 - eps});
  NamedTensors zero_weights{{"w", Tensor::zeros({2, 2}, true)}};
  const Tensor loss = joint_loss(y_s, {true, false, true}, y_d, {false, true}, zero_weights, LossConfig{});
  EXPECT_LT(loss.item(), 1e-5);
}

TEST(JointLoss, SingleUnweightedTerm) {
  const Tensor loss = label_loss(Tensor::vector({0.5}), {true}, LossConfig{});
  EXPECT_NEAR(loss.item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(loss.item(), 0.6931, 1e-4);
}

TEST(JointLoss, WeightedTwoClassCase) {
  const double expected = 2.0 * -std::log(0.8) + 1.0 * -std::log(0.7);
  EXPECT_NEAR(expected, 0.80296, 1e-5);
  for (ClassWeighting mode : {ClassWeighting::positive_only, ClassWeighting::both_terms}) {
    LossConfig cfg;
    cfg.class_weights = {2.0, 1.0};
    cfg.weighting = mode;
    EXPECT_NEAR(label_loss(Tensor::vector({0.8, 0.3}), {true, false}, cfg).item(), expected, 1e-12);
  }
}

TEST(JointLoss, WeightingModesDifferOnNegatives) {
  LossConfig cfg;
  cfg.class_weights = {2.0, 3.0};
  const Tensor y = Tensor::vector({0.8, 0.3});
  cfg.weighting = ClassWeighting::positive_only;
  EXPECT_NEAR(label_loss(y, {true, false}, cfg).item(), -2.0 * std::log(0.8) - std::log(0.7), 1e-12);
  cfg.weighting = ClassWeighting::both_terms;
  EXPECT_NEAR(label_loss(y, {true, false}, cfg).item(), -2.0 * std::log(0.8) - 3.0 * std::log(0.7), 1e-12);
  cfg.weighting = ClassWeighting::none;
  EXPECT_NEAR(label_loss(y, {true, false}, cfg).item(), -std::log(0.8) - std::log(0.7), 1e-12);
}

TEST(JointLoss, RelevanceWeightsFollowGold) {
  LossConfig cfg;
  cfg.relevance_weights = {0.5, 4.0};
  const double got = relevance_loss(Tensor::vector({0.9, 0.2}), {true, false}, cfg).item();
  EXPECT_NEAR(got, -4.0 * std::log(0.9) - 0.5 * std::log(0.8), 1e-12);
}

TEST(JointLoss, NeverBelowPenalty) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> ys(3), yd(4);
    for (double& v : ys) v = rng.uniform();
    for (double& v : yd) v = rng.uniform();
    std::vector<bool> gl(3), gr(4);
    for (std::size_t i = 0; i < 3; ++i) gl[i] = rng.bernoulli(0.5);
    for (std::size_t i = 0; i < 4; ++i) gr[i] = rng.bernoulli(0.5);
    NamedTensors params{{"w", Tensor::vector({rng.normal(), rng.normal()})}};
    const double penalty = l1l2_penalty(params, 1e-5, 1e-5).item();
    const double loss = joint_loss(Tensor::vector(ys), gl, Tensor::vector(yd), gr, params, LossConfig{}).item();
    EXPECT_GE(loss, penalty);
  }
}

TEST(JointLoss, ShapeMismatchThrows) {
  EXPECT_THROW(label_loss(Tensor::vector({0.5, 0.5}), {true}, LossConfig{}), ShapeError);
  EXPECT_THROW(relevance_loss(Tensor::vector({0.5}), {true, false}, LossConfig{}), ShapeError);
  LossConfig cfg;
  cfg.class_weights = {1.0};
  EXPECT_THROW(label_loss(Tensor::vector({0.5, 0.5}), {true, false}, cfg), ShapeError);
}

TEST(Penalty, Examples) {
  NamedTensors params{{"w", Tensor::vector({1.0, -2.0}, true)}};
  const Tensor p = l1l2_penalty(params, 1e-5, 1e-5);
  EXPECT_NEAR(p.item(), 8e-5, 1e-18);
  EXPECT_EQ(l1l2_penalty({{"z", Tensor::zeros({3})}}, 1e-5, 1e-5).item(), 0.0);
  NamedTensors two{{"w", Tensor::vector({2.0, 0.0}, true)}};
  l1l2_penalty(two, 1e-5, 1e-5).backward();
  EXPECT_NEAR(two.at("w").grad()[0], 5e-5, 1e-18);
  EXPECT_EQ(two.at("w").grad()[1], 0.0);
}

TEST(Variants, NamesRoundTrip) {
  for (Variant v : {Variant::multitask, Variant::baseline_classifier, Variant::baseline_summarizer}) {
    EXPECT_EQ(parse_variant(variant_name(v)), v);
  }
  EXPECT_THROW(parse_variant("nope"), UsageError);
  EXPECT_EQ(parse_weighting("both_terms"), ClassWeighting::both_terms);
}
