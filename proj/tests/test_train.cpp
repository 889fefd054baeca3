#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ctxtag/embeddings.hpp"
#include "ctxtag/error.hpp"
#include "ctxtag/synth.hpp"
#include "ctxtag/train.hpp"

using namespace ctxtag;

namespace {

struct Fixture {
  std::vector<DocumentRecord> docs;
  Tensor pretrained;
  std::size_t classes = 0;
};

Fixture synth_fixture(std::size_t n_docs, std::size_t k, std::uint64_t seed, double context = 0.5) {
  SynthConfig sc;
  sc.seed = seed;
  sc.n_docs = n_docs;
  sc.num_classes = k;
  sc.sents_per_doc = 10;
  sc.context_strength = context;
  const auto raw = synth_corpus(sc);
  const Vocab vocab = corpus_vocab(raw);
  Fixture f;
  f.docs = encode_corpus(raw, vocab, synth_class_names(k));
  f.pretrained = pretrained_matrix(random_embeddings(vocab, 8, seed), vocab);
  f.classes = k;
  return f;
}

ModelConfig small_config(std::size_t k) {
  ModelConfig cfg;
  cfg.num_classes = k;
  cfg.learned_dim = 4;
  cfg.word_hidden = 8;
  cfg.sentence_hidden = 8;
  cfg.attention_dim = 8;
  return cfg;
}

CorpusSplit all_train(std::size_t n) {
  CorpusSplit s;
  for (std::size_t i = 0; i < n; ++i) s.train.push_back(i);
  return s;
}

NamedTensors single(Tensor t) { return {{"p", t}}; }

// Brute-force recount oracles.
std::vector<std::size_t> oracle_order(const std::vector<double>& p) {
  std::vector<std::size_t> order;
  std::vector<bool> used(p.size(), false);
  for (std::size_t r = 0; r < p.size(); ++r) {
    std::size_t best = p.size();
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (!used[c] && (best == p.size() || p[c] > p[best])) best = c;
    }
    used[best] = true;
    order.push_back(best);
  }
  return order;
}

bool contains(const LabelSet& s, std::size_t c) {
  for (std::size_t x : s) {
    if (x == c) return true;
  }
  return false;
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p = Tensor::vector({1.0, -2.0, 0.5}, true);
  NamedTensors params = single(p);
  AdamState state;
  adam_step(params, {{"p", {0.3, -4.0, 0.0}}}, state, {0.01, 0.9, 0.999, 1e-8});
  EXPECT_NEAR(p.data()[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(p.data()[1], -2.0 + 0.01, 1e-9);
  EXPECT_EQ(p.data()[2], 0.5);
  EXPECT_EQ(state.t, 1u);
}

TEST(Adam, TwoStepTrace) {
  Tensor p = Tensor::vector({0.0}, true);
  NamedTensors params = single(p);
  AdamState state;
  const AdamConfig cfg{0.1, 0.9, 0.999, 1e-8};
  adam_step(params, {{"p", {1.0}}}, state, cfg);
  adam_step(params, {{"p", {-1.0}}}, state, cfg);
  // Hand trace: m1 = 0.1, v1 = 0.001; m2 = 0.09 - 0.1 = -0.01, v2 = 0.000999 + 0.001.
  const double step1 = 0.1 * (0.1 / 0.1) / (std::sqrt(0.001 / 0.001) + 1e-8);
  const double m2 = -0.01 / (1.0 - 0.81);
  const double v2 = (0.999 * 0.001 + 0.001) / (1.0 - 0.999 * 0.999);
  const double step2 = 0.1 * m2 / (std::sqrt(v2) + 1e-8);
  EXPECT_NEAR(p.data()[0], -step1 - step2, 1e-15);
}

TEST(Adam, ZeroLearningRateLeavesParameters) {
  Tensor p = Tensor::vector({0.25, -1.5}, true);
  NamedTensors params = single(p);
  AdamState state;
  adam_step(params, {{"p", {3.0, 7.0}}}, state, {0.0, 0.9, 0.999, 1e-8});
  EXPECT_EQ(p.data()[0], 0.25);
  EXPECT_EQ(p.data()[1], -1.5);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor p = Tensor::vector({0.25, -1.5}, true);
  NamedTensors params = single(p);
  AdamState state;
  for (int i = 0; i < 3; ++i) adam_step(params, {}, state, {0.1, 0.9, 0.999, 1e-8});
  EXPECT_EQ(p.data()[0], 0.25);
  EXPECT_EQ(p.data()[1], -1.5);
}

TEST(Adam, ShapeMismatchThrows) {
  NamedTensors params = single(Tensor::vector({1.0, 2.0}, true));
  AdamState state;
  EXPECT_THROW(adam_step(params, {{"p", {1.0}}}, state, {}), ShapeError);
  EXPECT_THROW(adam_step(params, {{"q", {1.0}}}, state, {}), ShapeError);
}

TEST(Metrics, TopKExample) {
  // Gold {2}; ranking 5, 2, 9: top-1 miss, top-3 hit.
  std::vector<double> p(10, 0.01);
  p[5] = 0.9;
  p[2] = 0.8;
  p[9] = 0.7;
  const auto m = evaluate_classification({p}, {{2}});
  EXPECT_EQ(m.top1, 0.0);
  EXPECT_EQ(m.top3, 1.0);
}

TEST(Metrics, TiesRankLowerIndexFirst) {
  EXPECT_EQ(rank_classes({0.5, 0.7, 0.7, 0.1}), (std::vector<std::size_t>{1, 2, 0, 3}));
}

TEST(Metrics, PerClassWithoutSupportIsNaN) {
  const auto m = evaluate_classification({{0.9, 0.1, 0.2}}, {{0}});
  EXPECT_EQ(m.per_class_accuracy[0], 1.0);
  EXPECT_TRUE(std::isnan(m.per_class_accuracy[1]));
}

TEST(Metrics, EmptyGoldSetThrows) {
  EXPECT_THROW(evaluate_classification({{0.9, 0.1}}, {{}}), DataError);
}

TEST(Metrics, SummarizationEdgeCases) {
  const auto none = evaluate_summarization({0.1, 0.2}, {false, false});
  EXPECT_EQ(none.precision, 1.0);
  EXPECT_EQ(none.recall, 1.0);
  const auto m = evaluate_summarization({0.9, 0.6, 0.2, 0.5}, {true, false, true, true});
  EXPECT_DOUBLE_EQ(m.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.recall, 2.0 / 3.0);
}

TEST(Metrics, MatchBruteForceRecount) {
  Rng rng(20);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.index(8);
    const std::size_t n = 1 + rng.index(30);
    std::vector<std::vector<double>> preds(n, std::vector<double>(k));
    std::vector<LabelSet> golds(n);
    std::vector<double> rel(n);
    std::vector<bool> gold_rel(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid so ties and exact threshold hits occur.
      for (double& v : preds[i]) v = static_cast<double>(rng.index(11)) / 10.0;
      std::set<std::size_t> g;
      const std::size_t count = 1 + rng.index(std::min<std::size_t>(k, 6));
      while (g.size() < count) g.insert(rng.index(k));
      golds[i].assign(g.begin(), g.end());
      rel[i] = static_cast<double>(rng.index(11)) / 10.0;
      gold_rel[i] = rng.bernoulli(0.5);
    }

    std::size_t top1 = 0, top3 = 0, tp = 0, fp = 0, fn = 0, labelled = 0, missed = 0;
    std::vector<std::size_t> support(k, 0), hit(k, 0);
    std::array<std::array<std::size_t, 6>, 6> confusion{};
    for (std::size_t i = 0; i < n; ++i) {
      const auto order = oracle_order(preds[i]);
      top1 += contains(golds[i], order[0]);
      bool any = false;
      for (std::size_t r = 0; r < std::min<std::size_t>(3, k); ++r) any = any || contains(golds[i], order[r]);
      top3 += any;
      std::size_t predicted = 0;
      for (std::size_t c = 0; c < k; ++c) {
        predicted += preds[i][c] >= 0.5;
        if (contains(golds[i], c)) {
          ++support[c];
          hit[c] += preds[i][c] >= 0.5;
        }
      }
      ++confusion[std::min<std::size_t>(golds[i].size(), 5)][std::min<std::size_t>(predicted, 5)];
      ++labelled;
      missed += predicted == 0;
      const bool r = rel[i] >= 0.5;
      tp += r && gold_rel[i];
      fp += r && !gold_rel[i];
      fn += !r && gold_rel[i];
    }

    const auto cm = evaluate_classification(preds, golds);
    EXPECT_EQ(cm.top1, static_cast<double>(top1) / static_cast<double>(n));
    EXPECT_EQ(cm.top3, static_cast<double>(top3) / static_cast<double>(n));
    for (std::size_t c = 0; c < k; ++c) {
      EXPECT_EQ(cm.per_class_support[c], support[c]);
      if (support[c] == 0) {
        EXPECT_TRUE(std::isnan(cm.per_class_accuracy[c]));
      } else {
        EXPECT_EQ(cm.per_class_accuracy[c], static_cast<double>(hit[c]) / static_cast<double>(support[c]));
      }
    }
    const auto sm = evaluate_summarization(rel, gold_rel);
    EXPECT_EQ(sm.precision, tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp));
    EXPECT_EQ(sm.recall, tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn));
    const auto lc = label_count_confusion(preds, golds);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(lc.matrix[i][j], confusion[i][j]);
    }
    EXPECT_EQ(lc.total(), n);
    EXPECT_EQ(lc.false_negative_rate, static_cast<double>(missed) / static_cast<double>(labelled));
  }
}

TEST(Train, ConfigValidation) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = {};
  cfg.learning_rate = -1.0;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = {};
  cfg.beta1 = 1.0;
  EXPECT_THROW(cfg.validate(), UsageError);
}

TEST(Train, ZeroEpochsKeepsInitialParameters) {
  auto f = synth_fixture(6, 3, 2);
  auto model = MultiTaskModel::create(small_config(3), Variant::multitask, f.pretrained, 5);
  const auto before = snapshot(model.parameters());
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto result = train(model, f.docs, all_train(f.docs.size()), cfg);
  EXPECT_TRUE(result.history.empty());
  EXPECT_EQ(result.best_epoch, 0u);
  EXPECT_TRUE(std::isfinite(result.best_val_loss));
  EXPECT_EQ(snapshot(model.parameters()), before);
}

TEST(Train, LossDecreases) {
  auto f = synth_fixture(8, 3, 4);
  auto model = MultiTaskModel::create(small_config(3), Variant::multitask, f.pretrained, 5);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 15;
  cfg.batch_size = 8;
  const auto result = train(model, f.docs, all_train(f.docs.size()), cfg);
  ASSERT_EQ(result.history.size(), 15u);
  EXPECT_LT(result.history.back().train_loss, 0.7 * result.history.front().train_loss);
}

TEST(Train, RestoresBestValidationEpoch) {
  auto f = synth_fixture(12, 3, 6);
  auto model = MultiTaskModel::create(small_config(3), Variant::multitask, f.pretrained, 5);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 6;
  CorpusSplit split = all_train(9);
  split.val = {9, 10, 11};
  std::vector<ParameterSnapshot> seen;
  const auto result = train(model, f.docs, split, cfg, [&](const EpochRecord&, bool, const MultiTaskModel& m) {
    seen.push_back(snapshot(m.parameters()));
    return true;
  });
  ASSERT_GE(result.best_epoch, 1u);
  double best = INFINITY;
  for (const auto& r : result.history) best = std::min(best, r.val_loss);
  EXPECT_EQ(result.best_val_loss, best);
  EXPECT_EQ(result.history[result.best_epoch - 1].val_loss, best);
  EXPECT_EQ(snapshot(model.parameters()), seen[result.best_epoch - 1]);
}

TEST(Train, CallbackStopsEarly) {
  auto f = synth_fixture(6, 3, 2);
  auto model = MultiTaskModel::create(small_config(3), Variant::multitask, f.pretrained, 5);
  TrainConfig cfg;
  cfg.epochs = 10;
  const auto result = train(model, f.docs, all_train(f.docs.size()), cfg,
                            [](const EpochRecord& r, bool, const MultiTaskModel&) { return r.epoch < 2; });
  EXPECT_EQ(result.history.size(), 2u);
}

TEST(Train, Deterministic) {
  auto f = synth_fixture(8, 3, 9);
  TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.epochs = 3;
  auto run = [&] {
    auto model = MultiTaskModel::create(small_config(3), Variant::multitask, f.pretrained, 11);
    const auto r = train(model, f.docs, all_train(f.docs.size()), cfg);
    return std::make_pair(r.history, snapshot(model.parameters()));
  };
  const auto a = run();
  const auto b = run();
  ASSERT_EQ(a.first.size(), b.first.size());
  for (std::size_t i = 0; i < a.first.size(); ++i) EXPECT_EQ(a.first[i].train_loss, b.first[i].train_loss);
  EXPECT_EQ(a.second, b.second);
}

TEST(Train, NonFiniteLossAborts) {
  auto f = synth_fixture(6, 3, 2);
  auto model = MultiTaskModel::create(small_config(3), Variant::multitask, f.pretrained, 5);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.l2 = NAN;
  EXPECT_THROW(train(model, f.docs, all_train(f.docs.size()), cfg), UsageError);
  cfg.l2 = 0.0;
  cfg.l1 = 1e300;
  cfg.learning_rate = 1e-3;
  model.parameters().at("summarizer.sentence_gru.fwd.w_z").mutable_data()[0] = 1e10;
  EXPECT_THROW(train(model, f.docs, all_train(f.docs.size()), cfg), NumericError);
}

TEST(Train, BaselineVariantsTrain) {
  auto f = synth_fixture(6, 3, 2);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 3;
  for (Variant v : {Variant::baseline_classifier, Variant::baseline_summarizer}) {
    auto model = MultiTaskModel::create(small_config(3), v, f.pretrained, 5);
    const auto result = train(model, f.docs, all_train(f.docs.size()), cfg);
    EXPECT_LT(result.history.back().train_loss, result.history.front().train_loss) << variant_name(v);
    const auto report = evaluate_model(model, f.docs, all_train(f.docs.size()).train, result.loss);
    EXPECT_EQ(std::isnan(report.top1), v == Variant::baseline_summarizer);
    EXPECT_EQ(std::isnan(report.recall), v == Variant::baseline_classifier);
  }
}

TEST(Train, EvaluateCountsSentences) {
  auto f = synth_fixture(5, 3, 3);
  auto model = MultiTaskModel::create(small_config(3), Variant::multitask, f.pretrained, 5);
  const std::vector<std::size_t> refs{0, 1, 2, 3, 4};
  const auto report = evaluate_model(model, f.docs, refs, derive_loss_config(f.docs, refs, 3, TrainConfig{}));
  std::size_t labelled = 0, total = 0;
  for (const auto& d : f.docs) {
    total += d.size();
    labelled += static_cast<std::size_t>(std::count(d.relevance.begin(), d.relevance.end(), true));
  }
  EXPECT_EQ(report.sentences, labelled);
  EXPECT_EQ(report.scored_sentences, total);
  EXPECT_EQ(report.label_count_confusion.total(), labelled);
}
