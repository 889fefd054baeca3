#include "ctxtag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "ctxtag/csv.hpp"
#include "ctxtag/error.hpp"

namespace ctxtag {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_pairs(std::size_t predictions, std::size_t golds) {
  if (predictions != golds) {
    throw ShapeError(std::to_string(predictions) + " predictions for " + std::to_string(golds) + " gold sets");
  }
}

}  // namespace

std::vector<std::size_t> rank_classes(const std::vector<double>& probs) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  return order;
}

LabelSet predicted_labels(const std::vector<double>& probs) {
  LabelSet out;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    if (probs[c] >= kDecisionThreshold) out.push_back(c);
  }
  return out;
}

ClassificationMetrics evaluate_classification(const std::vector<std::vector<double>>& predictions,
                                              const std::vector<LabelSet>& golds) {
  check_pairs(predictions.size(), golds.size());
  ClassificationMetrics m;
  const std::size_t k = predictions.empty() ? 0 : predictions.front().size();
  std::vector<std::size_t> hits(k, 0);
  m.per_class_support.assign(k, 0);
  std::size_t top1 = 0;
  std::size_t top3 = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& probs = predictions[i];
    const auto& gold = golds[i];
    if (probs.size() != k) throw ShapeError("prediction vectors differ in length");
    if (gold.empty()) throw DataError("sentence " + std::to_string(i) + " has an empty gold label set");
    const auto ranked = rank_classes(probs);
    auto in_gold = [&](std::size_t c) { return std::find(gold.begin(), gold.end(), c) != gold.end(); };
    if (in_gold(ranked[0])) ++top1;
    if (std::any_of(ranked.begin(), ranked.begin() + std::min<std::size_t>(3, k), in_gold)) ++top3;
    for (std::size_t c : gold) {
      if (c >= k) throw ShapeError("gold class " + std::to_string(c) + " outside " + std::to_string(k));
      ++m.per_class_support[c];
      if (probs[c] >= kDecisionThreshold) ++hits[c];
    }
  }
  const double n = static_cast<double>(predictions.size());
  m.top1 = predictions.empty() ? kNaN : static_cast<double>(top1) / n;
  m.top3 = predictions.empty() ? kNaN : static_cast<double>(top3) / n;
  m.per_class_accuracy.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    m.per_class_accuracy[c] =
        m.per_class_support[c] == 0 ? kNaN : static_cast<double>(hits[c]) / static_cast<double>(m.per_class_support[c]);
  }
  return m;
}

SummarizationMetrics evaluate_summarization(const std::vector<double>& relevance, const std::vector<bool>& gold) {
  check_pairs(relevance.size(), gold.size());
  SummarizationMetrics m;
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    const bool predicted = relevance[i] >= kDecisionThreshold;
    if (predicted && gold[i]) ++m.true_positives;
    if (predicted && !gold[i]) ++m.false_positives;
    if (!predicted && gold[i]) ++m.false_negatives;
  }
  const auto tp = static_cast<double>(m.true_positives);
  if (m.true_positives + m.false_positives > 0) m.precision = tp / (tp + static_cast<double>(m.false_positives));
  if (m.true_positives + m.false_negatives > 0) m.recall = tp / (tp + static_cast<double>(m.false_negatives));
  return m;
}

std::size_t LabelCountConfusion::total() const {
  std::size_t n = 0;
  for (const auto& row : matrix) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return n;
}

LabelCountConfusion label_count_confusion(const std::vector<std::vector<double>>& predictions,
                                          const std::vector<LabelSet>& golds) {
  check_pairs(predictions.size(), golds.size());
  LabelCountConfusion out;
  std::size_t labelled = 0;
  std::size_t missed = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const std::size_t gold = std::min(golds[i].size(), kMaxLabelCount);
    const std::size_t pred = std::min(predicted_labels(predictions[i]).size(), kMaxLabelCount);
    ++out.matrix[gold][pred];
    if (gold >= 1) {
      ++labelled;
      if (pred == 0) ++missed;
    }
  }
  out.false_negative_rate = labelled == 0 ? 0.0 : static_cast<double>(missed) / static_cast<double>(labelled);
  return out;
}

void write_metrics(const std::filesystem::path& dir, const MetricsReport& r, const std::vector<std::string>& class_names) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "metrics.csv", std::ios::binary);
    if (!out) throw DataError("cannot write metrics in " + dir.string());
    write_csv_row(out, {"metric", "value"});
    write_csv_row(out, {"loss", format_double(r.loss)});
    write_csv_row(out, {"top1", format_double(r.top1)});
    write_csv_row(out, {"top3", format_double(r.top3)});
    write_csv_row(out, {"precision", format_double(r.precision)});
    write_csv_row(out, {"recall", format_double(r.recall)});
    write_csv_row(out, {"false_negative_rate", format_double(r.false_negative_rate)});
    write_csv_row(out, {"sentences", std::to_string(r.sentences)});
    write_csv_row(out, {"scored_sentences", std::to_string(r.scored_sentences)});
  }
  {
    std::ofstream out(dir / "per_class.csv", std::ios::binary);
    write_csv_row(out, {"class", "accuracy"});
    for (std::size_t c = 0; c < r.per_class_accuracy.size(); ++c) {
      const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
      write_csv_row(out, {name, format_double(r.per_class_accuracy[c])});
    }
  }
  {
    std::ofstream out(dir / "confusion.csv", std::ios::binary);
    CsvRow header{"gold_count"};
    for (std::size_t j = 0; j <= kMaxLabelCount; ++j) header.push_back("pred_" + std::to_string(j));
    write_csv_row(out, header);
    for (std::size_t i = 0; i <= kMaxLabelCount; ++i) {
      CsvRow row{std::to_string(i)};
      for (std::size_t j = 0; j <= kMaxLabelCount; ++j) row.push_back(std::to_string(r.label_count_confusion.matrix[i][j]));
      write_csv_row(out, row);
    }
  }
}

}  // namespace ctxtag
