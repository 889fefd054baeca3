#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace ctxtag {

inline constexpr double kDecisionThreshold = 0.5;
inline constexpr std::size_t kMaxLabelCount = 5;

using LabelSet = std::vector<std::size_t>;

// Classes sorted by descending probability, ties toward the lower index.
std::vector<std::size_t> rank_classes(const std::vector<double>& probs);

// Classes whose probability reaches the decision threshold.
LabelSet predicted_labels(const std::vector<double>& probs);

struct ClassificationMetrics {
  double top1 = 0.0;
  double top3 = 0.0;
  // Fraction of sentences with gold class c whose thresholded prediction
  // contains c; NaN for classes without gold support.
  std::vector<double> per_class_accuracy;
  std::vector<std::size_t> per_class_support;
};

// A sentence counts as a top-k hit when any gold label is among its k
// highest-ranked classes. Gold sets must be nonempty.
ClassificationMetrics evaluate_classification(const std::vector<std::vector<double>>& predictions,
                                              const std::vector<LabelSet>& golds);

struct SummarizationMetrics {
  double precision = 1.0;  // 1 when nothing is predicted relevant
  double recall = 1.0;     // 1 when nothing is gold relevant
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

SummarizationMetrics evaluate_summarization(const std::vector<double>& relevance, const std::vector<bool>& gold);

/// Gold label count (rows) against predicted label count (columns), both
/// capped at 5.
struct LabelCountConfusion {
  std::array<std::array<std::size_t, kMaxLabelCount + 1>, kMaxLabelCount + 1> matrix{};
  // Share of sentences with at least one gold label that get no prediction.
  double false_negative_rate = 0.0;

  std::size_t total() const;
};

LabelCountConfusion label_count_confusion(const std::vector<std::vector<double>>& predictions,
                                          const std::vector<LabelSet>& golds);

/// Everything reported for one model on one split. Metrics a variant
/// cannot produce are NaN.
struct MetricsReport {
  double loss = 0.0;
  double top1 = 0.0;
  double top3 = 0.0;
  std::vector<double> per_class_accuracy;
  double precision = 0.0;
  double recall = 0.0;
  LabelCountConfusion label_count_confusion;
  double false_negative_rate = 0.0;
  std::size_t sentences = 0;         // classified sentences
  std::size_t scored_sentences = 0;  // sentences given a relevance score
};

// metrics.csv (metric,value), per_class.csv (class,accuracy) and
// confusion.csv (gold_count,pred_0..pred_5) inside `dir`.
void write_metrics(const std::filesystem::path& dir, const MetricsReport& report,
                   const std::vector<std::string>& class_names);

}  // namespace ctxtag
