#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace usmae::metrics {

// Binary confusion counts; the positive class is "abnormal".
struct ConfusionCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts binary_confusion(std::span<const int> truth, std::span<const int> predicted,
                                 int positive = 1);

// A ratio with a zero denominator is reported as 0 and its name is listed in
// `degenerate`.
struct BinaryMetrics {
  double accuracy = 0, precision = 0, recall = 0, specificity = 0, f1 = 0;
  std::vector<std::string> degenerate;
};

BinaryMetrics binary_metrics(const ConfusionCounts& c);

// K x K counts, m[i*K + j] = number of samples of true class i predicted j.
struct MultiConfusion {
  std::size_t k = 0;
  std::vector<std::uint64_t> m;

  explicit MultiConfusion(std::size_t classes = 0) : k(classes), m(classes * classes, 0) {}
  std::uint64_t& at(std::size_t i, std::size_t j) { return m[i * k + j]; }
  std::uint64_t at(std::size_t i, std::size_t j) const { return m[i * k + j]; }
  std::uint64_t support(std::size_t cls) const;
  std::uint64_t total() const;
  // n_k / N
  std::vector<double> weights() const;
};

MultiConfusion multi_confusion(std::span<const int> truth, std::span<const int> predicted,
                               std::size_t k);

struct ClassMetrics {
  double precision = 0, recall = 0, f1 = 0, specificity = 0;
};

// One-vs-rest per-class values combined with support weights.
struct WeightedMetrics {
  double accuracy = 0, precision_w = 0, recall_w = 0, f1_w = 0, specificity_w = 0;
  std::vector<ClassMetrics> per_class;
  std::vector<double> weights;
  std::vector<std::string> degenerate;  // e.g. "precision[2]"
};

WeightedMetrics weighted_metrics(const MultiConfusion& mc);

// Probability that a random positive outscores a random negative, ties
// counting one half. Labels are 0/1. Throws DegenerateError unless both
// classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct CurvePoint {
  double threshold;
  double x;  // FPR for ROC, recall for PR
  double y;  // TPR for ROC, precision for PR
};

struct Curves {
  // (0,0) at threshold +inf, then one point per distinct score descending,
  // ending at (1,1)
  std::vector<CurvePoint> roc;
  // one point per distinct score in ascending threshold order, starting at
  // recall 1
  std::vector<CurvePoint> pr;
};

// A sample is called positive when its score is >= the threshold.
Curves curve_points(std::span<const double> scores, std::span<const int> labels);

// Trapezoidal area under points taken in order of x.
double trapezoid(std::span<const CurvePoint> points);

struct MulticlassAuc {
  std::vector<double> per_class;
  double weighted = 0;  // support-weighted
  double macro = 0;
};

// probs is row-major [n, k]. Throws DegenerateError listing absent classes.
MulticlassAuc multiclass_auc(std::span<const double> probs, std::span<const int> labels,
                             std::size_t k);

// Flat metric -> value report for one evaluation. Binary (k == 2) reports
// auc, accuracy, precision, recall, specificity and f1 on class 1; k == 3
// reports the weighted forms plus auc_macro.
std::map<std::string, double> evaluate_predictions(std::span<const double> probs,
                                                   std::span<const int> labels, std::size_t k);

int predicted_class(std::span<const double> probs_row);

}  // namespace usmae::metrics
