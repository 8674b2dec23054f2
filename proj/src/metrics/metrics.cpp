#include "usmae/metrics/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "usmae/errors.hpp"

namespace usmae::metrics {

namespace {

double ratio(std::uint64_t num, std::uint64_t den, const std::string& name,
             std::vector<std::string>& degenerate) {
  if (den == 0) {
    degenerate.push_back(name);
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r, const std::string& name, std::vector<std::string>& degenerate) {
  if (p + r == 0.0) {
    degenerate.push_back(name);
    return 0.0;
  }
  return 2.0 * p * r / (p + r);
}

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": " + std::to_string(a) + " scores for " +
                     std::to_string(b) + " labels");
  }
}

}  // namespace

ConfusionCounts binary_confusion(std::span<const int> truth, std::span<const int> predicted,
                                 int positive) {
  check_lengths(predicted.size(), truth.size(), "binary_confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == positive, p = predicted[i] == positive;
    if (t && p) ++c.tp;
    else if (t) ++c.fn;
    else if (p) ++c.fp;
    else ++c.tn;
  }
  return c;
}

BinaryMetrics binary_metrics(const ConfusionCounts& c) {
  BinaryMetrics m;
  m.accuracy = ratio(c.tp + c.tn, c.total(), "accuracy", m.degenerate);
  m.precision = ratio(c.tp, c.tp + c.fp, "precision", m.degenerate);
  m.recall = ratio(c.tp, c.tp + c.fn, "recall", m.degenerate);
  m.specificity = ratio(c.tn, c.tn + c.fp, "specificity", m.degenerate);
  m.f1 = harmonic(m.precision, m.recall, "f1", m.degenerate);
  return m;
}

std::uint64_t MultiConfusion::support(std::size_t cls) const {
  std::uint64_t n = 0;
  for (std::size_t j = 0; j < k; ++j) n += at(cls, j);
  return n;
}

std::uint64_t MultiConfusion::total() const {
  return std::accumulate(m.begin(), m.end(), std::uint64_t{0});
}

std::vector<double> MultiConfusion::weights() const {
  const double n = static_cast<double>(total());
  std::vector<double> w(k, 0.0);
  if (n == 0) return w;
  for (std::size_t i = 0; i < k; ++i) w[i] = static_cast<double>(support(i)) / n;
  return w;
}

MultiConfusion multi_confusion(std::span<const int> truth, std::span<const int> predicted,
                               std::size_t k) {
  check_lengths(predicted.size(), truth.size(), "multi_confusion");
  MultiConfusion mc(k);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(truth[i]) >= k ||
        static_cast<std::size_t>(predicted[i]) >= k) {
      throw ContractError("multi_confusion: class index out of range at sample " +
                          std::to_string(i));
    }
    ++mc.at(truth[i], predicted[i]);
  }
  return mc;
}

WeightedMetrics weighted_metrics(const MultiConfusion& mc) {
  if (mc.k < 2) throw ContractError("weighted_metrics needs at least two classes");
  WeightedMetrics out;
  out.weights = mc.weights();
  const std::uint64_t n = mc.total();
  std::uint64_t trace = 0;
  for (std::size_t c = 0; c < mc.k; ++c) {
    std::uint64_t tp = mc.at(c, c), fp = 0, fn = 0;
    trace += tp;
    for (std::size_t j = 0; j < mc.k; ++j) {
      if (j == c) continue;
      fn += mc.at(c, j);
      fp += mc.at(j, c);
    }
    const std::uint64_t tn = n - tp - fp - fn;
    const std::string idx = "[" + std::to_string(c) + "]";
    ClassMetrics cm;
    cm.precision = ratio(tp, tp + fp, "precision" + idx, out.degenerate);
    cm.recall = ratio(tp, tp + fn, "recall" + idx, out.degenerate);
    cm.specificity = ratio(tn, tn + fp, "specificity" + idx, out.degenerate);
    cm.f1 = harmonic(cm.precision, cm.recall, "f1" + idx, out.degenerate);
    out.per_class.push_back(cm);
    const double w = out.weights[c];
    out.precision_w += w * cm.precision;
    out.recall_w += w * cm.recall;
    out.f1_w += w * cm.f1;
    out.specificity_w += w * cm.specificity;
  }
  out.accuracy = ratio(trace, n, "accuracy", out.degenerate);
  return out;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size(), "roc_auc");
  std::size_t pos = 0;
  for (int l : labels) pos += l == 1;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw DegenerateError(std::string("roc_auc needs both classes; only ") +
                          (pos == 0 ? "negatives" : "positives") + " present");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // sum of 1-based ranks of positives with average ranks over ties; every
  // partial value is a half-integer, so the double arithmetic is exact
  double rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) rank_sum += avg;
    i = j;
  }
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1) / 2) / (p * q);
}

Curves curve_points(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size(), "curve_points");
  std::size_t pos = 0;
  for (int l : labels) pos += l == 1;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DegenerateError("curve_points needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  Curves out;
  out.roc.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    const double tpr = static_cast<double>(tp) / pos, fpr = static_cast<double>(fp) / neg;
    out.roc.push_back({t, fpr, tpr});
    out.pr.push_back({t, tpr, static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  std::reverse(out.pr.begin(), out.pr.end());
  return out;
}

double trapezoid(std::span<const CurvePoint> points) {
  double area = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].x - points[i - 1].x) * (points[i].y + points[i - 1].y) / 2;
  }
  return std::abs(area);
}

MulticlassAuc multiclass_auc(std::span<const double> probs, std::span<const int> labels,
                             std::size_t k) {
  if (probs.size() != labels.size() * k) {
    throw ShapeError("multiclass_auc: " + std::to_string(probs.size()) + " scores for " +
                     std::to_string(labels.size()) + " samples of " + std::to_string(k) +
                     " classes");
  }
  std::vector<std::size_t> support(k, 0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= k) throw ContractError("multiclass_auc: bad label");
    ++support[l];
  }
  std::string missing;
  for (std::size_t c = 0; c < k; ++c)
    if (support[c] == 0) missing += (missing.empty() ? "" : ", ") + std::to_string(c);
  if (!missing.empty()) throw DegenerateError("multiclass_auc: classes absent: " + missing);

  MulticlassAuc out;
  std::vector<double> scores(labels.size());
  std::vector<int> binary(labels.size());
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      scores[i] = probs[i * k + c];
      binary[i] = labels[i] == static_cast<int>(c);
    }
    const double auc = roc_auc(scores, binary);
    out.per_class.push_back(auc);
    out.weighted += auc * static_cast<double>(support[c]) / static_cast<double>(labels.size());
    out.macro += auc / static_cast<double>(k);
  }
  return out;
}

int predicted_class(std::span<const double> probs_row) {
  int best = 0;
  for (std::size_t i = 1; i < probs_row.size(); ++i)
    if (probs_row[i] > probs_row[best]) best = static_cast<int>(i);
  return best;
}

std::map<std::string, double> evaluate_predictions(std::span<const double> probs,
                                                   std::span<const int> labels, std::size_t k) {
  if (k < 2 || probs.size() != labels.size() * k) {
    throw ShapeError("evaluate_predictions: probabilities do not match labels");
  }
  std::vector<int> predicted(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    predicted[i] = predicted_class(probs.subspan(i * k, k));
  }
  std::map<std::string, double> out;
  if (k == 2) {
    std::vector<double> scores(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) scores[i] = probs[i * 2 + 1];
    const auto m = binary_metrics(binary_confusion(labels, predicted));
    out["auc"] = roc_auc(scores, labels);
    out["accuracy"] = m.accuracy;
    out["precision"] = m.precision;
    out["recall"] = m.recall;
    out["specificity"] = m.specificity;
    out["f1"] = m.f1;
  } else {
    const auto m = weighted_metrics(multi_confusion(labels, predicted, k));
    const auto auc = multiclass_auc(probs, labels, k);
    out["auc"] = auc.weighted;
    out["auc_macro"] = auc.macro;
    out["accuracy"] = m.accuracy;
    out["precision"] = m.precision_w;
    out["recall"] = m.recall_w;
    out["specificity"] = m.specificity_w;
    out["f1"] = m.f1_w;
  }
  return out;
}

}  // namespace usmae::metrics
