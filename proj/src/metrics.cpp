#include "simlearn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "simlearn/errors.hpp"

namespace simlearn {

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

namespace {

void check_rows(const Tensor& predictions, std::size_t labels) {
  if (predictions.rank() != 2) throw ShapeError("predictions must be [N x n]");
  if (predictions.dim(0) != labels) throw ShapeError("one label per prediction row required");
  if (labels == 0) throw InvalidArgument("no samples to evaluate");
}

}  // namespace

double dacc(const Tensor& predictions, std::span<const std::size_t> labels, const GroupLayout& layout) {
  check_rows(predictions, labels.size());
  if (predictions.dim(1) != layout.k && predictions.dim(1) != layout.n()) {
    throw ShapeError("dacc: prediction width must be k or k + m");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= layout.k) throw InvalidArgument("dacc: label is not a target class");
    correct += argmax(predictions.row(i).first(layout.k)) == labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double dacc(std::span<const PredictionVector> predictions, std::span<const LabelVector> labels,
            const GroupLayout& layout) {
  if (predictions.size() != labels.size()) throw ShapeError("dacc: one label per prediction required");
  if (labels.empty()) throw InvalidArgument("no samples to evaluate");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].group() != Group::Target) throw InvalidArgument("dacc: auxiliary-labelled sample supplied");
    const auto p = predictions[i].values();
    if (p.size() < layout.k) throw ShapeError("dacc: prediction shorter than k");
    correct += argmax(p.first(layout.k)) == labels[i].hot_index() ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double accuracy(const Tensor& predictions, std::span<const std::size_t> labels) {
  check_rows(predictions, labels.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += argmax(predictions.row(i)) == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double inter_group_error_rate(const Tensor& predictions, std::span<const std::size_t> head_labels,
                              const GroupLayout& layout) {
  check_rows(predictions, head_labels.size());
  if (predictions.dim(1) != layout.n()) throw ShapeError("inter_group_error_rate: width must be k + m");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < head_labels.size(); ++i) {
    wrong += layout.group_of(argmax(predictions.row(i))) != layout.group_of(head_labels[i]) ? 1 : 0;
  }
  return static_cast<double>(wrong) / static_cast<double>(head_labels.size());
}

double binary_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw ShapeError("binary_auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average 1-based ranks over tie blocks, then Mann-Whitney U.
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (positive[order[t]]) {
        rank_sum += avg_rank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::numeric_limits<double>::quiet_NaN();
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

AucReport roc_auc_ovr(const Tensor& scores, std::span<const std::size_t> labels) {
  check_rows(scores, labels.size());
  const std::size_t classes = scores.dim(1);
  AucReport report;
  std::vector<double> column(labels.size());
  std::vector<bool> positive(labels.size());
  double sum = 0.0;
  std::size_t evaluated = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      column[i] = scores.at(i, c);
      positive[i] = labels[i] == c;
    }
    const double auc = binary_auc(column, positive);
    ClassAuc entry{c, auc, std::isnan(auc)};
    if (!entry.skipped) {
      sum += auc;
      ++evaluated;
    }
    report.per_class.push_back(entry);
  }
  report.macro = evaluated ? sum / static_cast<double>(evaluated) : std::numeric_limits<double>::quiet_NaN();
  return report;
}

std::vector<RocPoint> roc_curve(const Tensor& scores, std::span<const std::size_t> labels, std::size_t cls) {
  check_rows(scores, labels.size());
  if (cls >= scores.dim(1)) throw InvalidArgument("roc_curve: class out of range");
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores.at(a, cls) > scores.at(b, cls); });
  std::size_t pos = 0;
  for (auto l : labels) pos += l == cls ? 1 : 0;
  const std::size_t neg = n - pos;
  std::vector<RocPoint> curve{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    const double s = scores.at(order[i], cls);
    // One point per distinct threshold.
    while (i < n && scores.at(order[i], cls) == s) {
      (labels[order[i]] == cls ? tp : fp)++;
      ++i;
    }
    curve.push_back({neg ? static_cast<double>(fp) / static_cast<double>(neg) : 0.0,
                     pos ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0});
  }
  return curve;
}

Tensor target_scores(const Tensor& predictions, const GroupLayout& layout) {
  if (predictions.rank() != 2 || predictions.dim(1) < layout.k) throw ShapeError("target_scores: width below k");
  Tensor out({predictions.dim(0), layout.k});
  for (std::size_t i = 0; i < predictions.dim(0); ++i) {
    const auto row = predictions.row(i).first(layout.k);
    double sum = std::accumulate(row.begin(), row.end(), 0.0);
    for (std::size_t c = 0; c < layout.k; ++c) {
      out.at(i, c) = sum > 0.0 ? row[c] / sum : 1.0 / static_cast<double>(layout.k);
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> confusion_matrix(const Tensor& predictions, std::span<const std::size_t> labels,
                                                       const GroupLayout& layout) {
  check_rows(predictions, labels.size());
  std::vector<std::vector<std::size_t>> cm(layout.k, std::vector<std::size_t>(layout.k, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= layout.k) throw InvalidArgument("confusion_matrix: label is not a target class");
    ++cm[labels[i]][argmax(predictions.row(i).first(layout.k))];
  }
  return cm;
}

EvaluationReport evaluate_predictions(const Tensor& predictions, std::span<const std::size_t> labels,
                                      const GroupLayout& layout) {
  EvaluationReport r;
  r.dacc = dacc(predictions, labels, layout);
  r.accuracy = accuracy(predictions, labels);
  r.inter_group_error_rate = predictions.dim(1) == layout.n() ? inter_group_error_rate(predictions, labels, layout) : 0.0;
  r.auc = roc_auc_ovr(target_scores(predictions, layout), labels);
  r.confusion = confusion_matrix(predictions, labels, layout);
  return r;
}

}  // namespace simlearn
