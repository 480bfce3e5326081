#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "simlearn/group_loss.hpp"
#include "simlearn/tensor.hpp"

namespace simlearn {

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Delimited accuracy: argmax over the first k outputs only. `predictions` is
/// [N x n] with n = k or k + m; `labels` are 0-based target class indices.
double dacc(const Tensor& predictions, std::span<const std::size_t> labels, const GroupLayout& layout);

/// Same, from typed vectors; every label must be in the target group.
double dacc(std::span<const PredictionVector> predictions, std::span<const LabelVector> labels,
            const GroupLayout& layout);

/// Argmax over the full vector; `labels` are full-head indices.
double accuracy(const Tensor& predictions, std::span<const std::size_t> labels);

/// Fraction of samples whose full-vector argmax falls in the other group than the label.
double inter_group_error_rate(const Tensor& predictions, std::span<const std::size_t> head_labels,
                              const GroupLayout& layout);

struct ClassAuc {
  std::size_t class_index = 0;
  double auc = 0.0;
  bool skipped = false;  // no positives or no negatives
};

struct AucReport {
  std::vector<ClassAuc> per_class;
  double macro = 0.0;  // unweighted mean over evaluated classes; NaN if none
};

/// One-vs-rest AUC per class via the rank-sum formulation (ties count 1/2).
/// `scores` is [N x C]; `labels` are class indices in [0, C).
AucReport roc_auc_ovr(const Tensor& scores, std::span<const std::size_t> labels);

/// AUC of a binary problem; NaN when either class is empty.
double binary_auc(std::span<const double> scores, const std::vector<bool>& positive);

struct RocPoint {
  double fpr;
  double tpr;
};
/// ROC curve points for one class (one-vs-rest), from (0,0) to (1,1).
std::vector<RocPoint> roc_curve(const Tensor& scores, std::span<const std::size_t> labels, std::size_t cls);

/// Target-group scores renormalised to sum to 1 per row: [N x k].
Tensor target_scores(const Tensor& predictions, const GroupLayout& layout);

/// Confusion counts [k x k]; rows are true classes, columns the delimited argmax.
std::vector<std::vector<std::size_t>> confusion_matrix(const Tensor& predictions, std::span<const std::size_t> labels,
                                                       const GroupLayout& layout);

struct EvaluationReport {
  double accuracy = 0.0;
  double dacc = 0.0;
  AucReport auc;
  double inter_group_error_rate = 0.0;
  std::vector<std::vector<std::size_t>> confusion;
};

/// Evaluates target-group test predictions ([N x n], labels 0-based target classes).
EvaluationReport evaluate_predictions(const Tensor& predictions, std::span<const std::size_t> labels,
                                      const GroupLayout& layout);

}  // namespace simlearn
