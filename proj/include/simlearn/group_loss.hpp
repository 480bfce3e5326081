#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "simlearn/tensor.hpp"

// Losses over a classifier head split into a target group (k classes, indices
// [0, k)) and an auxiliary group (m classes, indices [k, k+m)). All per-sample
// functions take the label vector y and the softmax output yhat over the full
// head. Probabilities are clamped below at kLogClamp before every log, in the
// losses and in their gradients alike.

namespace simlearn {

inline constexpr double kLogClamp = 1e-12;

enum class Group { Target, Auxiliary };

std::string_view group_name(Group g);

struct GroupLayout {
  std::size_t k = 1;  // target classes
  std::size_t m = 0;  // auxiliary classes

  std::size_t n() const { return k + m; }
  /// Index of class `class_index` of `group` in the full head.
  std::size_t index_of(Group group, std::size_t class_index) const;
  Group group_of(std::size_t head_index) const { return head_index < k ? Group::Target : Group::Auxiliary; }
  void validate() const;
  friend bool operator==(const GroupLayout&, const GroupLayout&) = default;
};

/// h = [lambda, alpha, beta]. lambda weights the target cross-entropy and
/// (1 - lambda) the auxiliary one; alpha and beta scale the two inter-group
/// penalty terms.
struct Hyperparameters {
  double lambda = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  void validate() const;
};

/// One-hot label over the full head, tagged with its group.
class LabelVector {
 public:
  /// Validates one-hotness and that the hot index lies inside `group`'s range.
  LabelVector(std::vector<double> values, Group group, const GroupLayout& layout);

  Group group() const { return group_; }
  std::size_t hot_index() const { return hot_; }
  std::span<const double> values() const { return values_; }
  operator std::span<const double>() const { return values_; }

  /// Inverse of encode_label: (group, class index within the group).
  std::pair<Group, std::size_t> decode(const GroupLayout& layout) const;

 private:
  std::vector<double> values_;
  Group group_;
  std::size_t hot_;
};

/// Softmax output: non-negative entries summing to 1 +/- 1e-9.
class PredictionVector {
 public:
  explicit PredictionVector(std::vector<double> values);
  std::span<const double> values() const { return values_; }
  operator std::span<const double>() const { return values_; }

 private:
  std::vector<double> values_;
};

/// Half-open index range [begin, end) into the head.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// -sum_i y_i log(yhat_i) over the full vector.
double cce(std::span<const double> y, std::span<const double> yhat);

/// sum_i weights[i] * (cross-entropy restricted to groups[i]). The groups must
/// partition [0, n). Carries no inter-group penalty.
double weighted_group_loss(std::span<const double> y, std::span<const double> yhat, std::span<const IndexRange> groups,
                           std::span<const double> weights);

/// Weighted group categorical cross-entropy.
double wgcc(std::span<const double> y, std::span<const double> yhat, const GroupLayout& layout, double lambda);

/// alpha * (sum_t y_t)(sum_a yhat_a) + beta * (sum_t yhat_t)(sum_a y_a)
double group_penalty(std::span<const double> y, std::span<const double> yhat, const GroupLayout& layout, double alpha,
                     double beta);

/// Simultaneous learning loss: wgcc + group_penalty.
double sll(std::span<const double> y, std::span<const double> yhat, const GroupLayout& layout,
           const Hyperparameters& h);

/// Exact gradient of sll(y, softmax(z), h) w.r.t. the logits z.
std::vector<double> sll_grad_logits(std::span<const double> y, std::span<const double> logits,
                                    const GroupLayout& layout, const Hyperparameters& h);

/// Same gradient, given p = softmax(z) already computed; writes into `out`.
void sll_grad_from_probs(std::span<const double> y, std::span<const double> p, const GroupLayout& layout,
                         const Hyperparameters& h, std::span<double> out);

/// Batch mean of per-sample sll; labels and probs are [B x n].
double sll_batch(const Tensor& labels, const Tensor& probs, const GroupLayout& layout, const Hyperparameters& h);

/// Gradient of sll_batch w.r.t. the [B x n] logits that produced `probs`.
Tensor sll_batch_grad_logits(const Tensor& labels, const Tensor& probs, const GroupLayout& layout,
                             const Hyperparameters& h);

}  // namespace simlearn
