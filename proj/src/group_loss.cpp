#include "simlearn/group_loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "simlearn/errors.hpp"
#include "simlearn/layers.hpp"

namespace simlearn {

std::string_view group_name(Group g) { return g == Group::Target ? "target" : "auxiliary"; }

std::size_t GroupLayout::index_of(Group group, std::size_t class_index) const {
  const std::size_t count = group == Group::Target ? k : m;
  if (class_index >= count) {
    throw InvalidArgument(std::string(group_name(group)) + " class index " + std::to_string(class_index) +
                          " out of range (group has " + std::to_string(count) + " classes)");
  }
  return group == Group::Target ? class_index : k + class_index;
}

void GroupLayout::validate() const {
  if (k < 1) throw InvalidArgument("group layout needs k >= 1 target classes");
}

void Hyperparameters::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda must be in [0, 1]");
  if (!(std::isfinite(alpha) && alpha >= 0.0)) throw InvalidArgument("alpha must be finite and >= 0");
  if (!(std::isfinite(beta) && beta >= 0.0)) throw InvalidArgument("beta must be finite and >= 0");
}

LabelVector::LabelVector(std::vector<double> values, Group group, const GroupLayout& layout)
    : values_(std::move(values)), group_(group), hot_(0) {
  if (values_.size() != layout.n()) throw ShapeError("label length does not match k + m");
  std::size_t ones = 0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] == 1.0) {
      ++ones;
      hot_ = i;
    } else if (values_[i] != 0.0) {
      throw InvalidArgument("label vector must be one-hot");
    }
  }
  if (ones != 1) throw InvalidArgument("label vector must have exactly one hot entry");
  if (layout.group_of(hot_) != group) throw InvalidArgument("label hot index lies outside its declared group");
}

std::pair<Group, std::size_t> LabelVector::decode(const GroupLayout& layout) const {
  return group_ == Group::Target ? std::pair{Group::Target, hot_} : std::pair{Group::Auxiliary, hot_ - layout.k};
}

PredictionVector::PredictionVector(std::vector<double> values) : values_(std::move(values)) {
  double sum = 0.0;
  for (double v : values_) {
    if (!(v >= 0.0)) throw InvalidArgument("prediction entries must be non-negative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("prediction vector must sum to 1");
}

namespace {

void check_lengths(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) {
    throw ShapeError("label length " + std::to_string(y.size()) + " != prediction length " +
                     std::to_string(yhat.size()));
  }
}

void check_layout(std::span<const double> y, std::span<const double> yhat, const GroupLayout& layout) {
  check_lengths(y, yhat);
  if (y.size() != layout.n()) throw ShapeError("vector length does not match group layout k + m");
}

double clamped_log(double p) { return std::log(std::max(p, kLogClamp)); }

/// -sum_{i in [begin, end)} y_i log(yhat_i)
double partial_ce(std::span<const double> y, std::span<const double> yhat, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i)
    if (y[i] != 0.0) s -= y[i] * clamped_log(yhat[i]);
  return s;
}

double range_sum(std::span<const double> v, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += v[i];
  return s;
}

}  // namespace

double cce(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  return partial_ce(y, yhat, 0, y.size());
}

double weighted_group_loss(std::span<const double> y, std::span<const double> yhat, std::span<const IndexRange> groups,
                           std::span<const double> weights) {
  check_lengths(y, yhat);
  if (groups.size() != weights.size()) throw InvalidArgument("weighted_group_loss: one weight per group required");
  std::vector<int> cover(y.size(), 0);
  for (const auto& g : groups) {
    if (g.begin > g.end || g.end > y.size()) throw InvalidArgument("weighted_group_loss: group range out of bounds");
    for (std::size_t i = g.begin; i < g.end; ++i) ++cover[i];
  }
  if (std::any_of(cover.begin(), cover.end(), [](int c) { return c != 1; })) {
    throw InvalidArgument("weighted_group_loss: groups must partition the output indices");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw InvalidArgument("weighted_group_loss: weights must be >= 0");
    total += weights[i] * partial_ce(y, yhat, groups[i].begin, groups[i].end);
  }
  return total;
}

double wgcc(std::span<const double> y, std::span<const double> yhat, const GroupLayout& layout, double lambda) {
  check_layout(y, yhat, layout);
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("wgcc: lambda must be in [0, 1]");
  return lambda * partial_ce(y, yhat, 0, layout.k) + (1.0 - lambda) * partial_ce(y, yhat, layout.k, layout.n());
}

double group_penalty(std::span<const double> y, std::span<const double> yhat, const GroupLayout& layout, double alpha,
                     double beta) {
  check_layout(y, yhat, layout);
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw InvalidArgument("group_penalty: alpha and beta must be >= 0");
  const std::size_t k = layout.k, n = layout.n();
  return alpha * range_sum(y, 0, k) * range_sum(yhat, k, n) + beta * range_sum(yhat, 0, k) * range_sum(y, k, n);
}

double sll(std::span<const double> y, std::span<const double> yhat, const GroupLayout& layout,
           const Hyperparameters& h) {
  h.validate();
  return wgcc(y, yhat, layout, h.lambda) + group_penalty(y, yhat, layout, h.alpha, h.beta);
}

void sll_grad_from_probs(std::span<const double> y, std::span<const double> p, const GroupLayout& layout,
                         const Hyperparameters& h, std::span<double> out) {
  const std::size_t k = layout.k, n = layout.n();
  const double y_target = range_sum(y, 0, k);
  const double y_aux = range_sum(y, k, n);
  // dL/dp_j, then chain through the softmax Jacobian: dL/dz_i = p_i (g_i - sum_j p_j g_j).
  double dot = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const bool target = j < k;
    const double weight = target ? h.lambda : 1.0 - h.lambda;
    double g = target ? h.beta * y_aux : h.alpha * y_target;
    if (y[j] != 0.0 && p[j] > kLogClamp) g -= weight * y[j] / p[j];
    out[j] = g;
    dot += p[j] * g;
  }
  for (std::size_t j = 0; j < n; ++j) out[j] = p[j] * (out[j] - dot);
}

std::vector<double> sll_grad_logits(std::span<const double> y, std::span<const double> logits,
                                    const GroupLayout& layout, const Hyperparameters& h) {
  check_layout(y, logits, layout);
  h.validate();
  const Tensor p = softmax(Tensor({1, logits.size()}, std::vector<double>(logits.begin(), logits.end())));
  std::vector<double> out(logits.size());
  sll_grad_from_probs(y, p.values(), layout, h, out);
  return out;
}

double sll_batch(const Tensor& labels, const Tensor& probs, const GroupLayout& layout, const Hyperparameters& h) {
  if (labels.shape() != probs.shape() || labels.rank() != 2 || labels.dim(0) == 0) {
    throw ShapeError("sll_batch: labels and probabilities must be matching non-empty [B x n]");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < labels.dim(0); ++b) total += sll(labels.row(b), probs.row(b), layout, h);
  return total / static_cast<double>(labels.dim(0));
}

Tensor sll_batch_grad_logits(const Tensor& labels, const Tensor& probs, const GroupLayout& layout,
                             const Hyperparameters& h) {
  if (labels.shape() != probs.shape() || labels.rank() != 2 || labels.dim(0) == 0) {
    throw ShapeError("sll_batch_grad_logits: labels and probabilities must be matching non-empty [B x n]");
  }
  if (labels.dim(1) != layout.n()) throw ShapeError("sll_batch_grad_logits: width does not match layout");
  h.validate();
  Tensor grad(labels.shape());
  const double inv = 1.0 / static_cast<double>(labels.dim(0));
  for (std::size_t b = 0; b < labels.dim(0); ++b) {
    auto g = grad.row(b);
    sll_grad_from_probs(labels.row(b), probs.row(b), layout, h, g);
    for (auto& v : g) v *= inv;
  }
  return grad;
}

}  // namespace simlearn
