#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "simlearn/rng.hpp"
#include "simlearn/tensor.hpp"

namespace simlearn {

enum class LayerKind { Conv2d, Relu, GlobalAvgPool, Dense, Dropout, Head };

std::string_view layer_kind_name(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::size_t units = 0;      // Conv2d: output channels; Dense: width; Head: target outputs (k)
  std::size_t aux_units = 0;  // Head only: auxiliary outputs (m)
  std::size_t kernel = 0;     // Conv2d only (square kernels)
  std::size_t stride = 1;     // Conv2d only
  double rate = 0.0;          // Dropout only

  static LayerSpec conv2d(std::size_t channels, std::size_t kernel, std::size_t stride = 1);
  static LayerSpec relu() { return {LayerKind::Relu}; }
  static LayerSpec global_avg_pool() { return {LayerKind::GlobalAvgPool}; }
  static LayerSpec dense(std::size_t units);
  static LayerSpec dropout(double rate);
  static LayerSpec head(std::size_t target_outputs, std::size_t aux_outputs = 0);

  bool trainable() const { return kind == LayerKind::Conv2d || kind == LayerKind::Dense || kind == LayerKind::Head; }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Linear stack of layers ending in a single softmax head.
///
/// `input` is the per-sample input shape: [H, W, C] for image models or [p]
/// for flat-feature models. The head has `k` target outputs followed by `m`
/// auxiliary outputs; a single softmax spans all k + m of them.
struct ModelSpec {
  Shape input;
  std::vector<LayerSpec> layers;

  /// Throws InvalidArgument when the stack is not a valid chain.
  void validate() const;

  /// Per-sample output shape of every layer (logits for the head).
  std::vector<Shape> output_shapes() const;

  std::size_t head_index() const;
  const LayerSpec& head() const { return layers.at(head_index()); }
  std::size_t target_outputs() const { return head().units; }
  std::size_t aux_outputs() const { return head().aux_units; }
  std::size_t head_outputs() const { return head().units + head().aux_units; }

  /// Width of the first dense layer (0 if none).
  std::size_t n1() const;
  /// Input width of the head.
  std::size_t n2() const;

  /// Structured text form used inside checkpoints.
  std::string to_text() const;
  static ModelSpec from_text(const std::string& text);

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ClassifierShape {
  Shape input{32, 32, 1};
  std::vector<std::size_t> conv_channels{8, 16};
  std::vector<std::size_t> conv_kernels{5, 3};
  std::vector<std::size_t> conv_strides{1, 2};
  std::size_t n1 = 32;
  std::size_t n2 = 16;
  std::size_t k = 2;
  std::size_t m = 0;
  double dropout = 0.0;  // applied after each dense layer when > 0
};

/// Base or multi-group architecture: conv+ReLU blocks -> GAP -> dense n1 -> ReLU -> dense n2 -> ReLU -> head.
ModelSpec make_classifier(const ClassifierShape& shape);

struct ParamArray {
  std::string name;
  Tensor value;
  friend bool operator==(const ParamArray&, const ParamArray&) = default;
};

/// Named parameter arrays in layer order. Each trainable layer i owns
/// "layer<i>.weight" and "layer<i>.bias".
class ParameterStore {
 public:
  void add(std::string name, Tensor value);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<ParamArray>& entries() { return entries_; }
  const std::vector<ParamArray>& entries() const { return entries_; }
  std::size_t total_count() const;

  /// Same names and shapes, all zeros.
  ParameterStore zeros_like() const;

  friend bool operator==(const ParameterStore&, const ParameterStore&) = default;

 private:
  std::vector<ParamArray> entries_;
};

std::string weight_name(std::size_t layer);
std::string bias_name(std::size_t layer);

struct Model {
  ModelSpec spec;
  ParameterStore params;

  /// Glorot-uniform weights, zero biases.
  static Model initialize(ModelSpec spec, Rng& rng);
};

/// Checks that `params` holds exactly the arrays `spec` requires, with matching shapes.
void check_parameters(const ModelSpec& spec, const ParameterStore& params);

struct ForwardCache {
  /// activations[0] is the input batch; activations[i + 1] is the output of
  /// layer i. The last entry holds the head logits.
  std::vector<Tensor> activations;
  std::vector<Tensor> dropout_masks;  // indexed by layer; empty for non-dropout layers
  Tensor probabilities;
  bool training = false;

  const Tensor& logits() const { return activations.back(); }
  const Tensor& layer_output(std::size_t layer) const { return activations.at(layer + 1); }
};

/// Runs the whole stack. `rng` is required only when training with dropout.
ForwardCache model_forward(const Model& model, const Tensor& input, bool training, Rng* rng = nullptr);

struct BackwardResult {
  ParameterStore grads;
  /// Gradient w.r.t. every layer output, filled only when requested.
  std::vector<Tensor> output_grads;
};

/// Backpropagates a gradient w.r.t. the head logits through the cached forward pass.
BackwardResult model_backward(const Model& model, const ForwardCache& cache, const Tensor& logit_grad,
                              bool keep_output_grads = false);

/// Inference in chunks; returns [N x (k+m)] probabilities.
Tensor predict_proba(const Model& model, const Tensor& inputs, std::size_t chunk = 64);

/// Widens the head from k to k+m outputs. Existing head columns are kept
/// bitwise; new weight columns are Glorot-uniform, new biases zero.
Model extend_multi_group(const Model& model, std::size_t m, Rng& rng);

/// Drops the auxiliary head outputs and their parameters.
Model strip_auxiliary_head(const Model& model);

/// Copies every parameter below the head from `source` into `target`. Both
/// specs must agree on the input and on every layer before the head.
void copy_feature_parameters(const Model& source, Model& target);

/// Index of the last Conv2d layer, or nullopt.
std::optional<std::size_t> last_conv_layer(const ModelSpec& spec);

}  // namespace simlearn
