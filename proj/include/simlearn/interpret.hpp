#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "simlearn/grouped_data.hpp"
#include "simlearn/image_io.hpp"
#include "simlearn/model.hpp"

namespace simlearn {

/// Per-channel sum of positive activations of one spatial layer over every
/// spatial position and every image of one class.
struct ClassChannelVector {
  std::size_t class_index = 0;
  std::size_t layer = 0;
  std::vector<double> values;
};

ClassChannelVector class_channel_vector(const Model& model, std::span<const Sample> samples, std::size_t layer);

/// Same reduction applied to an explicit [B x H x W x C] activation tensor.
std::vector<double> positive_channel_sums(const Tensor& activations);

struct PearsonResult {
  double value = 0.0;
  bool degenerate = false;  // a vector had zero variance; value is 0
};

/// Sample Pearson correlation. Throws InvalidArgument for length mismatch or length < 2.
PearsonResult pearson(std::span<const double> u, std::span<const double> v);

/// Mean |pearson| over all unordered pairs of vectors, plus the full pair matrix.
struct CorrelationSummary {
  double mean_abs = 0.0;
  std::vector<std::vector<double>> matrix;
  std::size_t degenerate_pairs = 0;
};
CorrelationSummary mean_abs_pairwise_correlation(const std::vector<std::vector<double>>& vectors);

struct LayerCorrelation {
  std::size_t layer = 0;
  std::string layer_name;
  double mean_abs = 0.0;
  std::vector<std::vector<double>> matrix;  // over included classes, in class order
  std::vector<std::size_t> classes;         // classes that had samples
  std::size_t degenerate_pairs = 0;
};

struct LayerCorrelationReport {
  std::vector<LayerCorrelation> layers;
  std::vector<std::size_t> skipped_classes;  // target classes without samples
};

/// Builds one class vector per target class per layer from `samples` and
/// reports the mean absolute pairwise Pearson coefficient per layer.
LayerCorrelationReport layer_correlation(const Model& model, std::span<const Sample> samples,
                                         std::span<const std::size_t> layers);

/// Layers with a spatial [H x W x C] output (conv2d and the activations that follow it).
std::vector<std::size_t> spatial_layers(const ModelSpec& spec);

struct Heatmap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // row-major, in [0, 1]
  std::string source;
  double score = 0.0;  // sum of the selected logits
};

/// Grad-CAM on the output of the last conv2d layer (after its ReLU when one
/// follows), using the summed logits of `outputs`. The map is upsampled to the
/// input resolution by nearest neighbour. `image` is [H x W x C].
Heatmap grad_cam(const Model& model, const Tensor& image, std::span<const std::size_t> outputs,
                 std::string source = {});

/// Gray image with the heatmap blended in red.
Image8 heatmap_overlay(const Tensor& image, const Heatmap& heatmap, double opacity = 0.5);
Image8 heatmap_image(const Heatmap& heatmap);

struct RankedInstance {
  std::size_t pool_index = 0;
  double score = 0.0;
};

struct RankedAuxClass {
  std::size_t class_index = 0;
  double score = 0.0;  // mean summed target-group probability over the class's samples
  std::size_t sample_count = 0;
  std::vector<RankedInstance> top_instances;
  bool truncated = false;  // fewer samples than top_instances requested
};

/// Auxiliary classes ranked by how strongly their samples activate the target
/// group outputs. Ties go to the lower class / pool index.
std::vector<RankedAuxClass> top_activating_aux(const Model& model, std::span<const Sample> aux_samples,
                                               const GroupLayout& layout, std::size_t top_classes,
                                               std::size_t top_instances);

}  // namespace simlearn
