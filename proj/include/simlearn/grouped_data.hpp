#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "simlearn/group_loss.hpp"
#include "simlearn/rng.hpp"
#include "simlearn/tensor.hpp"

namespace simlearn {

/// One image (or feature vector) with its group and 0-based class index within the group.
struct Sample {
  Tensor features;
  Group group = Group::Target;
  std::size_t class_index = 0;
};

/// Target splits plus the auxiliary pool.
struct GroupedDataset {
  GroupLayout layout;
  Shape sample_shape;
  std::vector<Sample> target_train;
  std::vector<Sample> target_val;
  std::vector<Sample> target_test;
  std::vector<Sample> aux_pool;
  std::vector<std::string> target_class_names;
  std::vector<std::string> aux_class_names;

  /// Checks labels against the layout and shapes against sample_shape.
  /// With `simultaneous`, the auxiliary pool must be non-empty.
  void validate(bool simultaneous) const;
};

/// One-hot label over the k + m head. class_index is 0-based within its group.
LabelVector encode_label(const GroupLayout& layout, Group group, std::size_t class_index);

/// Where a batch row came from: the group and the index into target_train or aux_pool.
struct Provenance {
  Group group;
  std::size_t index;
};

struct Batch {
  Tensor inputs;  // [B x sample_shape...]
  Tensor labels;  // [B x (k+m)] one-hot rows
  std::vector<Provenance> provenance;

  std::size_t size() const { return provenance.size(); }
  LabelVector label(std::size_t row, const GroupLayout& layout) const;
};

/// Target slices for one epoch: floor(train_size / slice_size) consecutive
/// slices of a (optionally shuffled) ordering of [0, train_size). Leftover
/// samples are dropped for the epoch.
std::vector<std::vector<std::size_t>> epoch_plan(std::size_t train_size, std::size_t slice_size, Rng* shuffle_rng);

/// Target-only batch from the given indices into `samples`.
Batch make_batch(std::span<const Sample> samples, std::span<const std::size_t> indices, const GroupLayout& layout);

/// Mixed batch: the B/2 target rows of `target_slice` followed by B/2
/// auxiliary rows. `aux_order` is the running order of the auxiliary pool
/// (initialised to the identity when empty); each call shuffles it and takes
/// the first B/2 entries, so auxiliary rows never repeat within a batch.
Batch compose_batch(std::span<const Sample> target_train, std::span<const std::size_t> target_slice,
                    std::span<const Sample> aux_pool, std::vector<std::size_t>& aux_order, std::size_t batch_size,
                    const GroupLayout& layout, Rng& rng);

/// Stacks the features of `samples` into [N x sample_shape...].
Tensor stack_features(std::span<const Sample> samples);
/// One-hot label rows [N x (k+m)].
Tensor stack_labels(std::span<const Sample> samples, const GroupLayout& layout);

/// Scalar input normalisation fitted on the target training pixels.
struct Standardization {
  double mean = 0.0;
  double stddev = 1.0;
};
Standardization fit_standardization(const GroupedDataset& ds);
/// x <- (x - mean) / stddev on every split and on the auxiliary pool.
void apply_standardization(GroupedDataset& ds, const Standardization& s);

/// The auxiliary pool relabelled as an m-class target-only training set (for
/// pre-training a feature extractor). Validation and test splits are empty.
GroupedDataset auxiliary_as_target(const GroupedDataset& ds);

/// Keeps max(1, round(fraction * n_c)) training samples of every target class c (seeded).
GroupedDataset reduce_train(const GroupedDataset& ds, double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Procedural images

/// Target classes are sinusoidal gratings at k evenly spaced orientations;
/// auxiliary classes are square-wave gratings at m orientations and a
/// different spatial frequency. Every image gets a random phase jitter and
/// additive Gaussian pixel noise; pixels are clamped to [0, 1].
struct SynthConfig {
  std::size_t k = 6;
  std::size_t m = 20;
  std::size_t image_size = 32;
  /// Training images per target class; a single entry is broadcast to all classes.
  std::vector<std::size_t> train_per_class{40};
  std::size_t val_per_class = 30;
  std::size_t test_per_class = 60;
  std::size_t aux_per_class = 30;
  double noise = 0.6;        // std of additive noise on target images
  double aux_noise = 0.2;    // std of additive noise on auxiliary images
  double contrast = 0.25;    // grating amplitude around mid-gray
  double jitter = 0.25;      // phase jitter as a fraction of pi
  double target_frequency = 0.18;  // cycles per pixel
  double aux_frequency = 0.09;
  double aux_background = 0.5;  // mean gray level of auxiliary images (target images sit at 0.5)
  bool aux_square = true;  // square-wave auxiliary gratings; sine when false

  void validate() const;
};

GroupedDataset synth_generate(const SynthConfig& config, std::uint64_t seed);

/// Writes a dataset as `<root>/<group>/<class>/<n>.png` (all target splits go
/// under `target`).
void write_image_dir(const GroupedDataset& ds, const std::filesystem::path& root);

struct ImageDirOptions {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 1;
  bool require_aux = true;
  double val_fraction = 0.15;
  double test_fraction = 0.15;
  std::uint64_t split_seed = 0;
};

/// Loads `<root>/target/<class>/*.png` and `<root>/auxiliary/<class>/*.png`.
/// Classes are ordered by directory name. Target classes are split per class
/// into train/val/test (floor of the val and test fractions, rest train).
/// Non-PNG files are skipped and reported in `warnings`.
GroupedDataset load_image_dir(const std::filesystem::path& root, const ImageDirOptions& options,
                              std::vector<std::string>* warnings = nullptr);

}  // namespace simlearn
