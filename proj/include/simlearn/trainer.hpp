#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "simlearn/checkpoint.hpp"
#include "simlearn/group_loss.hpp"
#include "simlearn/grouped_data.hpp"
#include "simlearn/model.hpp"
#include "simlearn/optimizer.hpp"

namespace simlearn {

/// baseline: target-only batches of B, k-output head, plain cross-entropy.
/// dropout: as baseline; the model spec carries the dropout layers.
/// simultaneous: mixed B/2 + B/2 batches, k+m head, simultaneous learning loss.
enum class TrainMode { Baseline, Dropout, Simultaneous };

std::string_view train_mode_name(TrainMode mode);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 500;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::Adagrad;
  Hyperparameters h{1.0, 1.0, 1.0};
  TrainMode mode = TrainMode::Simultaneous;
  std::uint64_t seed = 0;
  /// Shuffle the target training set at every epoch start.
  bool shuffle_target = true;

  void validate() const;
};

/// Rows consumed per group, summed over all steps.
struct StepAudit {
  std::size_t steps = 0;
  std::size_t target_rows = 0;
  std::size_t aux_rows = 0;
  /// Steps whose batch was not exactly B/2 + B/2 or repeated an auxiliary sample (simultaneous mode).
  std::size_t malformed_steps = 0;
};

struct TrainResult {
  Model final_model;
  /// Parameters at the epoch with the best validation dacc (first such epoch on ties).
  Model best_model;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_dacc = 0.0;
  OptimizerState optimizer;
  TrainerState state;
  StepAudit audit;

  /// Final model with optimizer and trainer state, for resuming.
  Checkpoint checkpoint() const;
};

struct TrainHooks {
  std::function<void(const Batch&)> on_batch;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Runs `config.epochs` epochs. Throws DivergenceError on a non-finite loss.
TrainResult train(const Model& model, const GroupedDataset& data, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// Continues a run from a checkpoint written by TrainResult::checkpoint() up
/// to `config.epochs` total epochs.
TrainResult resume_training(const Checkpoint& checkpoint, const GroupedDataset& data, const TrainConfig& config,
                            const TrainHooks& hooks = {});

/// Pre-trains the layers below the head as an m-class classifier on the
/// auxiliary pool (target-only loop, fresh head drawn from `init_rng`) and
/// returns `model` with those layers replaced. The head of `model` is untouched.
Model pretrain_features(const Model& model, const GroupedDataset& data, const TrainConfig& config, Rng& init_rng);

/// Layout and hyperparameters the trainer actually uses for `config.mode`.
GroupLayout effective_layout(const GroupedDataset& data, TrainMode mode);
Hyperparameters effective_hyperparameters(const TrainConfig& config);

}  // namespace simlearn
