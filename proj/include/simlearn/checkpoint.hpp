#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "simlearn/model.hpp"
#include "simlearn/optimizer.hpp"

namespace simlearn {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_dacc = 0.0;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

/// Everything needed to resume a training run at an epoch boundary.
struct TrainerState {
  std::size_t epochs_completed = 0;
  std::string rng_state;
  std::vector<EpochRecord> history;
  double best_val_dacc = -1.0;
  std::size_t best_epoch = 0;
  ParameterStore best_params;
  friend bool operator==(const TrainerState&, const TrainerState&) = default;
};

struct Checkpoint {
  Model model;
  std::optional<OptimizerState> optimizer;
  std::optional<TrainerState> trainer;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout is documented in docs/checkpoint_format.md.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint checkpoint_load(const std::filesystem::path& path);

}  // namespace simlearn
