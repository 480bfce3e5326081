#include "simlearn/trainer.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "simlearn/errors.hpp"
#include "simlearn/metrics.hpp"

namespace simlearn {

std::string_view train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::Baseline: return "baseline";
    case TrainMode::Dropout: return "dropout";
    case TrainMode::Simultaneous: return "simultaneous";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning rate must be > 0");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 2 || batch_size % 2 != 0) throw InvalidArgument("batch size must be an even integer >= 2");
  h.validate();
}

Model pretrain_features(const Model& model, const GroupedDataset& data, const TrainConfig& config, Rng& init_rng) {
  const GroupedDataset aux = auxiliary_as_target(data);
  ModelSpec spec = model.spec;
  spec.layers[spec.head_index()] = LayerSpec::head(aux.layout.k, 0);
  TrainConfig cfg = config;
  cfg.mode = TrainMode::Baseline;
  const TrainResult res = train(Model::initialize(spec, init_rng), aux, cfg);
  Model out = model;
  copy_feature_parameters(res.final_model, out);
  return out;
}

GroupLayout effective_layout(const GroupedDataset& data, TrainMode mode) {
  return mode == TrainMode::Simultaneous ? data.layout : GroupLayout{data.layout.k, 0};
}

Hyperparameters effective_hyperparameters(const TrainConfig& config) {
  // Target-only training is plain cross-entropy: lambda = 1 and no penalty.
  return config.mode == TrainMode::Simultaneous ? config.h : Hyperparameters{1.0, 0.0, 0.0};
}

Checkpoint TrainResult::checkpoint() const { return Checkpoint{final_model, optimizer, state}; }

namespace {

std::vector<std::size_t> class_labels(const std::vector<Sample>& samples) {
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.class_index);
  return out;
}

TrainResult run(Model model, OptimizerState opt, TrainerState state, const GroupedDataset& data,
                const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  const bool simultaneous = cfg.mode == TrainMode::Simultaneous;
  data.validate(simultaneous);
  const GroupLayout layout = effective_layout(data, cfg.mode);
  const Hyperparameters h = effective_hyperparameters(cfg);
  if (model.spec.target_outputs() != layout.k || model.spec.aux_outputs() != layout.m) {
    throw InvalidArgument("model head has " + std::to_string(model.spec.target_outputs()) + "+" +
                          std::to_string(model.spec.aux_outputs()) + " outputs but " +
                          std::string(train_mode_name(cfg.mode)) + " mode needs " + std::to_string(layout.k) + "+" +
                          std::to_string(layout.m));
  }
  const std::size_t slice = simultaneous ? cfg.batch_size / 2 : cfg.batch_size;

  Rng rng(cfg.seed);
  if (!state.rng_state.empty()) rng.restore(state.rng_state);

  const bool have_val = !data.target_val.empty();
  const Tensor val_inputs = have_val ? stack_features(data.target_val) : Tensor();
  const std::vector<std::size_t> val_labels = class_labels(data.target_val);

  TrainResult result;
  result.audit = {};
  std::vector<std::size_t> aux_order;
  if (state.best_params.entries().empty()) state.best_params = model.params;

  for (std::size_t epoch = state.epochs_completed + 1; epoch <= cfg.epochs; ++epoch) {
    const auto plan = epoch_plan(data.target_train.size(), slice, cfg.shuffle_target ? &rng : nullptr);
    aux_order.clear();
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < plan.size(); ++step) {
      const Batch batch = simultaneous ? compose_batch(data.target_train, plan[step], data.aux_pool, aux_order,
                                                       cfg.batch_size, layout, rng)
                                       : make_batch(data.target_train, plan[step], layout);
      if (hooks.on_batch) hooks.on_batch(batch);

      auto& audit = result.audit;
      ++audit.steps;
      std::size_t t_rows = 0, a_rows = 0;
      std::set<std::size_t> aux_seen;
      for (const auto& p : batch.provenance) {
        if (p.group == Group::Target) {
          ++t_rows;
        } else {
          ++a_rows;
          aux_seen.insert(p.index);
        }
      }
      audit.target_rows += t_rows;
      audit.aux_rows += a_rows;
      if (simultaneous && (t_rows != slice || a_rows != slice || aux_seen.size() != a_rows)) ++audit.malformed_steps;

      const ForwardCache cache = model_forward(model, batch.inputs, true, &rng);
      const double loss = sll_batch(batch.labels, cache.probabilities, layout, h);
      if (!std::isfinite(loss)) {
        throw DivergenceError(epoch, step + 1,
                              "training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                  std::to_string(step + 1));
      }
      loss_sum += loss;
      const Tensor grad = sll_batch_grad_logits(batch.labels, cache.probabilities, layout, h);
      const BackwardResult back = model_backward(model, cache, grad);
      optimizer_step(model.params, back.grads, opt, cfg.learning_rate);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(plan.size());
    rec.val_dacc = have_val ? dacc(predict_proba(model, val_inputs), val_labels, data.layout)
                            : std::numeric_limits<double>::quiet_NaN();
    state.history.push_back(rec);
    if (!have_val || rec.val_dacc > state.best_val_dacc) {
      state.best_val_dacc = rec.val_dacc;
      state.best_epoch = epoch;
      state.best_params = model.params;
    }
    state.epochs_completed = epoch;
    state.rng_state = rng.state();
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }

  result.history = state.history;
  result.best_epoch = state.best_epoch;
  result.best_val_dacc = state.best_val_dacc;
  result.best_model = Model{model.spec, state.best_params};
  result.final_model = std::move(model);
  result.optimizer = std::move(opt);
  result.state = std::move(state);
  return result;
}

}  // namespace

TrainResult train(const Model& model, const GroupedDataset& data, const TrainConfig& config, const TrainHooks& hooks) {
  TrainerState state;
  return run(model, OptimizerState::for_params(config.optimizer, model.params), std::move(state), data, config, hooks);
}

TrainResult resume_training(const Checkpoint& ckpt, const GroupedDataset& data, const TrainConfig& config,
                            const TrainHooks& hooks) {
  if (!ckpt.optimizer || !ckpt.trainer) throw InvalidArgument("checkpoint lacks optimizer or trainer state");
  if (ckpt.optimizer->kind != config.optimizer) throw InvalidArgument("checkpoint optimizer differs from config");
  if (ckpt.trainer->epochs_completed > config.epochs) {
    throw InvalidArgument("checkpoint is already past the configured epoch count");
  }
  return run(ckpt.model, *ckpt.optimizer, *ckpt.trainer, data, config, hooks);
}

}  // namespace simlearn
