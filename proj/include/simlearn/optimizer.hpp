#pragma once

#include <cstdint>
#include <string>

#include "simlearn/model.hpp"

namespace simlearn {

enum class OptimizerKind { Sgd, Adagrad };

std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

/// Per-parameter squared-gradient accumulators (AdaGrad) and the number of
/// applied steps. SGD keeps only the step counter.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adagrad;
  ParameterStore accumulators;
  std::uint64_t step = 0;

  static OptimizerState for_params(OptimizerKind kind, const ParameterStore& params);
  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// theta <- theta - lr * g
void sgd_step(ParameterStore& params, const ParameterStore& grads, double lr);

/// G <- G + g^2 ; theta <- theta - lr * g / sqrt(G + eps)
void adagrad_step(ParameterStore& params, const ParameterStore& grads, OptimizerState& state, double lr,
                  double eps = 1e-8);

/// Dispatches on state.kind and advances state.step.
void optimizer_step(ParameterStore& params, const ParameterStore& grads, OptimizerState& state, double lr);

}  // namespace simlearn
