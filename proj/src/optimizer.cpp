#include "simlearn/optimizer.hpp"

#include <cmath>

#include "simlearn/errors.hpp"

namespace simlearn {

std::string_view optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adagrad"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adagrad") return OptimizerKind::Adagrad;
  throw InvalidArgument("unknown optimizer '" + std::string(name) + "' (expected sgd or adagrad)");
}

OptimizerState OptimizerState::for_params(OptimizerKind kind, const ParameterStore& params) {
  OptimizerState s;
  s.kind = kind;
  if (kind == OptimizerKind::Adagrad) s.accumulators = params.zeros_like();
  return s;
}

namespace {

void check_matching(const ParameterStore& a, const ParameterStore& b, const char* what) {
  if (a.entries().size() != b.entries().size()) throw ShapeError(std::string(what) + ": parameter count mismatch");
  for (std::size_t i = 0; i < a.entries().size(); ++i) {
    if (a.entries()[i].name != b.entries()[i].name || a.entries()[i].value.shape() != b.entries()[i].value.shape()) {
      throw ShapeError(std::string(what) + ": mismatch at '" + a.entries()[i].name + "'");
    }
  }
}

}  // namespace

void sgd_step(ParameterStore& params, const ParameterStore& grads, double lr) {
  check_matching(params, grads, "sgd_step");
  for (std::size_t i = 0; i < params.entries().size(); ++i) {
    auto theta = params.entries()[i].value.values();
    auto g = grads.entries()[i].value.values();
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= lr * g[j];
  }
}

void adagrad_step(ParameterStore& params, const ParameterStore& grads, OptimizerState& state, double lr,
                  double eps) {
  check_matching(params, grads, "adagrad_step");
  check_matching(params, state.accumulators, "adagrad_step");
  for (std::size_t i = 0; i < params.entries().size(); ++i) {
    auto theta = params.entries()[i].value.values();
    auto g = grads.entries()[i].value.values();
    auto acc = state.accumulators.entries()[i].value.values();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      acc[j] += g[j] * g[j];
      theta[j] -= lr * g[j] / std::sqrt(acc[j] + eps);
    }
  }
}

void optimizer_step(ParameterStore& params, const ParameterStore& grads, OptimizerState& state, double lr) {
  if (state.kind == OptimizerKind::Sgd) {
    sgd_step(params, grads, lr);
  } else {
    adagrad_step(params, grads, state, lr);
  }
  ++state.step;
}

}  // namespace simlearn
