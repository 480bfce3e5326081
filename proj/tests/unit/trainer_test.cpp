#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "simlearn/checkpoint.hpp"
#include "simlearn/errors.hpp"
#include "simlearn/layers.hpp"
#include "simlearn/trainer.hpp"

using namespace simlearn;
namespace fs = std::filesystem;

namespace {

GroupedDataset tiny_data(std::uint64_t seed, double noise = 0.3, std::size_t train_per_class = 12) {
  SynthConfig cfg;
  cfg.k = 3;
  cfg.m = 4;
  cfg.image_size = 8;
  cfg.train_per_class = {train_per_class};
  cfg.val_per_class = 4;
  cfg.test_per_class = 4;
  cfg.aux_per_class = 6;
  cfg.noise = noise;
  return synth_generate(cfg, seed);
}

Model tiny_model(std::uint64_t seed, std::size_t m = 0, std::size_t stride = 2) {
  ClassifierShape s;
  s.input = {8, 8, 1};
  s.conv_channels = {3};
  s.conv_kernels = {3};
  s.conv_strides = {stride};
  s.n1 = 8;
  s.n2 = 6;
  s.k = 3;
  s.m = m;
  Rng rng(seed);
  return Model::initialize(make_classifier(s), rng);
}

ParameterStore single(double v) {
  ParameterStore p;
  p.add("w", Tensor({1}, std::vector<double>{v}));
  return p;
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("simlearn_" + name); }

}  // namespace

TEST(Sgd, Examples) {
  auto p = single(1.0);
  sgd_step(p, single(0.0), 0.1);
  EXPECT_EQ(p.get("w")[0], 1.0);
  sgd_step(p, single(0.5), 0.1);
  EXPECT_DOUBLE_EQ(p.get("w")[0], 0.95);
  auto a = single(2.0), b = single(2.0);
  sgd_step(a, single(0.3), 0.1);
  sgd_step(a, single(0.3), 0.1);
  sgd_step(b, single(0.6), 0.1);
  EXPECT_NEAR(a.get("w")[0], b.get("w")[0], 1e-15);
}

TEST(Sgd, ShapeMismatch) {
  auto p = single(1.0);
  ParameterStore g;
  g.add("w", Tensor({2}));
  EXPECT_THROW(sgd_step(p, g, 0.1), ShapeError);
}

TEST(Adagrad, FirstStepHandOracle) {
  auto p = single(0.0);
  auto st = OptimizerState::for_params(OptimizerKind::Adagrad, p);
  adagrad_step(p, single(2.0), st, 0.1);
  EXPECT_DOUBLE_EQ(p.get("w")[0], -0.1 * 2.0 / std::sqrt(4.0 + 1e-8));
  EXPECT_NEAR(p.get("w")[0], -0.1, 1e-9);
  EXPECT_DOUBLE_EQ(st.accumulators.get("w")[0], 4.0);
}

TEST(Adagrad, ZeroGradientKeepsParams) {
  auto p = single(0.7);
  auto st = OptimizerState::for_params(OptimizerKind::Adagrad, p);
  for (int i = 0; i < 20; ++i) adagrad_step(p, single(0.0), st, 0.5);
  EXPECT_EQ(p.get("w")[0], 0.7);
}

TEST(Adagrad, StepSizeNonIncreasingAndAccumulatorMonotone) {
  auto p = single(0.0);
  auto st = OptimizerState::for_params(OptimizerKind::Adagrad, p);
  double prev_step = 1e300, prev_acc = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double before = p.get("w")[0];
    adagrad_step(p, single(1.5), st, 0.1);
    const double step = before - p.get("w")[0];
    EXPECT_LE(step, prev_step);
    EXPECT_GE(st.accumulators.get("w")[0], prev_acc);
    prev_step = step;
    prev_acc = st.accumulators.get("w")[0];
  }
}

TEST(OptimizerStep, DispatchAndCounter) {
  auto p = single(1.0);
  auto st = OptimizerState::for_params(OptimizerKind::Sgd, p);
  optimizer_step(p, single(1.0), st, 0.25);
  EXPECT_DOUBLE_EQ(p.get("w")[0], 0.75);
  EXPECT_EQ(st.step, 1u);
  EXPECT_EQ(parse_optimizer("adagrad"), OptimizerKind::Adagrad);
  EXPECT_THROW(parse_optimizer("adam"), InvalidArgument);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 7;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.epochs = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Train, FullBatchLossStrictlyDecreases) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    // 12 standardized samples, one full batch per epoch. Unstandardized inputs leave most
    // conv units dead and park dense pre-activations exactly on the ReLU kink.
    auto data = tiny_data(seed, 0.0, 4);
    apply_standardization(data, fit_standardization(data));
    TrainConfig cfg;
    cfg.mode = TrainMode::Baseline;
    cfg.optimizer = OptimizerKind::Sgd;
    cfg.learning_rate = 0.05;
    cfg.batch_size = 12;
    cfg.epochs = 10;
    cfg.seed = seed;
    const auto res = train(tiny_model(seed, 0, 1), data, cfg);
    ASSERT_EQ(res.history.size(), 10u);
    for (std::size_t i = 1; i < res.history.size(); ++i)
      EXPECT_LT(res.history[i].train_loss, res.history[i - 1].train_loss) << "seed " << seed << " step " << i;
  }
}

TEST(Train, BaselineEqualsPlainCrossEntropyLoop) {
  const auto data = tiny_data(1);
  TrainConfig cfg;
  cfg.mode = TrainMode::Baseline;
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 6;
  cfg.epochs = 3;
  cfg.shuffle_target = false;
  cfg.h = {0.3, 2.0, 2.0};  // ignored outside simultaneous mode
  const Model init = tiny_model(1);
  const auto res = train(init, data, cfg);

  Model model = init;
  const GroupLayout layout{3, 0};
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    const auto plan = epoch_plan(data.target_train.size(), cfg.batch_size, nullptr);
    for (const auto& slice : plan) {
      const Batch b = make_batch(data.target_train, slice, layout);
      const ForwardCache cache = model_forward(model, b.inputs, true);
      const Tensor& p = cache.probabilities;
      Tensor grad(p.shape());
      double loss = 0.0;
      for (std::size_t r = 0; r < b.size(); ++r) {
        const std::size_t y = data.target_train[slice[r]].class_index;
        loss -= std::log(p.at(r, y));
        for (std::size_t c = 0; c < 3; ++c) grad.at(r, c) = (p.at(r, c) - (c == y ? 1.0 : 0.0)) / double(b.size());
      }
      loss_sum += loss / double(b.size());
      sgd_step(model.params, model_backward(model, cache, grad).grads, cfg.learning_rate);
    }
    EXPECT_NEAR(res.history[epoch].train_loss, loss_sum / double(plan.size()), 1e-12);
  }
  for (std::size_t i = 0; i < model.params.entries().size(); ++i) {
    const auto& a = model.params.entries()[i].value;
    const auto& b = res.final_model.params.entries()[i].value;
    for (std::size_t j = 0; j < a.size(); ++j) ASSERT_NEAR(a[j], b[j], 1e-12);
  }
}

TEST(Train, TargetLogitGradientsMatchStrippedModelWhenAuxMassVanishes) {
  const auto data = tiny_data(2);
  Rng ext(3);
  Model full = extend_multi_group(tiny_model(2), 4, ext);
  const std::size_t head = full.spec.head_index();
  for (std::size_t a = 3; a < 7; ++a) full.params.get(bias_name(head))[a] = -800.0;  // exp underflows to 0
  const Model stripped = strip_auxiliary_head(full);
  const std::size_t idx[] = {0, 1, 2, 3, 4, 5};
  const Batch bf = make_batch(data.target_train, idx, {3, 4});
  const Batch bs = make_batch(data.target_train, idx, {3, 0});

  const ForwardCache cf = model_forward(full, bf.inputs, false);
  const ForwardCache cs = model_forward(stripped, bs.inputs, false);
  const Tensor gf = sll_batch_grad_logits(bf.labels, cf.probabilities, {3, 4}, {1, 0, 0});
  const Tensor gs = sll_batch_grad_logits(bs.labels, cs.probabilities, {3, 0}, {1, 0, 0});
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(gf.at(r, c), gs.at(r, c), 1e-15);
    for (std::size_t c = 3; c < 7; ++c) EXPECT_EQ(gf.at(r, c), 0.0);
  }
}

TEST(Train, TargetLogitGradientIsFullSoftmaxMinusLabel) {
  const auto data = tiny_data(2);
  Rng ext(3);
  const Model full = extend_multi_group(tiny_model(2), 4, ext);
  const std::size_t idx[] = {0, 5, 9};
  const Batch b = make_batch(data.target_train, idx, {3, 4});
  const ForwardCache c = model_forward(full, b.inputs, false);
  const Tensor g = sll_batch_grad_logits(b.labels, c.probabilities, {3, 4}, {1, 0, 0});
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 7; ++j)
      EXPECT_NEAR(g.at(r, j), (c.probabilities.at(r, j) - b.labels.at(r, j)) / 3.0, 1e-15);
}

TEST(Train, DeterministicGivenSeed) {
  const auto data = tiny_data(3);
  TrainConfig cfg;
  cfg.mode = TrainMode::Simultaneous;
  cfg.learning_rate = 0.02;
  cfg.batch_size = 8;
  cfg.epochs = 3;
  cfg.seed = 42;
  Rng ext(1);
  const Model m = extend_multi_group(tiny_model(3), 4, ext);
  const auto a = train(m, data, cfg), b = train(m, data, cfg);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.final_model.params, b.final_model.params);
  EXPECT_EQ(a.history.size(), 3u);
}

TEST(Train, SimultaneousAuditIsHalfAndHalf) {
  const auto data = tiny_data(4, 0.3, 20);  // 60 target samples
  TrainConfig cfg;
  cfg.mode = TrainMode::Simultaneous;
  cfg.batch_size = 32;
  cfg.epochs = 1;
  Rng ext(1);
  std::size_t bad = 0;
  TrainHooks hooks;
  hooks.on_batch = [&](const Batch& b) {
    std::size_t t = 0;
    std::set<std::size_t> aux;
    for (const auto& p : b.provenance) {
      if (p.group == Group::Target) ++t;
      else aux.insert(p.index);
    }
    bad += t != 16 || aux.size() != 16;
  };
  const auto res = train(extend_multi_group(tiny_model(4), 4, ext), data, cfg, hooks);
  EXPECT_EQ(res.audit.steps, 3u);
  EXPECT_EQ(res.audit.target_rows, 48u);
  EXPECT_EQ(res.audit.aux_rows, 48u);
  EXPECT_EQ(res.audit.malformed_steps, 0u);
  EXPECT_EQ(bad, 0u);
}

TEST(Train, RejectsHeadMismatch) {
  const auto data = tiny_data(5);
  TrainConfig cfg;
  cfg.mode = TrainMode::Baseline;
  cfg.batch_size = 6;
  cfg.epochs = 1;
  Rng ext(1);
  EXPECT_THROW(train(extend_multi_group(tiny_model(5), 4, ext), data, cfg), InvalidArgument);
  cfg.mode = TrainMode::Simultaneous;
  EXPECT_THROW(train(tiny_model(5), data, cfg), InvalidArgument);
}

TEST(Train, DivergenceNamesEpochAndStep) {
  const auto data = tiny_data(6);
  Model model = tiny_model(6);
  model.params.get(bias_name(model.spec.head_index()))[0] = std::nan("");
  TrainConfig cfg;
  cfg.mode = TrainMode::Baseline;
  cfg.batch_size = 36;
  cfg.epochs = 2;
  cfg.shuffle_target = false;
  try {
    train(model, data, cfg);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 1u);
    EXPECT_EQ(e.step(), 1u);
  }
}

TEST(Train, BestModelTracksBestValidation) {
  const auto data = tiny_data(7);
  TrainConfig cfg;
  cfg.mode = TrainMode::Baseline;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 6;
  cfg.epochs = 6;
  const auto res = train(tiny_model(7), data, cfg);
  double best = -1;
  std::size_t best_epoch = 0;
  for (const auto& h : res.history)
    if (h.val_dacc > best) {
      best = h.val_dacc;
      best_epoch = h.epoch;
    }
  EXPECT_EQ(res.best_epoch, best_epoch);
  EXPECT_EQ(res.best_val_dacc, best);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const auto data = tiny_data(8);
  TrainConfig cfg;
  cfg.mode = TrainMode::Simultaneous;
  cfg.batch_size = 8;
  cfg.epochs = 2;
  Rng ext(1);
  const auto res = train(extend_multi_group(tiny_model(8), 4, ext), data, cfg);
  const auto path = temp_file("roundtrip.ckpt");
  checkpoint_save(res.checkpoint(), path);
  const Checkpoint back = checkpoint_load(path);
  EXPECT_EQ(back.model.spec, res.final_model.spec);
  EXPECT_EQ(back.model.params, res.final_model.params);
  ASSERT_TRUE(back.optimizer && back.trainer);
  EXPECT_EQ(*back.optimizer, res.optimizer);
  EXPECT_EQ(*back.trainer, res.state);
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(res.checkpoint()));
}

TEST(Checkpoint, ResumeMatchesUninterruptedRun) {
  const auto data = tiny_data(9);
  TrainConfig cfg;
  cfg.mode = TrainMode::Simultaneous;
  cfg.learning_rate = 0.02;
  cfg.batch_size = 8;
  cfg.epochs = 5;
  cfg.seed = 17;
  Rng ext(1);
  const Model m = extend_multi_group(tiny_model(9), 4, ext);
  const auto full = train(m, data, cfg);

  TrainConfig first = cfg;
  first.epochs = 2;
  const auto part = train(m, data, first);
  const auto path = temp_file("resume.ckpt");
  checkpoint_save(part.checkpoint(), path);
  const auto resumed = resume_training(checkpoint_load(path), data, cfg);
  EXPECT_EQ(resumed.history, full.history);
  EXPECT_EQ(resumed.final_model.params, full.final_model.params);
  EXPECT_EQ(resumed.best_model.params, full.best_model.params);
  EXPECT_EQ(resumed.history.back().train_loss, full.history.back().train_loss);
}

TEST(Checkpoint, CorruptFilesAreFormatErrors) {
  const auto res = Checkpoint{tiny_model(1), std::nullopt, std::nullopt};
  auto bytes = encode_checkpoint(res);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[8] = 99;
  EXPECT_THROW(decode_checkpoint(bad_version), FormatError);
  auto truncated = bytes;
  truncated.resize(truncated.size() / 2);
  EXPECT_THROW(decode_checkpoint(truncated), FormatError);
  EXPECT_THROW(checkpoint_load(temp_file("does_not_exist.ckpt")), IoError);
}

TEST(Checkpoint, ResumeNeedsTrainerState) {
  const auto data = tiny_data(1);
  TrainConfig cfg;
  cfg.mode = TrainMode::Baseline;
  EXPECT_THROW(resume_training(Checkpoint{tiny_model(1), std::nullopt, std::nullopt}, data, cfg), InvalidArgument);
}

TEST(Pretrain, ReplacesFeaturesKeepsHead) {
  const auto data = tiny_data(10);
  const Model base = tiny_model(10);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.epochs = 2;
  cfg.learning_rate = 0.05;
  Rng init(3);
  const Model pre = pretrain_features(base, data, cfg, init);
  EXPECT_EQ(pre.spec, base.spec);
  const std::size_t head = base.spec.head_index();
  EXPECT_EQ(pre.params.get(weight_name(head)), base.params.get(weight_name(head)));
  EXPECT_EQ(pre.params.get(bias_name(head)), base.params.get(bias_name(head)));
  EXPECT_NE(pre.params.get(weight_name(0)), base.params.get(weight_name(0)));
}
