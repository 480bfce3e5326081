#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "simlearn/errors.hpp"
#include "simlearn/layers.hpp"
#include "simlearn/model.hpp"
#include "support.hpp"

using namespace simlearn;
using simlearn::testing::numeric_gradient;
using simlearn::testing::random_tensor;
using simlearn::testing::relative_error;
using simlearn::testing::weighted_sum;

TEST(Glorot, LimitAndRange) {
  EXPECT_DOUBLE_EQ(glorot_limit(3, 3), 1.0);
  EXPECT_NEAR(glorot_limit(100, 200), 0.141421, 1e-6);
  Rng rng(1);
  const auto w = glorot_uniform(100, 200, 20000, rng);
  const double lim = glorot_limit(100, 200);
  double lo = 1, hi = -1;
  for (double v : w) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GE(lo, -lim);
  EXPECT_LE(hi, lim);
  EXPECT_LT(hi - lo, 2 * lim);
  EXPECT_GT(hi - lo, 1.99 * lim);
}

TEST(Glorot, DeterministicPerSeed) {
  Rng a(7), b(7);
  EXPECT_EQ(glorot_uniform(4, 5, 20, a), glorot_uniform(4, 5, 20, b));
}

TEST(Glorot, RejectsZeroFan) {
  Rng rng(1);
  EXPECT_THROW(glorot_uniform(0, 3, 1, rng), InvalidArgument);
  EXPECT_THROW(glorot_uniform(3, 0, 1, rng), InvalidArgument);
}

TEST(Dense, IdentityForward) {
  const auto x = Tensor::from({1, 2}, {1, 0});
  const auto w = Tensor::from({2, 2}, {1, 0, 0, 1});
  const auto out = dense_forward(x, w, Tensor({2}));
  EXPECT_EQ(out, x);
}

TEST(Dense, ShapeMismatch) {
  EXPECT_THROW(dense_forward(Tensor({2, 3}), Tensor({2, 4}), Tensor({4})), ShapeError);
  EXPECT_THROW(dense_forward(Tensor({2, 3}), Tensor({3, 4}), Tensor({3})), ShapeError);
}

TEST(Dense, BiasGradIsColumnSum) {
  Rng rng(3);
  const auto x = random_tensor({3, 2}, rng);
  const auto w = random_tensor({2, 4}, rng);
  const auto up = random_tensor({3, 4}, rng);
  const auto g = dense_backward(x, w, up);
  for (std::size_t j = 0; j < 4; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += up.at(i, j);
    EXPECT_NEAR(g.bias[j], s, 1e-14);
  }
}

TEST(Dense, FiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto x = random_tensor({2, 3}, rng);
    auto w = random_tensor({3, 4}, rng);
    auto b = random_tensor({4}, rng);
    const auto up = random_tensor({2, 4}, rng);
    const auto f = [&] { return weighted_sum(dense_forward(x, w, b), up); };
    const auto g = dense_backward(x, w, up);
    EXPECT_LT(relative_error(g.input.values(), numeric_gradient(x.values(), f)), 1e-6);
    EXPECT_LT(relative_error(g.weights.values(), numeric_gradient(w.values(), f)), 1e-6);
    EXPECT_LT(relative_error(g.bias.values(), numeric_gradient(b.values(), f)), 1e-6);
  }
}

TEST(Conv2d, OneByOneIdentity) {
  Rng rng(1);
  const auto x = random_tensor({2, 5, 4, 1}, rng);
  const auto out = conv2d_forward(x, Tensor({1, 1, 1, 1}, 1.0), Tensor({1}));
  EXPECT_EQ(out, x);
}

TEST(Conv2d, OnesKernelOnConstant) {
  const Tensor x({1, 6, 6, 1}, 0.7);
  const auto out = conv2d_forward(x, Tensor({3, 3, 1, 1}, 1.0), Tensor({1}));
  ASSERT_EQ(out.shape(), (Shape{1, 4, 4, 1}));
  for (double v : out.values()) EXPECT_NEAR(v, 9 * 0.7, 1e-14);
}

TEST(Conv2d, KernelLargerThanInput) {
  EXPECT_THROW(conv2d_forward(Tensor({1, 2, 2, 1}), Tensor({3, 3, 1, 1}), Tensor({1})), InvalidArgument);
}

TEST(Conv2d, StrideShape) {
  const auto out = conv2d_forward(Tensor({1, 8, 8, 2}), Tensor({3, 3, 2, 5}), Tensor({5}), 2);
  EXPECT_EQ(out.shape(), (Shape{1, 3, 3, 5}));
}

TEST(Conv2d, FiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    const std::size_t stride = 1 + seed % 2;
    auto x = random_tensor({2, 8, 8, 2}, rng);
    auto k = random_tensor({3, 3, 2, 3}, rng);
    auto b = random_tensor({3}, rng);
    const auto out_shape = conv2d_forward(x, k, b, stride).shape();
    const auto up = random_tensor(out_shape, rng);
    const auto f = [&] { return weighted_sum(conv2d_forward(x, k, b, stride), up); };
    const auto g = conv2d_backward(x, k, up, stride);
    EXPECT_LT(relative_error(g.input.values(), numeric_gradient(x.values(), f)), 1e-6);
    EXPECT_LT(relative_error(g.kernels.values(), numeric_gradient(k.values(), f)), 1e-6);
    EXPECT_LT(relative_error(g.bias.values(), numeric_gradient(b.values(), f)), 1e-6);
  }
}

TEST(Conv2d, InputGradOptional) {
  Rng rng(4);
  const auto x = random_tensor({1, 5, 5, 1}, rng);
  const auto k = random_tensor({3, 3, 1, 2}, rng);
  const auto up = random_tensor({1, 3, 3, 2}, rng);
  const auto full = conv2d_backward(x, k, up, 1, true);
  const auto lean = conv2d_backward(x, k, up, 1, false);
  EXPECT_TRUE(lean.input.empty());
  EXPECT_EQ(full.kernels, lean.kernels);
  EXPECT_EQ(full.bias, lean.bias);
}

TEST(Gap, Means) {
  EXPECT_DOUBLE_EQ(gap_forward(Tensor({1, 3, 3, 1}, 4.5))[0], 4.5);
  EXPECT_DOUBLE_EQ(gap_forward(Tensor::from({1, 2, 2, 1}, {1, 2, 3, 4}))[0], 2.5);
}

TEST(Gap, FiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(200 + seed);
    auto x = random_tensor({2, 3, 4, 3}, rng);
    const auto up = random_tensor({2, 3}, rng);
    const auto f = [&] { return weighted_sum(gap_forward(x), up); };
    const auto g = gap_backward(x.shape(), up);
    EXPECT_LT(relative_error(g.values(), numeric_gradient(x.values(), f)), 1e-6);
  }
}

TEST(Relu, FiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(300 + seed);
    auto x = random_tensor({3, 7}, rng);
    const auto up = random_tensor({3, 7}, rng);
    const auto f = [&] { return weighted_sum(relu_forward(x), up); };
    const auto g = relu_backward(x, up);
    EXPECT_LT(relative_error(g.values(), numeric_gradient(x.values(), f)), 1e-6);
  }
}

TEST(Dropout, RateZeroIsIdentity) {
  Rng rng(1), r(2);
  const auto x = random_tensor({4, 5}, rng);
  EXPECT_EQ(dropout_forward(x, 0.0, r, true).output, x);
}

TEST(Dropout, SurvivorFraction) {
  Rng rng(9);
  const Tensor x({100000}, 1.0);
  const auto d = dropout_forward(x, 0.5, rng, true);
  const double kept = std::accumulate(d.mask.values().begin(), d.mask.values().end(), 0.0) / 100000.0;
  EXPECT_NEAR(kept, 0.5, 0.01);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_DOUBLE_EQ(d.output[i], d.mask[i] * 2.0);
}

TEST(Dropout, InferenceMaskAllOnes) {
  Rng rng(1), r(3);
  const auto x = random_tensor({3, 3}, rng);
  const auto d = dropout_forward(x, 0.8, r, false);
  EXPECT_EQ(d.output, x);
  for (double v : d.mask.values()) EXPECT_EQ(v, 1.0);
}

TEST(Dropout, RejectsRateOne) {
  Rng rng(1);
  EXPECT_THROW(dropout_forward(Tensor({2}), 1.0, rng, true), InvalidArgument);
  EXPECT_THROW(dropout_forward(Tensor({2}), -0.1, rng, true), InvalidArgument);
}

TEST(Dropout, BackwardMatchesMask) {
  Rng rng(5), r(6);
  auto x = random_tensor({2, 6}, rng);
  const auto up = random_tensor({2, 6}, rng);
  const auto d = dropout_forward(x, 0.3, r, true);
  const auto f = [&] {
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= d.mask[i] / 0.7;
    return weighted_sum(out, up);
  };
  const auto g = dropout_backward(d.mask, 0.3, up, true);
  EXPECT_LT(relative_error(g.values(), numeric_gradient(x.values(), f)), 1e-6);
}

TEST(Softmax, ClosedForms) {
  const auto p = softmax(Tensor({1, 4}, 3.0));
  for (double v : p.values()) EXPECT_DOUBLE_EQ(v, 0.25);
  const auto q = softmax(Tensor::from({1, 3}, {std::log(2.0), 0, 0}));
  EXPECT_NEAR(q[0], 0.5, 1e-15);
  EXPECT_NEAR(q[1], 0.25, 1e-15);
  EXPECT_NEAR(q[2], 0.25, 1e-15);
}

TEST(Softmax, ShiftInvariantAndOnSimplex) {
  Rng rng(11);
  auto z = random_tensor({5, 7}, rng, -5, 5);
  auto shifted = z;
  for (auto& v : shifted.values()) v += 1000.0;
  const auto p = softmax(z), q = softmax(shifted);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (double v : p.row(r)) {
      EXPECT_GT(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

namespace {

ModelSpec toy_cnn(std::size_t k, std::size_t m, double dropout = 0.0) {
  ClassifierShape s;
  s.input = {7, 7, 2};
  s.conv_channels = {3, 4};
  s.conv_kernels = {3, 2};
  s.conv_strides = {1, 2};
  s.n1 = 5;
  s.n2 = 4;
  s.k = k;
  s.m = m;
  s.dropout = dropout;
  return make_classifier(s);
}

/// Sum of upstream-weighted logits for the full model.
double model_objective(const Model& model, const Tensor& x, const Tensor& up) {
  return weighted_sum(model_forward(model, x, false).logits(), up);
}

}  // namespace

TEST(Model, DenseSoftmaxIdentity) {
  ModelSpec spec;
  spec.input = {3};
  spec.layers = {LayerSpec::head(3, 0)};
  Rng rng(1);
  Model model = Model::initialize(spec, rng);
  model.params.get(weight_name(0)) = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto x = Tensor::from({1, 3}, {0.2, -1.0, 3.0});
  const auto cache = model_forward(model, x, false);
  const auto expect = softmax(x);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(cache.probabilities[i], expect[i], 1e-15);
}

TEST(Model, EndToEndFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(400 + seed);
    Model model = Model::initialize(toy_cnn(3, 2), rng);
    for (const auto& e : model.params.entries())
      for (auto& v : model.params.get(e.name).values()) v += rng.uniform(-0.1, 0.1);  // non-zero biases too
    const auto x = random_tensor({2, 7, 7, 2}, rng, 0, 1);
    const auto up = random_tensor({2, 5}, rng);
    const auto back = model_backward(model, model_forward(model, x, false), up);
    for (const auto& e : model.params.entries()) {
      auto& target = model.params.get(e.name);
      const auto numeric = numeric_gradient(target.values(), [&] { return model_objective(model, x, up); });
      EXPECT_LT(relative_error(back.grads.get(e.name).values(), numeric), 1e-5) << e.name << " seed " << seed;
    }
  }
}

TEST(Model, DropoutBackwardUsesCachedMask) {
  Rng rng(12);
  Model model = Model::initialize(toy_cnn(2, 0, 0.3), rng);
  const auto x = random_tensor({3, 7, 7, 2}, rng, 0, 1);
  const auto up = random_tensor({3, 2}, rng);
  Rng drop(77);
  const auto cache = model_forward(model, x, true, &drop);
  const auto back = model_backward(model, cache, up);
  for (const auto& e : model.params.entries()) {
    auto& target = model.params.get(e.name);
    const auto numeric = numeric_gradient(target.values(), [&] {
      Rng same(77);
      return weighted_sum(model_forward(model, x, true, &same).logits(), up);
    });
    EXPECT_LT(relative_error(back.grads.get(e.name).values(), numeric), 1e-5) << e.name;
  }
}

TEST(Model, ForwardDeterministic) {
  Rng rng(2);
  Model model = Model::initialize(toy_cnn(3, 0), rng);
  const auto x = random_tensor({2, 7, 7, 2}, rng);
  EXPECT_EQ(model_forward(model, x, false).probabilities, model_forward(model, x, false).probabilities);
}

TEST(Model, InitializeDeterministicPerSeed) {
  Rng a(5), b(5);
  EXPECT_EQ(Model::initialize(toy_cnn(3, 0), a).params, Model::initialize(toy_cnn(3, 0), b).params);
}

TEST(Model, SpecValidation) {
  ModelSpec spec;
  spec.input = {4};
  spec.layers = {LayerSpec::dense(3), LayerSpec::relu()};
  EXPECT_THROW(spec.validate(), InvalidArgument);  // no head
  spec.layers = {LayerSpec::head(2, 0), LayerSpec::dense(3)};
  EXPECT_THROW(spec.validate(), InvalidArgument);  // head not last
}

TEST(Model, SpecTextRoundTrip) {
  const auto spec = toy_cnn(3, 2, 0.25);
  const auto text = spec.to_text();
  const auto back = ModelSpec::from_text(text);
  EXPECT_EQ(back.to_text(), text);
  EXPECT_EQ(back.n1(), 5u);
  EXPECT_EQ(back.n2(), 4u);
  EXPECT_EQ(back.head_outputs(), 5u);
  EXPECT_THROW(ModelSpec::from_text("nonsense"), FormatError);
}

TEST(Model, ParameterCountMatchesArrays) {
  Rng rng(1);
  const auto model = Model::initialize(toy_cnn(3, 0), rng);
  std::size_t sum = 0;
  for (const auto& e : model.params.entries()) sum += e.value.size();
  EXPECT_EQ(model.params.total_count(), sum);
  // conv 3*3*2*3+3, conv 2*2*3*4+4, dense 4*5+5, dense 5*4+4, head 4*3+3
  EXPECT_EQ(sum, 57u + 52u + 25u + 24u + 15u);
}

TEST(MultiGroup, IncrementIsMTimesN2Plus1) {
  ModelSpec spec;
  spec.input = {8};
  spec.layers = {LayerSpec::dense(16), LayerSpec::relu(), LayerSpec::dense(4), LayerSpec::relu(), LayerSpec::head(3, 0)};
  Rng rng(1);
  const auto base = Model::initialize(spec, rng);
  const auto ext = extend_multi_group(base, 1, rng);
  EXPECT_EQ(ext.params.total_count() - base.params.total_count(), 5u);
  EXPECT_EQ(ext.spec.head_outputs(), 4u);
}

TEST(MultiGroup, PreservesTargetLogits) {
  Rng rng(3);
  const auto base = Model::initialize(toy_cnn(3, 0), rng);
  const auto ext = extend_multi_group(base, 4, rng);
  const auto x = random_tensor({4, 7, 7, 2}, rng);
  const auto a = model_forward(base, x, false).logits();
  const auto b = model_forward(ext, x, false).logits();
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(a.at(r, c), b.at(r, c));
}

TEST(MultiGroup, StripRoundTripAndErrors) {
  Rng rng(4);
  const auto base = Model::initialize(toy_cnn(3, 0), rng);
  EXPECT_THROW(extend_multi_group(base, 0, rng), InvalidArgument);
  EXPECT_THROW(strip_auxiliary_head(base), InvalidState);
  const auto ext = extend_multi_group(base, 6, rng);
  EXPECT_EQ(ext.params.total_count() - base.params.total_count(), 6u * (4 + 1));
  const auto stripped = strip_auxiliary_head(ext);
  EXPECT_EQ(stripped.params, base.params);
  EXPECT_EQ(stripped.spec.to_text(), base.spec.to_text());
  EXPECT_THROW(strip_auxiliary_head(stripped), InvalidState);
}

TEST(MultiGroup, StrippedArgmaxEqualsRestrictedArgmax) {
  Rng rng(8);
  const auto base = Model::initialize(toy_cnn(3, 0), rng);
  auto ext = extend_multi_group(base, 5, rng);
  for (auto& v : ext.params.get(weight_name(ext.spec.head_index())).values()) v += rng.uniform(-0.5, 0.5);
  const auto stripped = strip_auxiliary_head(ext);
  const auto x = random_tensor({30, 7, 7, 2}, rng, 0, 1);
  const auto full = predict_proba(ext, x);
  const auto small = predict_proba(stripped, x);
  for (std::size_t r = 0; r < 30; ++r) {
    const auto fr = full.row(r).subspan(0, 3);
    const auto sr = small.row(r);
    EXPECT_EQ(std::max_element(fr.begin(), fr.end()) - fr.begin(), std::max_element(sr.begin(), sr.end()) - sr.begin());
  }
}

TEST(Model, PredictProbaChunkingIsExact) {
  Rng rng(9);
  const auto model = Model::initialize(toy_cnn(3, 0), rng);
  const auto x = random_tensor({10, 7, 7, 2}, rng);
  EXPECT_EQ(predict_proba(model, x, 3), predict_proba(model, x, 64));
}
