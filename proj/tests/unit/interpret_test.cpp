#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "simlearn/errors.hpp"
#include "simlearn/interpret.hpp"
#include "support.hpp"

using namespace simlearn;
using simlearn::testing::random_tensor;

namespace {

/// conv 1x1 (weight 1) -> relu -> gap -> head(k); head weight for output 0 is `w0`.
Model identity_cam_model(double w0, std::size_t k = 2) {
  ModelSpec spec{{3, 4, 1},
                 {LayerSpec::conv2d(1, 1, 1), LayerSpec::relu(), LayerSpec::global_avg_pool(), LayerSpec::head(k)}};
  Rng rng(0);
  Model m = Model::initialize(spec, rng);
  m.params.get(weight_name(0))[0] = 1.0;
  auto& hw = m.params.get(weight_name(3));
  hw.fill(0.0);
  hw[0] = w0;
  return m;
}

Model small_cnn(std::uint64_t seed, std::size_t k, std::size_t m) {
  ClassifierShape s;
  s.input = {6, 6, 1};
  s.conv_channels = {4, 5};
  s.conv_kernels = {3, 3};
  s.conv_strides = {1, 1};
  s.n1 = 6;
  s.n2 = 5;
  s.k = k;
  s.m = m;
  Rng rng(seed);
  return Model::initialize(make_classifier(s), rng);
}

std::vector<Sample> random_samples(std::size_t n, std::size_t classes, Group group, Rng& rng) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({random_tensor({6, 6, 1}, rng), group, i % classes});
  return out;
}

double pearson_oracle(const std::vector<double>& u, const std::vector<double>& v) {
  const double n = double(u.size());
  double mu = 0, mv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i] / n;
    mv += v[i] / n;
  }
  double suv = 0, suu = 0, svv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    suv += (u[i] - mu) * (v[i] - mv);
    suu += (u[i] - mu) * (u[i] - mu);
    svv += (v[i] - mv) * (v[i] - mv);
  }
  return suv / std::sqrt(suu * svv);
}

double mean_abs_oracle(const std::vector<std::vector<double>>& vs) {
  double s = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = i + 1; j < vs.size(); ++j) {
      s += std::abs(pearson_oracle(vs[i], vs[j]));
      ++pairs;
    }
  return s / double(pairs);
}

}  // namespace

TEST(ChannelVector, PositiveSumOfSingleImage) {
  ModelSpec spec{{2, 2, 1}, {LayerSpec::conv2d(1, 1, 1), LayerSpec::global_avg_pool(), LayerSpec::head(2)}};
  Rng rng(0);
  Model m = Model::initialize(spec, rng);
  m.params.get(weight_name(0))[0] = 1.0;
  const std::vector<Sample> one{{Tensor({2, 2, 1}, std::vector<double>{1, -2, 3, 0}), Group::Target, 0}};
  const auto v = class_channel_vector(m, one, 0);
  ASSERT_EQ(v.values.size(), 1u);
  EXPECT_EQ(v.values[0], 4.0);
  const std::vector<Sample> neg{{Tensor({2, 2, 1}, std::vector<double>{-1, -2, -3, -0.5}), Group::Target, 0}};
  EXPECT_EQ(class_channel_vector(m, neg, 0).values[0], 0.0);
  const std::vector<Sample> two{one[0], one[0]};
  EXPECT_EQ(class_channel_vector(m, two, 0).values[0], 8.0);
  EXPECT_THROW(class_channel_vector(m, one, 1), InvalidArgument);
}

TEST(ChannelVector, AdditiveOverDisjointSubsets) {
  Rng rng(1);
  const Model m = small_cnn(1, 3, 0);
  const auto samples = random_samples(10, 1, Group::Target, rng);
  const std::span<const Sample> all(samples);
  const auto whole = class_channel_vector(m, all, 2);
  const auto a = class_channel_vector(m, all.subspan(0, 4), 2);
  const auto b = class_channel_vector(m, all.subspan(4), 2);
  for (std::size_t c = 0; c < whole.values.size(); ++c) {
    EXPECT_NEAR(whole.values[c], a.values[c] + b.values[c], 1e-12);
    EXPECT_GE(whole.values[c], 0.0);
  }
}

TEST(Pearson, Examples) {
  const std::vector<double> u{1, 2, 3, 4};
  EXPECT_NEAR(pearson(u, u).value, 1.0, 1e-15);
  EXPECT_NEAR(pearson(u, std::vector<double>{-1, -2, -3, -4}).value, -1.0, 1e-15);
  EXPECT_NEAR(pearson(u, std::vector<double>{1, 3, 2, 4}).value, 0.8, 1e-15);
  const auto flat = pearson(u, std::vector<double>{2, 2, 2, 2});
  EXPECT_EQ(flat.value, 0.0);
  EXPECT_TRUE(flat.degenerate);
  EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{2}), InvalidArgument);
  EXPECT_THROW(pearson(u, std::vector<double>{1, 2}), InvalidArgument);
}

TEST(LayerCorrelation, HandBuiltVectorsMatchPairwiseOracle) {
  const std::vector<std::vector<double>> vs{{1, 5, 2, 0, 3}, {2, 1, 4, 4, 0.5}, {0, 3, 3, 1, 2}};
  const auto s = mean_abs_pairwise_correlation(vs);
  EXPECT_NEAR(s.mean_abs, mean_abs_oracle(vs), 1e-12);
  EXPECT_NEAR(s.matrix[0][1], pearson_oracle(vs[0], vs[1]), 1e-12);
  EXPECT_EQ(s.matrix[1][1], 1.0);
  const auto pair = mean_abs_pairwise_correlation({vs[0], vs[2]});
  EXPECT_NEAR(pair.mean_abs, std::abs(pearson_oracle(vs[0], vs[2])), 1e-12);
  const auto same = mean_abs_pairwise_correlation({vs[0], vs[0], vs[0]});
  EXPECT_NEAR(same.mean_abs, 1.0, 1e-15);
  const auto scaled = mean_abs_pairwise_correlation({vs[1], {4, 2, 8, 8, 1}, {0.2, 0.1, 0.4, 0.4, 0.05}});
  EXPECT_NEAR(scaled.mean_abs, 1.0, 1e-15);
}

TEST(LayerCorrelation, ModelMatchesBruteForce) {
  Rng rng(2);
  const Model m = small_cnn(2, 4, 3);
  const auto samples = random_samples(20, 4, Group::Target, rng);
  const auto layers = spatial_layers(m.spec);
  ASSERT_EQ(layers, (std::vector<std::size_t>{0, 1, 2, 3}));
  const auto report = layer_correlation(m, samples, layers);
  ASSERT_EQ(report.layers.size(), 4u);
  for (std::size_t li = 0; li < layers.size(); ++li) {
    std::vector<std::vector<double>> vecs(4);
    for (const auto& s : samples) {
      const Tensor x = s.features.reshaped({1, 6, 6, 1});
      const auto cache = model_forward(m, x, false);
      const Tensor& out = cache.layer_output(layers[li]);
      const std::size_t ch = out.shape().back();
      if (vecs[s.class_index].empty()) vecs[s.class_index].assign(ch, 0.0);
      for (std::size_t i = 0; i < out.size(); ++i) vecs[s.class_index][i % ch] += std::max(0.0, out[i]);
    }
    EXPECT_NEAR(report.layers[li].mean_abs, mean_abs_oracle(vecs), 1e-12) << "layer " << layers[li];
    EXPECT_GE(report.layers[li].mean_abs, 0.0);
    EXPECT_LE(report.layers[li].mean_abs, 1.0);
  }
}

TEST(LayerCorrelation, SkipsEmptyClassesAndNeedsTwo) {
  Rng rng(3);
  const Model m = small_cnn(3, 4, 0);
  auto samples = random_samples(9, 3, Group::Target, rng);  // class 3 absent
  const std::size_t layer[] = {3};
  const auto report = layer_correlation(m, samples, layer);
  EXPECT_EQ(report.skipped_classes, (std::vector<std::size_t>{3}));
  EXPECT_EQ(report.layers[0].classes, (std::vector<std::size_t>{0, 1, 2}));
  const auto one_class = random_samples(5, 1, Group::Target, rng);
  EXPECT_THROW(layer_correlation(m, one_class, layer), InvalidArgument);
}

TEST(GradCam, IdentityModelGivesPositivePart) {
  const Model m = identity_cam_model(1.0);
  const Tensor img({3, 4, 1}, std::vector<double>{0.5, -1, 2, 0, 1, 1, -3, 0.25, 4, 0, 0, -0.5});
  const std::size_t out[] = {0};
  const Heatmap h = grad_cam(m, img, out, "img");
  ASSERT_EQ(h.height, 3u);
  ASSERT_EQ(h.width, 4u);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(h.values[i], std::max(0.0, img[i]) / 4.0, 1e-15);
  EXPECT_EQ(h.source, "img");
}

TEST(GradCam, ZeroWeightGivesZeroMap) {
  const Model m = identity_cam_model(0.0);
  Rng rng(4);
  const std::size_t out[] = {0};
  const Heatmap h = grad_cam(m, random_tensor({3, 4, 1}, rng), out);
  for (double v : h.values) EXPECT_EQ(v, 0.0);
}

TEST(GradCam, RangeAndLogitShiftInvariance) {
  Rng rng(5);
  Model m = small_cnn(5, 3, 2);
  const Tensor img = random_tensor({6, 6, 1}, rng);
  const std::size_t out[] = {0, 2};
  const Heatmap a = grad_cam(m, img, out);
  double peak = 0;
  for (double v : a.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    peak = std::max(peak, v);
  }
  EXPECT_TRUE(peak == 0.0 || peak == 1.0);
  auto& bias = m.params.get(bias_name(m.spec.head_index()));
  bias[0] += 3.0;
  bias[2] += 3.0;
  const Heatmap b = grad_cam(m, img, out);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NEAR(b.score, a.score + 6.0, 1e-12);
}

TEST(GradCam, Errors) {
  ModelSpec spec{{4}, {LayerSpec::dense(3), LayerSpec::relu(), LayerSpec::head(2)}};
  Rng rng(6);
  const Model dense = Model::initialize(spec, rng);
  const std::size_t out[] = {0};
  EXPECT_THROW(grad_cam(dense, Tensor({4}), out), InvalidState);
  const std::size_t bad[] = {9};
  EXPECT_THROW(grad_cam(identity_cam_model(1.0), Tensor({3, 4, 1}), bad), InvalidArgument);
}

TEST(Heatmap, ImagesHaveExpectedPixels) {
  Heatmap h{1, 2, {0.0, 1.0}, "", 0.0};
  const Image8 gray = heatmap_image(h);
  EXPECT_EQ(gray.channels, 1u);
  EXPECT_EQ(gray.pixels, (std::vector<std::uint8_t>{0, 255}));
  const Image8 over = heatmap_overlay(Tensor({1, 2, 1}, std::vector<double>{0.5, 0.5}), h, 1.0);
  EXPECT_EQ(over.channels, 3u);
  EXPECT_EQ(over.pixels[3], 255);  // full heat is pure red
  EXPECT_EQ(over.pixels[4], 0);
  EXPECT_EQ(over.pixels[0], over.pixels[1]);  // no heat keeps the gray
  EXPECT_THROW(heatmap_overlay(Tensor({2, 2, 1}), h), ShapeError);
}

TEST(TopActivatingAux, MatchesSortOracle) {
  Rng rng(7);
  const Model m = small_cnn(7, 3, 5);
  const GroupLayout layout{3, 5};
  const auto aux = random_samples(23, 5, Group::Auxiliary, rng);
  const auto ranked = top_activating_aux(m, aux, layout, 5, 3);

  std::vector<double> sample_score(aux.size());
  const Tensor p = predict_proba(m, stack_features(aux));
  for (std::size_t i = 0; i < aux.size(); ++i) sample_score[i] = p.at(i, 0) + p.at(i, 1) + p.at(i, 2);
  std::vector<std::pair<double, std::size_t>> classes;
  for (std::size_t c = 0; c < 5; ++c) {
    double s = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < aux.size(); ++i)
      if (aux[i].class_index == c) {
        s += sample_score[i];
        ++n;
      }
    classes.push_back({s / double(n), c});
  }
  std::stable_sort(classes.begin(), classes.end(), [](auto& a, auto& b) { return a.first > b.first; });
  ASSERT_EQ(ranked.size(), 5u);
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_EQ(ranked[r].class_index, classes[r].second);
    EXPECT_NEAR(ranked[r].score, classes[r].first, 1e-12);
    ASSERT_EQ(ranked[r].top_instances.size(), 3u);
    EXPECT_GE(ranked[r].top_instances[0].score, ranked[r].top_instances[1].score);
    for (const auto& inst : ranked[r].top_instances) {
      EXPECT_EQ(aux[inst.pool_index].class_index, ranked[r].class_index);
      EXPECT_NEAR(inst.score, sample_score[inst.pool_index], 1e-12);
    }
  }
}

TEST(TopActivatingAux, FullyAuxiliaryClassScoresZeroAndTruncates) {
  ModelSpec spec{{2}, {LayerSpec::head(1, 2)}};
  Rng rng(8);
  Model m = Model::initialize(spec, rng);
  auto& w = m.params.get(weight_name(0));
  w.fill(0.0);
  auto& b = m.params.get(bias_name(0));
  b[0] = 0.0;
  b[1] = 0.0;
  b[2] = 0.0;
  // feature 0 pushes aux class 0's samples into the auxiliary group entirely
  const std::vector<Sample> aux{{Tensor({2}, std::vector<double>{1, 0}), Group::Auxiliary, 0},
                                {Tensor({2}, std::vector<double>{0, 1}), Group::Auxiliary, 1}};
  for (std::size_t j = 0; j < 3; ++j) w[j] = j == 0 ? -800.0 : 0.0;  // row of feature 0, output 0
  const auto ranked = top_activating_aux(m, aux, {1, 2}, 2, 4);
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_EQ(ranked[0].class_index, 1u);
  EXPECT_EQ(ranked[1].class_index, 0u);
  EXPECT_EQ(ranked[1].score, 0.0);
  EXPECT_TRUE(ranked[0].truncated);
  EXPECT_EQ(ranked[0].top_instances.size(), 1u);
}
