#include "simlearn/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "simlearn/errors.hpp"

namespace simlearn {

std::vector<double> positive_channel_sums(const Tensor& activations) {
  if (activations.rank() != 4) throw InvalidArgument("positive_channel_sums: activation is not spatial");
  const std::size_t ch = activations.dim(3);
  std::vector<double> out(ch, 0.0);
  const std::size_t cells = activations.size() / ch;
  for (std::size_t i = 0; i < cells; ++i) {
    const double* a = activations.data() + i * ch;
    for (std::size_t c = 0; c < ch; ++c)
      if (a[c] > 0.0) out[c] += a[c];
  }
  return out;
}

namespace {

void require_spatial(const ModelSpec& spec, std::size_t layer) {
  const auto shapes = spec.output_shapes();
  if (layer >= shapes.size()) throw InvalidArgument("layer index " + std::to_string(layer) + " out of range");
  if (shapes[layer].size() != 3) {
    throw InvalidArgument("layer " + std::to_string(layer) + " (" +
                          std::string(layer_kind_name(spec.layers[layer].kind)) + ") has no channels");
  }
}

constexpr std::size_t kChunk = 64;

/// Positive channel sums of each requested layer over all `samples`.
std::vector<std::vector<double>> accumulate_channels(const Model& model, std::span<const Sample> samples,
                                                     std::span<const std::size_t> layers) {
  std::vector<std::vector<double>> sums(layers.size());
  for (std::size_t begin = 0; begin < samples.size(); begin += kChunk) {
    const std::size_t end = std::min(samples.size(), begin + kChunk);
    const auto cache = model_forward(model, stack_features(samples.subspan(begin, end - begin)), false);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto part = positive_channel_sums(cache.layer_output(layers[i]));
      if (sums[i].empty()) sums[i].assign(part.size(), 0.0);
      for (std::size_t c = 0; c < part.size(); ++c) sums[i][c] += part[c];
    }
  }
  return sums;
}

}  // namespace

ClassChannelVector class_channel_vector(const Model& model, std::span<const Sample> samples, std::size_t layer) {
  require_spatial(model.spec, layer);
  if (samples.empty()) throw InvalidArgument("class_channel_vector: no samples");
  const std::size_t cls = samples[0].class_index;
  const std::size_t layers[] = {layer};
  return ClassChannelVector{cls, layer, accumulate_channels(model, samples, layers)[0]};
}

PearsonResult pearson(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw InvalidArgument("pearson: vectors differ in length");
  if (u.size() < 2) throw InvalidArgument("pearson: need at least 2 elements");
  const double n = static_cast<double>(u.size());
  double mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= n;
  mv /= n;
  double suv = 0.0, suu = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double du = u[i] - mu, dv = v[i] - mv;
    suv += du * dv;
    suu += du * du;
    svv += dv * dv;
  }
  if (suu == 0.0 || svv == 0.0) return {0.0, true};
  return {std::clamp(suv / std::sqrt(suu * svv), -1.0, 1.0), false};
}

CorrelationSummary mean_abs_pairwise_correlation(const std::vector<std::vector<double>>& vectors) {
  if (vectors.size() < 2) throw InvalidArgument("need at least two vectors to correlate");
  const std::size_t n = vectors.size();
  CorrelationSummary out;
  out.matrix.assign(n, std::vector<double>(n, 0.0));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.matrix[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto r = pearson(vectors[i], vectors[j]);
      out.matrix[i][j] = out.matrix[j][i] = r.value;
      out.degenerate_pairs += r.degenerate ? 1 : 0;
      sum += std::abs(r.value);
      ++pairs;
    }
  }
  out.mean_abs = sum / static_cast<double>(pairs);
  return out;
}

std::vector<std::size_t> spatial_layers(const ModelSpec& spec) {
  std::vector<std::size_t> out;
  const auto shapes = spec.output_shapes();
  for (std::size_t i = 0; i < shapes.size(); ++i)
    if (shapes[i].size() == 3) out.push_back(i);
  return out;
}

LayerCorrelationReport layer_correlation(const Model& model, std::span<const Sample> samples,
                                         std::span<const std::size_t> layers) {
  for (auto l : layers) require_spatial(model.spec, l);
  const std::size_t k = model.spec.target_outputs();
  std::vector<std::vector<Sample>> by_class(k);
  for (const auto& s : samples) {
    if (s.group != Group::Target || s.class_index >= k) throw InvalidArgument("layer_correlation: expects target samples");
    by_class[s.class_index].push_back(s);
  }
  LayerCorrelationReport report;
  std::vector<std::size_t> classes;
  // per_layer[l][c] = vector for class classes[c]
  std::vector<std::vector<std::vector<double>>> per_layer(layers.size());
  for (std::size_t c = 0; c < k; ++c) {
    if (by_class[c].empty()) {
      report.skipped_classes.push_back(c);
      continue;
    }
    classes.push_back(c);
    auto sums = accumulate_channels(model, by_class[c], layers);
    for (std::size_t l = 0; l < layers.size(); ++l) per_layer[l].push_back(std::move(sums[l]));
  }
  if (classes.size() < 2) throw InvalidArgument("layer_correlation: need at least two classes with samples");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto summary = mean_abs_pairwise_correlation(per_layer[l]);
    LayerCorrelation lc;
    lc.layer = layers[l];
    lc.layer_name = "layer" + std::to_string(layers[l]) + "_" + std::string(layer_kind_name(model.spec.layers[layers[l]].kind));
    lc.mean_abs = summary.mean_abs;
    lc.matrix = summary.matrix;
    lc.classes = classes;
    lc.degenerate_pairs = summary.degenerate_pairs;
    report.layers.push_back(std::move(lc));
  }
  return report;
}

Heatmap grad_cam(const Model& model, const Tensor& image, std::span<const std::size_t> outputs, std::string source) {
  const auto conv = last_conv_layer(model.spec);
  if (!conv) throw InvalidState("grad_cam: model has no convolutional layer");
  if (outputs.empty()) throw InvalidArgument("grad_cam: no outputs selected");
  const std::size_t n = model.spec.head_outputs();
  for (auto o : outputs)
    if (o >= n) throw InvalidArgument("grad_cam: output index " + std::to_string(o) + " out of range");
  std::size_t layer = *conv;
  if (layer + 1 < model.spec.layers.size() && model.spec.layers[layer + 1].kind == LayerKind::Relu) ++layer;

  Shape batched{1};
  batched.insert(batched.end(), image.shape().begin(), image.shape().end());
  const auto cache = model_forward(model, image.reshaped(batched), false);
  Tensor seed({1, n});
  double score = 0.0;
  for (auto o : outputs) {
    seed[o] = 1.0;
    score += cache.logits()[o];
  }
  const auto back = model_backward(model, cache, seed, true);
  const Tensor& act = cache.layer_output(layer);
  const Tensor& grad = back.output_grads[layer];
  const std::size_t fh = act.dim(1), fw = act.dim(2), ch = act.dim(3);

  std::vector<double> weights(ch, 0.0);
  for (std::size_t p = 0; p < fh * fw; ++p)
    for (std::size_t c = 0; c < ch; ++c) weights[c] += grad[p * ch + c];
  for (auto& w : weights) w /= static_cast<double>(fh * fw);

  std::vector<double> cam(fh * fw, 0.0);
  double peak = 0.0;
  for (std::size_t p = 0; p < fh * fw; ++p) {
    double v = 0.0;
    for (std::size_t c = 0; c < ch; ++c) v += weights[c] * act[p * ch + c];
    cam[p] = std::max(v, 0.0);
    peak = std::max(peak, cam[p]);
  }
  if (peak > 0.0)
    for (auto& v : cam) v /= peak;

  Heatmap hm;
  hm.height = image.dim(0);
  hm.width = image.dim(1);
  hm.source = std::move(source);
  hm.score = score;
  hm.values.resize(hm.height * hm.width);
  for (std::size_t y = 0; y < hm.height; ++y) {
    const std::size_t sy = y * fh / hm.height;
    for (std::size_t x = 0; x < hm.width; ++x) hm.values[y * hm.width + x] = cam[sy * fw + x * fw / hm.width];
  }
  return hm;
}

Image8 heatmap_image(const Heatmap& hm) {
  Image8 img{hm.width, hm.height, 1, std::vector<std::uint8_t>(hm.values.size())};
  for (std::size_t i = 0; i < hm.values.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(hm.values[i], 0.0, 1.0) * 255.0));
  }
  return img;
}

Image8 heatmap_overlay(const Tensor& image, const Heatmap& hm, double opacity) {
  if (image.rank() != 3 || image.dim(0) != hm.height || image.dim(1) != hm.width) {
    throw ShapeError("heatmap_overlay: image and heatmap sizes differ");
  }
  const std::size_t ch = image.dim(2);
  Image8 img{hm.width, hm.height, 3, std::vector<std::uint8_t>(hm.width * hm.height * 3)};
  for (std::size_t p = 0; p < hm.width * hm.height; ++p) {
    double gray = 0.0;
    for (std::size_t c = 0; c < ch; ++c) gray += image[p * ch + c];
    gray = std::clamp(gray / static_cast<double>(ch), 0.0, 1.0);
    const double heat = hm.values[p] * opacity;
    const double rgb[3] = {gray * (1 - heat) + heat, gray * (1 - heat), gray * (1 - heat)};
    for (int c = 0; c < 3; ++c) img.pixels[p * 3 + c] = static_cast<std::uint8_t>(std::lround(rgb[c] * 255.0));
  }
  return img;
}

std::vector<RankedAuxClass> top_activating_aux(const Model& model, std::span<const Sample> aux_samples,
                                               const GroupLayout& layout, std::size_t top_classes,
                                               std::size_t top_instances) {
  if (model.spec.head_outputs() != layout.n() || model.spec.target_outputs() != layout.k) {
    throw InvalidArgument("top_activating_aux: model head does not match layout");
  }
  std::map<std::size_t, std::vector<RankedInstance>> per_class;
  for (std::size_t begin = 0; begin < aux_samples.size(); begin += kChunk) {
    const std::size_t end = std::min(aux_samples.size(), begin + kChunk);
    const Tensor probs = predict_proba(model, stack_features(aux_samples.subspan(begin, end - begin)));
    for (std::size_t i = begin; i < end; ++i) {
      if (aux_samples[i].group != Group::Auxiliary) throw InvalidArgument("top_activating_aux: expects auxiliary samples");
      const auto row = probs.row(i - begin);
      double mass = 0.0;
      for (std::size_t t = 0; t < layout.k; ++t) mass += row[t];
      per_class[aux_samples[i].class_index].push_back({i, mass});
    }
  }
  std::vector<RankedAuxClass> ranked;
  for (auto& [cls, items] : per_class) {
    RankedAuxClass r;
    r.class_index = cls;
    r.sample_count = items.size();
    double sum = 0.0;
    for (const auto& it : items) sum += it.score;
    r.score = sum / static_cast<double>(items.size());
    std::stable_sort(items.begin(), items.end(),
                     [](const RankedInstance& a, const RankedInstance& b) { return a.score > b.score; });
    r.truncated = top_instances > items.size();
    items.resize(std::min(items.size(), top_instances));
    r.top_instances = std::move(items);
    ranked.push_back(std::move(r));
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedAuxClass& a, const RankedAuxClass& b) { return a.score > b.score; });
  if (ranked.size() > top_classes) ranked.resize(top_classes);
  return ranked;
}

}  // namespace simlearn
