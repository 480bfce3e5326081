#include "simlearn/model.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "simlearn/errors.hpp"
#include "simlearn/layers.hpp"

namespace simlearn {

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::GlobalAvgPool: return "gap";
    case LayerKind::Dense: return "dense";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Head: return "head";
  }
  return "?";
}

LayerSpec LayerSpec::conv2d(std::size_t channels, std::size_t kernel, std::size_t stride) {
  LayerSpec l{LayerKind::Conv2d};
  l.units = channels;
  l.kernel = kernel;
  l.stride = stride;
  return l;
}

LayerSpec LayerSpec::dense(std::size_t units) {
  LayerSpec l{LayerKind::Dense};
  l.units = units;
  return l;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec l{LayerKind::Dropout};
  l.rate = rate;
  return l;
}

LayerSpec LayerSpec::head(std::size_t target_outputs, std::size_t aux_outputs) {
  LayerSpec l{LayerKind::Head};
  l.units = target_outputs;
  l.aux_units = aux_outputs;
  return l;
}

std::vector<Shape> ModelSpec::output_shapes() const {
  std::vector<Shape> out;
  Shape cur = input;
  if (cur.empty() || shape_size(cur) == 0) throw InvalidArgument("model input shape must be non-empty");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + std::string(layer_kind_name(l.kind)) + ")";
    switch (l.kind) {
      case LayerKind::Conv2d: {
        if (cur.size() != 3) throw InvalidArgument(where + ": conv2d needs a spatial [H x W x C] input");
        if (l.units < 1 || l.kernel < 1 || l.stride < 1) throw InvalidArgument(where + ": invalid conv parameters");
        if (l.kernel > cur[0] || l.kernel > cur[1]) throw InvalidArgument(where + ": kernel larger than input");
        cur = Shape{(cur[0] - l.kernel) / l.stride + 1, (cur[1] - l.kernel) / l.stride + 1, l.units};
        break;
      }
      case LayerKind::Relu:
      case LayerKind::Dropout:
        if (l.kind == LayerKind::Dropout && !(l.rate >= 0.0 && l.rate < 1.0)) {
          throw InvalidArgument(where + ": dropout rate must be in [0, 1)");
        }
        break;
      case LayerKind::GlobalAvgPool:
        if (cur.size() != 3) throw InvalidArgument(where + ": global average pooling needs a spatial input");
        cur = Shape{cur[2]};
        break;
      case LayerKind::Dense:
        if (cur.size() != 1) throw InvalidArgument(where + ": dense needs a flat input");
        if (l.units < 1) throw InvalidArgument(where + ": dense width must be >= 1");
        cur = Shape{l.units};
        break;
      case LayerKind::Head:
        if (cur.size() != 1) throw InvalidArgument(where + ": head needs a flat input");
        if (l.units < 1) throw InvalidArgument(where + ": head needs k >= 1 target outputs");
        cur = Shape{l.units + l.aux_units};
        break;
    }
    out.push_back(cur);
  }
  return out;
}

void ModelSpec::validate() const {
  std::size_t heads = 0;
  for (const auto& l : layers) heads += l.kind == LayerKind::Head ? 1 : 0;
  if (heads != 1) throw InvalidArgument("model must have exactly one head layer, found " + std::to_string(heads));
  if (layers.back().kind != LayerKind::Head) throw InvalidArgument("head layer must be last");
  (void)output_shapes();
}

std::size_t ModelSpec::head_index() const {
  if (layers.empty() || layers.back().kind != LayerKind::Head) throw InvalidState("model has no head layer");
  return layers.size() - 1;
}

std::size_t ModelSpec::n1() const {
  for (const auto& l : layers)
    if (l.kind == LayerKind::Dense) return l.units;
  return 0;
}

std::size_t ModelSpec::n2() const {
  const auto shapes = output_shapes();
  const std::size_t h = head_index();
  return h == 0 ? shape_size(input) : shape_size(shapes[h - 1]);
}

std::string ModelSpec::to_text() const {
  std::ostringstream os;
  os << "simlearn-model 1\ninput";
  for (auto d : input) os << ' ' << d;
  os << '\n';
  for (const auto& l : layers) {
    os << layer_kind_name(l.kind);
    switch (l.kind) {
      case LayerKind::Conv2d: os << ' ' << l.units << ' ' << l.kernel << ' ' << l.stride; break;
      case LayerKind::Dense: os << ' ' << l.units; break;
      case LayerKind::Head: os << ' ' << l.units << ' ' << l.aux_units; break;
      case LayerKind::Dropout: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", l.rate);
        os << ' ' << buf;
        break;
      }
      default: break;
    }
    os << '\n';
  }
  return os.str();
}

ModelSpec ModelSpec::from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "simlearn-model 1") {
    throw FormatError("model spec: expected header 'simlearn-model 1'");
  }
  ModelSpec spec;
  std::size_t lineno = 1;
  auto fail = [&](const std::string& msg) -> FormatError {
    return FormatError("model spec line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "input") {
      std::size_t d;
      while (ls >> d) spec.input.push_back(d);
    } else if (kind == "conv2d") {
      std::size_t c, k, s;
      if (!(ls >> c >> k >> s)) throw fail("conv2d needs channels kernel stride");
      spec.layers.push_back(LayerSpec::conv2d(c, k, s));
    } else if (kind == "relu") {
      spec.layers.push_back(LayerSpec::relu());
    } else if (kind == "gap") {
      spec.layers.push_back(LayerSpec::global_avg_pool());
    } else if (kind == "dense") {
      std::size_t u;
      if (!(ls >> u)) throw fail("dense needs a width");
      spec.layers.push_back(LayerSpec::dense(u));
    } else if (kind == "dropout") {
      std::string r;
      if (!(ls >> r)) throw fail("dropout needs a rate");
      double rate = 0.0;
      auto res = std::from_chars(r.data(), r.data() + r.size(), rate);
      if (res.ec != std::errc{}) throw fail("bad dropout rate '" + r + "'");
      spec.layers.push_back(LayerSpec::dropout(rate));
    } else if (kind == "head") {
      std::size_t k, m;
      if (!(ls >> k >> m)) throw fail("head needs k m");
      spec.layers.push_back(LayerSpec::head(k, m));
    } else {
      throw fail("unknown layer kind '" + kind + "'");
    }
  }
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("model spec invalid: ") + e.what());
  }
  return spec;
}

ModelSpec make_classifier(const ClassifierShape& s) {
  if (s.conv_channels.size() != s.conv_kernels.size() || s.conv_channels.size() != s.conv_strides.size()) {
    throw InvalidArgument("conv_channels, conv_kernels and conv_strides must have equal length");
  }
  if (s.n1 < 1 || s.n2 < 1) throw InvalidArgument("n1 and n2 must be >= 1");
  ModelSpec spec;
  spec.input = s.input;
  for (std::size_t i = 0; i < s.conv_channels.size(); ++i) {
    spec.layers.push_back(LayerSpec::conv2d(s.conv_channels[i], s.conv_kernels[i], s.conv_strides[i]));
    spec.layers.push_back(LayerSpec::relu());
  }
  spec.layers.push_back(LayerSpec::global_avg_pool());
  for (std::size_t width : {s.n1, s.n2}) {
    spec.layers.push_back(LayerSpec::dense(width));
    spec.layers.push_back(LayerSpec::relu());
    if (s.dropout > 0.0) spec.layers.push_back(LayerSpec::dropout(s.dropout));
  }
  spec.layers.push_back(LayerSpec::head(s.k, s.m));
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// ParameterStore

void ParameterStore::add(std::string name, Tensor value) {
  if (contains(name)) throw InvalidArgument("duplicate parameter '" + name + "'");
  entries_.push_back({std::move(name), std::move(value)});
}

Tensor& ParameterStore::get(const std::string& name) {
  for (auto& e : entries_)
    if (e.name == name) return e.value;
  throw InvalidArgument("no parameter named '" + name + "'");
}

const Tensor& ParameterStore::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.value;
  throw InvalidArgument("no parameter named '" + name + "'");
}

bool ParameterStore::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const ParamArray& e) { return e.name == name; });
}

std::size_t ParameterStore::total_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

ParameterStore ParameterStore::zeros_like() const {
  ParameterStore out;
  for (const auto& e : entries_) out.entries_.push_back({e.name, Tensor(e.value.shape())});
  return out;
}

std::string weight_name(std::size_t layer) { return "layer" + std::to_string(layer) + ".weight"; }
std::string bias_name(std::size_t layer) { return "layer" + std::to_string(layer) + ".bias"; }

namespace {

struct ParamShapes {
  Shape weight;
  Shape bias;
  std::size_t fan_in;
  std::size_t fan_out;
};

ParamShapes param_shapes(const LayerSpec& l, const Shape& in) {
  switch (l.kind) {
    case LayerKind::Conv2d:
      return {{l.kernel, l.kernel, in[2], l.units}, {l.units}, l.kernel * l.kernel * in[2], l.kernel * l.kernel * l.units};
    case LayerKind::Dense: return {{in[0], l.units}, {l.units}, in[0], l.units};
    case LayerKind::Head: {
      const std::size_t n = l.units + l.aux_units;
      return {{in[0], n}, {n}, in[0], n};
    }
    default: throw InvalidState("layer has no parameters");
  }
}

}  // namespace

Model Model::initialize(ModelSpec spec, Rng& rng) {
  spec.validate();
  const auto shapes = spec.output_shapes();
  Model model{std::move(spec), {}};
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    const auto& l = model.spec.layers[i];
    if (!l.trainable()) continue;
    const Shape& in = i == 0 ? model.spec.input : shapes[i - 1];
    const ParamShapes ps = param_shapes(l, in);
    model.params.add(weight_name(i),
                     Tensor(ps.weight, glorot_uniform(ps.fan_in, ps.fan_out, shape_size(ps.weight), rng)));
    model.params.add(bias_name(i), Tensor(ps.bias));
  }
  return model;
}

void check_parameters(const ModelSpec& spec, const ParameterStore& params) {
  const auto shapes = spec.output_shapes();
  std::size_t expected = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (!l.trainable()) continue;
    const ParamShapes ps = param_shapes(l, i == 0 ? spec.input : shapes[i - 1]);
    if (!params.contains(weight_name(i)) || !params.contains(bias_name(i))) {
      throw InvalidArgument("missing parameters for layer " + std::to_string(i));
    }
    if (params.get(weight_name(i)).shape() != ps.weight || params.get(bias_name(i)).shape() != ps.bias) {
      throw ShapeError("parameter shape mismatch for layer " + std::to_string(i));
    }
    expected += 2;
  }
  if (params.entries().size() != expected) throw InvalidArgument("parameter store has unexpected entries");
}

// ---------------------------------------------------------------------------
// forward / backward

ForwardCache model_forward(const Model& model, const Tensor& input, bool training, Rng* rng) {
  const ModelSpec& spec = model.spec;
  Shape expected{input.rank() ? input.dim(0) : 0};
  expected.insert(expected.end(), spec.input.begin(), spec.input.end());
  if (input.shape() != expected) {
    throw ShapeError("model input " + shape_str(input.shape()) + " does not match expected " + shape_str(expected));
  }
  ForwardCache cache;
  cache.training = training;
  cache.activations.reserve(spec.layers.size() + 1);
  cache.dropout_masks.resize(spec.layers.size());
  cache.activations.push_back(input);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const Tensor& x = cache.activations.back();
    Tensor y;
    switch (l.kind) {
      case LayerKind::Conv2d:
        y = conv2d_forward(x, model.params.get(weight_name(i)), model.params.get(bias_name(i)), l.stride);
        break;
      case LayerKind::Relu: y = relu_forward(x); break;
      case LayerKind::GlobalAvgPool: y = gap_forward(x); break;
      case LayerKind::Dense:
      case LayerKind::Head:
        y = dense_forward(x, model.params.get(weight_name(i)), model.params.get(bias_name(i)));
        break;
      case LayerKind::Dropout: {
        const bool active = training && l.rate > 0.0;
        if (active && rng == nullptr) throw InvalidArgument("training with dropout requires an rng");
        Rng unused;
        auto r = dropout_forward(x, l.rate, active ? *rng : unused, active);
        y = std::move(r.output);
        cache.dropout_masks[i] = std::move(r.mask);
        break;
      }
    }
    cache.activations.push_back(std::move(y));
  }
  cache.probabilities = softmax(cache.activations.back());
  return cache;
}

BackwardResult model_backward(const Model& model, const ForwardCache& cache, const Tensor& logit_grad,
                              bool keep_output_grads) {
  const ModelSpec& spec = model.spec;
  if (cache.activations.size() != spec.layers.size() + 1) throw InvalidArgument("forward cache does not match model");
  if (logit_grad.shape() != cache.logits().shape()) throw ShapeError("logit gradient shape mismatch");
  BackwardResult result{model.params.zeros_like(), {}};
  if (keep_output_grads) result.output_grads.resize(spec.layers.size());
  Tensor grad = logit_grad;
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const LayerSpec& l = spec.layers[li];
    const Tensor& x = cache.activations[li];
    if (keep_output_grads) result.output_grads[li] = grad;
    switch (l.kind) {
      case LayerKind::Conv2d: {
        // The gradient w.r.t. the model input is never consumed.
        auto g = conv2d_backward(x, model.params.get(weight_name(li)), grad, l.stride, li != 0);
        result.grads.get(weight_name(li)) = std::move(g.kernels);
        result.grads.get(bias_name(li)) = std::move(g.bias);
        grad = std::move(g.input);
        break;
      }
      case LayerKind::Relu: grad = relu_backward(x, grad); break;
      case LayerKind::GlobalAvgPool: grad = gap_backward(x.shape(), grad); break;
      case LayerKind::Dense:
      case LayerKind::Head: {
        auto g = dense_backward(x, model.params.get(weight_name(li)), grad);
        result.grads.get(weight_name(li)) = std::move(g.weights);
        result.grads.get(bias_name(li)) = std::move(g.bias);
        grad = std::move(g.input);
        break;
      }
      case LayerKind::Dropout:
        grad = dropout_backward(cache.dropout_masks[li], l.rate, grad, cache.training);
        break;
    }
  }
  return result;
}

Tensor predict_proba(const Model& model, const Tensor& inputs, std::size_t chunk) {
  if (inputs.rank() == 0) throw ShapeError("predict_proba: empty input");
  const std::size_t n = inputs.dim(0);
  Tensor out({n, model.spec.head_outputs()});
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    auto cache = model_forward(model, inputs.slice_rows(begin, end), false);
    std::copy(cache.probabilities.storage().begin(), cache.probabilities.storage().end(),
              out.data() + begin * out.dim(1));
  }
  return out;
}

Model extend_multi_group(const Model& model, std::size_t m, Rng& rng) {
  if (m < 1) throw InvalidArgument("extend_multi_group: m must be >= 1");
  const std::size_t h = model.spec.head_index();
  const LayerSpec& head = model.spec.layers[h];
  if (head.aux_units != 0) throw InvalidState("extend_multi_group: head already has auxiliary outputs");
  const std::size_t k = head.units;
  const Tensor& w = model.params.get(weight_name(h));
  const Tensor& b = model.params.get(bias_name(h));
  const std::size_t n2 = w.dim(0);
  const std::size_t n = k + m;

  const auto fresh = glorot_uniform(n2, n, n2 * m, rng);
  Tensor w2({n2, n});
  Tensor b2({n});
  for (std::size_t r = 0; r < n2; ++r) {
    for (std::size_t c = 0; c < k; ++c) w2.at(r, c) = w.at(r, c);
    for (std::size_t c = 0; c < m; ++c) w2.at(r, k + c) = fresh[r * m + c];
  }
  for (std::size_t c = 0; c < k; ++c) b2[c] = b[c];

  Model out = model;
  out.spec.layers[h].aux_units = m;
  out.params.get(weight_name(h)) = std::move(w2);
  out.params.get(bias_name(h)) = std::move(b2);
  return out;
}

Model strip_auxiliary_head(const Model& model) {
  const std::size_t h = model.spec.head_index();
  const LayerSpec& head = model.spec.layers[h];
  if (head.aux_units == 0) throw InvalidState("strip_auxiliary_head: model has no auxiliary outputs");
  const std::size_t k = head.units;
  const Tensor& w = model.params.get(weight_name(h));
  const Tensor& b = model.params.get(bias_name(h));
  const std::size_t n2 = w.dim(0);
  Tensor w2({n2, k});
  Tensor b2({k});
  for (std::size_t r = 0; r < n2; ++r)
    for (std::size_t c = 0; c < k; ++c) w2.at(r, c) = w.at(r, c);
  for (std::size_t c = 0; c < k; ++c) b2[c] = b[c];

  Model out = model;
  out.spec.layers[h].aux_units = 0;
  out.params.get(weight_name(h)) = std::move(w2);
  out.params.get(bias_name(h)) = std::move(b2);
  return out;
}

std::optional<std::size_t> last_conv_layer(const ModelSpec& spec) {
  for (std::size_t i = spec.layers.size(); i-- > 0;)
    if (spec.layers[i].kind == LayerKind::Conv2d) return i;
  return std::nullopt;
}

void copy_feature_parameters(const Model& source, Model& target) {
  const std::size_t head = target.spec.head_index();
  if (source.spec.input != target.spec.input || source.spec.head_index() != head) {
    throw InvalidArgument("copy_feature_parameters: models differ below the head");
  }
  for (std::size_t i = 0; i < head; ++i) {
    const auto& a = source.spec.layers[i];
    const auto& b = target.spec.layers[i];
    if (a.kind != b.kind || a.units != b.units || a.kernel != b.kernel || a.stride != b.stride) {
      throw InvalidArgument("copy_feature_parameters: layer " + std::to_string(i) + " differs");
    }
    if (!a.trainable()) continue;
    target.params.get(weight_name(i)) = source.params.get(weight_name(i));
    target.params.get(bias_name(i)) = source.params.get(bias_name(i));
  }
}

}  // namespace simlearn
