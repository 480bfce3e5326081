#include "simlearn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "simlearn/errors.hpp"

namespace simlearn {

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  if (fan_in < 1 || fan_out < 1) throw InvalidArgument("glorot_uniform: fan_in and fan_out must be >= 1");
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

std::vector<double> glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::size_t count, Rng& rng) {
  const double limit = glorot_limit(fan_in, fan_out);
  std::vector<double> out(count);
  for (auto& v : out) v = rng.uniform(-limit, limit);
  return out;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (input.rank() != 2 || weights.rank() != 2 || bias.rank() != 1 || input.dim(1) != weights.dim(0) ||
      bias.dim(0) != weights.dim(1)) {
    throw ShapeError("dense_forward: incompatible shapes input " + shape_str(input.shape()) + ", weights " +
                     shape_str(weights.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const std::size_t batch = input.dim(0), p = weights.dim(0), q = weights.dim(1);
  Tensor out({batch, q});
  for (std::size_t b = 0; b < batch; ++b) {
    double* o = out.data() + b * q;
    std::copy(bias.data(), bias.data() + q, o);
    const double* x = input.data() + b * p;
    for (std::size_t i = 0; i < p; ++i) {
      const double xi = x[i];
      const double* w = weights.data() + i * q;
      for (std::size_t j = 0; j < q; ++j) o[j] += xi * w[j];
    }
  }
  return out;
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream) {
  if (input.rank() != 2 || weights.rank() != 2 || upstream.rank() != 2 || input.dim(1) != weights.dim(0) ||
      upstream.dim(0) != input.dim(0) || upstream.dim(1) != weights.dim(1)) {
    throw ShapeError("dense_backward: incompatible shapes");
  }
  const std::size_t batch = input.dim(0), p = weights.dim(0), q = weights.dim(1);
  DenseGrads g{Tensor({batch, p}), Tensor({p, q}), Tensor({q})};
  for (std::size_t b = 0; b < batch; ++b) {
    const double* dy = upstream.data() + b * q;
    const double* x = input.data() + b * p;
    double* dx = g.input.data() + b * p;
    for (std::size_t j = 0; j < q; ++j) g.bias[j] += dy[j];
    for (std::size_t i = 0; i < p; ++i) {
      const double* w = weights.data() + i * q;
      double* dw = g.weights.data() + i * q;
      const double xi = x[i];
      double acc = 0.0;
      for (std::size_t j = 0; j < q; ++j) {
        acc += w[j] * dy[j];
        dw[j] += xi * dy[j];
      }
      dx[i] = acc;
    }
  }
  return g;
}

namespace {

struct ConvGeometry {
  std::size_t batch, height, width, in_ch, kh, kw, out_ch, out_h, out_w, stride;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernels, std::size_t stride) {
  if (input.rank() != 4 || kernels.rank() != 4) throw ShapeError("conv2d: input and kernels must be rank 4");
  if (stride < 1) throw InvalidArgument("conv2d: stride must be >= 1");
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.height = input.dim(1);
  g.width = input.dim(2);
  g.in_ch = input.dim(3);
  g.kh = kernels.dim(0);
  g.kw = kernels.dim(1);
  g.out_ch = kernels.dim(3);
  g.stride = stride;
  if (kernels.dim(2) != g.in_ch) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernels.dim(2)) + " input channels, got " +
                     std::to_string(g.in_ch));
  }
  if (g.kh > g.height || g.kw > g.width || g.kh == 0 || g.kw == 0) {
    throw InvalidArgument("conv2d: kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                          " does not fit input " + std::to_string(g.height) + "x" + std::to_string(g.width));
  }
  g.out_h = (g.height - g.kh) / stride + 1;
  g.out_w = (g.width - g.kw) / stride + 1;
  return g;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride) {
  const ConvGeometry g = conv_geometry(input, kernels, stride);
  if (bias.rank() != 1 || bias.dim(0) != g.out_ch) throw ShapeError("conv2d_forward: bias length mismatch");
  Tensor out({g.batch, g.out_h, g.out_w, g.out_ch});
  const std::size_t row_stride = g.width * g.in_ch;
  for (std::size_t b = 0; b < g.batch; ++b) {
    const double* img = input.data() + b * g.height * row_stride;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        double* o = out.data() + ((b * g.out_h + oy) * g.out_w + ox) * g.out_ch;
        std::copy(bias.data(), bias.data() + g.out_ch, o);
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const double* in_row = img + (oy * stride + ky) * row_stride + ox * stride * g.in_ch;
          const double* k_row = kernels.data() + ky * g.kw * g.in_ch * g.out_ch;
          // The (kx, ci) pairs of one kernel row are contiguous in both input and kernels.
          const std::size_t span = g.kw * g.in_ch;
          for (std::size_t t = 0; t < span; ++t) {
            const double v = in_row[t];
            const double* w = k_row + t * g.out_ch;
            for (std::size_t co = 0; co < g.out_ch; ++co) o[co] += v * w[co];
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& upstream, std::size_t stride,
                            bool input_grad) {
  const ConvGeometry g = conv_geometry(input, kernels, stride);
  if (upstream.shape() != Shape{g.batch, g.out_h, g.out_w, g.out_ch}) {
    throw ShapeError("conv2d_backward: upstream shape " + shape_str(upstream.shape()) + " does not match output");
  }
  Conv2dGrads grads{input_grad ? Tensor(input.shape()) : Tensor(), Tensor(kernels.shape()), Tensor({g.out_ch})};
  const std::size_t row_stride = g.width * g.in_ch;
  const std::size_t span = g.kw * g.in_ch;
  for (std::size_t b = 0; b < g.batch; ++b) {
    const double* img = input.data() + b * g.height * row_stride;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        const double* dy = upstream.data() + ((b * g.out_h + oy) * g.out_w + ox) * g.out_ch;
        for (std::size_t co = 0; co < g.out_ch; ++co) grads.bias[co] += dy[co];
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const std::size_t offset = (oy * stride + ky) * row_stride + ox * stride * g.in_ch;
          const double* in_row = img + offset;
          const double* k_row = kernels.data() + ky * span * g.out_ch;
          double* dk_row = grads.kernels.data() + ky * span * g.out_ch;
          for (std::size_t t = 0; t < span; ++t) {
            const double v = in_row[t];
            double* dw = dk_row + t * g.out_ch;
            for (std::size_t co = 0; co < g.out_ch; ++co) dw[co] += v * dy[co];
          }
          if (!input_grad) continue;
          double* din_row = grads.input.data() + b * g.height * row_stride + offset;
          for (std::size_t t = 0; t < span; ++t) {
            const double* w = k_row + t * g.out_ch;
            double acc = 0.0;
            for (std::size_t co = 0; co < g.out_ch; ++co) acc += w[co] * dy[co];
            din_row[t] += acc;
          }
        }
      }
    }
  }
  return grads;
}

Tensor gap_forward(const Tensor& input) {
  if (input.rank() != 4) throw ShapeError("gap_forward: input must be [B x H x W x C]");
  const std::size_t batch = input.dim(0), hw = input.dim(1) * input.dim(2), ch = input.dim(3);
  if (hw == 0) throw ShapeError("gap_forward: empty spatial extent");
  Tensor out({batch, ch});
  const double inv = 1.0 / static_cast<double>(hw);
  for (std::size_t b = 0; b < batch; ++b) {
    double* o = out.data() + b * ch;
    const double* x = input.data() + b * hw * ch;
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t c = 0; c < ch; ++c) o[c] += x[p * ch + c];
    for (std::size_t c = 0; c < ch; ++c) o[c] *= inv;
  }
  return out;
}

Tensor gap_backward(const Shape& input_shape, const Tensor& upstream) {
  if (input_shape.size() != 4 || upstream.shape() != Shape{input_shape[0], input_shape[3]}) {
    throw ShapeError("gap_backward: upstream shape mismatch");
  }
  const std::size_t batch = input_shape[0], hw = input_shape[1] * input_shape[2], ch = input_shape[3];
  Tensor out(input_shape);
  const double inv = 1.0 / static_cast<double>(hw);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* dy = upstream.data() + b * ch;
    double* dx = out.data() + b * hw * ch;
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t c = 0; c < ch; ++c) dx[p * ch + c] = dy[c] * inv;
  }
  return out;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& upstream) {
  if (input.shape() != upstream.shape()) throw ShapeError("relu_backward: shape mismatch");
  Tensor out(upstream.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = input[i] > 0.0 ? upstream[i] : 0.0;
  return out;
}

DropoutResult dropout_forward(const Tensor& input, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("dropout rate must be in [0, 1)");
  DropoutResult r{input, Tensor(input.shape(), 1.0)};
  if (!training || rate == 0.0) return r;
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (rng.uniform() < rate) {
      r.mask[i] = 0.0;
      r.output[i] = 0.0;
    } else {
      r.output[i] = input[i] * scale;
    }
  }
  return r;
}

Tensor dropout_backward(const Tensor& mask, double rate, const Tensor& upstream, bool training) {
  if (mask.shape() != upstream.shape()) throw ShapeError("dropout_backward: shape mismatch");
  const double scale = (training && rate > 0.0) ? 1.0 / (1.0 - rate) : 1.0;
  Tensor out(upstream.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = upstream[i] * mask[i] * scale;
  return out;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax: logits must be [B x n]");
  Tensor out(logits.shape());
  const std::size_t n = logits.dim(1);
  for (std::size_t b = 0; b < logits.dim(0); ++b) {
    const double* z = logits.data() + b * n;
    double* p = out.data() + b * n;
    const double zmax = *std::max_element(z, z + n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = std::exp(z[i] - zmax);
      sum += p[i];
    }
    for (std::size_t i = 0; i < n; ++i) p[i] /= sum;
  }
  return out;
}

}  // namespace simlearn
