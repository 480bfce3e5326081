#pragma once

#include <cstddef>

#include "simlearn/rng.hpp"
#include "simlearn/tensor.hpp"

// Stateless layer kernels: each forward has a matching backward that maps the
// upstream gradient to gradients of the inputs and parameters. All tensors are
// row-major; spatial tensors are NHWC.

namespace simlearn {

/// Glorot/Xavier uniform draw of `count` values from [-L, L], L = sqrt(6 / (fan_in + fan_out)).
std::vector<double> glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::size_t count, Rng& rng);
double glorot_limit(std::size_t fan_in, std::size_t fan_out);

// dense: out = input . weights + bias, input [B x p], weights [p x q], bias [q].

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};
DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream);

// conv2d: valid cross-correlation. input [B x H x W x Cin], kernels [kh x kw x Cin x Cout], bias [Cout].

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride = 1);

struct Conv2dGrads {
  Tensor input;
  Tensor kernels;
  Tensor bias;
};
/// With `input_grad == false` the returned input gradient is left empty.
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& upstream, std::size_t stride = 1,
                            bool input_grad = true);

// global average pooling: [B x H x W x C] -> [B x C]

Tensor gap_forward(const Tensor& input);
Tensor gap_backward(const Shape& input_shape, const Tensor& upstream);

Tensor relu_forward(const Tensor& input);
/// Gradient passes where the forward input was strictly positive.
Tensor relu_backward(const Tensor& input, const Tensor& upstream);

/// Inverted dropout. `mask` holds 1 for kept units and 0 for dropped ones;
/// kept units are scaled by 1 / (1 - rate). In inference mode the mask is all ones.
struct DropoutResult {
  Tensor output;
  Tensor mask;
};
DropoutResult dropout_forward(const Tensor& input, double rate, Rng& rng, bool training);
Tensor dropout_backward(const Tensor& mask, double rate, const Tensor& upstream, bool training);

/// Row-wise softmax with max subtraction.
Tensor softmax(const Tensor& logits);

}  // namespace simlearn
