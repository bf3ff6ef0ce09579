#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "attnvgg/rng.hpp"
#include "attnvgg/tensor.hpp"

namespace attnvgg {

/// A learnable tensor with its gradient accumulator and RMSprop state.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;       // accumulated by backward passes, zeroed by the optimizer
  Tensor opt_state;  // RMSprop second-moment estimate

  void zero_grad() { grad.fill(0.0); }
};

namespace nn {

// Convolution: stride 1, zero "same" padding, odd kernel extents.
// Weights are kh x kw x Cin x Cout, bias Cout.

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct Conv2dGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream);

// 2x2 max pooling with stride 2. Ties go to the first window position in
// row-major scan order.

struct MaxPoolCache {
  Shape input_shape;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

Tensor maxpool2_forward(const Tensor& input, MaxPoolCache* cache = nullptr);
Tensor maxpool2_backward(const MaxPoolCache& cache, const Tensor& upstream);

enum class Activation { kRelu, kSigmoid };

Tensor activation_forward(const Tensor& input, Activation kind);
/// `input` is the pre-activation, `output` the forward result; ReLU reads the
/// former (derivative 0 at exactly 0), sigmoid the latter.
Tensor activation_backward(Activation kind, const Tensor& input, const Tensor& output,
                           const Tensor& upstream);

inline Tensor relu(const Tensor& t) { return activation_forward(t, Activation::kRelu); }
inline Tensor sigmoid(const Tensor& t) { return activation_forward(t, Activation::kSigmoid); }
double sigmoid(double z);

// Dense: out = input^T . weights + bias, weights n x m.

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream);

/// Inverted dropout mask: each entry is 0 with probability `rate`, otherwise
/// 1 / (1 - rate).
Tensor dropout_mask(const Shape& shape, double rate, Rng& rng);

/// Applies dropout. In evaluation mode, or rate 0, this is the identity and
/// `mask_out` (if given) receives all ones.
Tensor dropout_forward(const Tensor& input, double rate, bool training, Rng* rng,
                       Tensor* mask_out = nullptr);
Tensor dropout_backward(const Tensor& mask, const Tensor& upstream);

/// Per-channel mean over H x W.
Tensor global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& upstream);

}  // namespace nn
}  // namespace attnvgg
