#pragma once

#include <cstddef>
#include <string>

#include "attnvgg/layers.hpp"
#include "attnvgg/rng.hpp"
#include "attnvgg/tensor.hpp"

namespace attnvgg {

/// Learnable pieces of the soft attention gate:
///   q     = psi^T relu(W_x^T x + W_g^T g + b_g) + b_psi
///   alpha = sigmoid(q)
/// All projections are 1x1 convolutions; W_x carries no bias.
struct AttentionGateParams {
  Parameter w_x;    // 1 x 1 x F_x x F_int
  Parameter w_g;    // 1 x 1 x F_g x F_int
  Parameter b_g;    // F_int
  Parameter psi;    // 1 x 1 x F_int x 1
  Parameter b_psi;  // 1

  /// Weights from N(0, 0.01^2), biases zero. Names are `prefix.W_x` etc.
  static AttentionGateParams create(std::size_t input_channels, std::size_t gating_channels,
                                    std::size_t intermediate_channels, Rng& rng,
                                    const std::string& prefix = "gate");

  std::size_t input_channels() const { return w_x.value.extent(2); }
  std::size_t gating_channels() const { return w_g.value.extent(2); }
  std::size_t intermediate_channels() const { return w_x.value.extent(3); }
};

struct GateOutput {
  Tensor gated;         // x scaled per pixel by alpha_fine, H x W x F_x
  Tensor alpha_fine;    // H x W x 1
  Tensor alpha_coarse;  // Hg x Wg x 1
};

/// Intermediate maps kept for one backward call.
struct GateCache {
  Tensor x;
  Tensor g;
  Tensor joined;  // pre-ReLU sum on the gating grid
  Tensor hidden;  // post-ReLU
  Tensor alpha_coarse;
  Tensor alpha_fine;
  bool valid = false;
};

/// Gate forward pass on the gating grid: x is projected and resampled down to
/// g's grid, joined with the projected g, and the resulting coefficients are
/// resampled back up to x's grid.
GateOutput attention_forward(const Tensor& x, const Tensor& g, const AttentionGateParams& params,
                             GateCache* cache = nullptr);

struct GateInputGrads {
  Tensor x;
  Tensor g;
};

/// Backpropagates `upstream` (gradient on the gated map), accumulating into
/// the five parameter grads and returning the input gradients. Consumes the
/// cache; a second call with the same cache throws StateError.
GateInputGrads attention_backward(GateCache& cache, const Tensor& upstream,
                                  AttentionGateParams& params);

}  // namespace attnvgg
