#include "attnvgg/attention.hpp"

#include "attnvgg/error.hpp"

namespace attnvgg {

namespace {

Tensor normal_tensor(const Shape& shape, double stddev, Rng& rng) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

void check_inputs(const Tensor& x, const Tensor& g, const AttentionGateParams& params) {
  if (x.rank() != 3 || g.rank() != 3) {
    throw ShapeError("attention gate expects HxWxC inputs, got x " + shape_to_string(x.shape()) +
                     " and g " + shape_to_string(g.shape()));
  }
  if (x.extent(2) != params.input_channels()) {
    throw ShapeError("attention gate: x has " + std::to_string(x.extent(2)) +
                     " channels, W_x expects " + std::to_string(params.input_channels()));
  }
  if (g.extent(2) != params.gating_channels()) {
    throw ShapeError("attention gate: g has " + std::to_string(g.extent(2)) +
                     " channels, W_g expects " + std::to_string(params.gating_channels()));
  }
  if (x.extent(0) < g.extent(0) || x.extent(1) < g.extent(1)) {
    throw ShapeError("attention gate: gating grid " + shape_to_string(g.shape()) +
                     " is finer than input grid " + shape_to_string(x.shape()));
  }
}

}  // namespace

AttentionGateParams AttentionGateParams::create(std::size_t input_channels,
                                                std::size_t gating_channels,
                                                std::size_t intermediate_channels, Rng& rng,
                                                const std::string& prefix) {
  if (input_channels == 0 || gating_channels == 0 || intermediate_channels == 0) {
    throw ShapeError("attention gate channel counts must be >= 1");
  }
  constexpr double kStddev = 0.01;
  AttentionGateParams p;
  p.w_x = Parameter(prefix + ".W_x",
                    normal_tensor({1, 1, input_channels, intermediate_channels}, kStddev, rng));
  p.w_g = Parameter(prefix + ".W_g",
                    normal_tensor({1, 1, gating_channels, intermediate_channels}, kStddev, rng));
  p.b_g = Parameter(prefix + ".b_g", Tensor({intermediate_channels}));
  p.psi = Parameter(prefix + ".psi", normal_tensor({1, 1, intermediate_channels, 1}, kStddev, rng));
  p.b_psi = Parameter(prefix + ".b_psi", Tensor({1}));
  return p;
}

GateOutput attention_forward(const Tensor& x, const Tensor& g, const AttentionGateParams& params,
                             GateCache* cache) {
  check_inputs(x, g, params);
  const std::size_t h = x.extent(0), w = x.extent(1);
  const std::size_t hg = g.extent(0), wg = g.extent(1);
  const Tensor no_bias({params.intermediate_channels()});

  const Tensor x_proj =
      bilinear_resize(nn::conv2d_forward(x, params.w_x.value, no_bias), hg, wg);
  const Tensor g_proj = nn::conv2d_forward(g, params.w_g.value, params.b_g.value);
  Tensor joined = add(x_proj, g_proj);
  Tensor hidden = nn::relu(joined);
  const Tensor q = nn::conv2d_forward(hidden, params.psi.value, params.b_psi.value);

  GateOutput out;
  out.alpha_coarse = nn::sigmoid(q);
  out.alpha_fine = bilinear_resize(out.alpha_coarse, h, w);
  out.gated = mul(x, out.alpha_fine);

  if (cache) {
    cache->x = x;
    cache->g = g;
    cache->joined = std::move(joined);
    cache->hidden = std::move(hidden);
    cache->alpha_coarse = out.alpha_coarse;
    cache->alpha_fine = out.alpha_fine;
    cache->valid = true;
  }
  return out;
}

GateInputGrads attention_backward(GateCache& cache, const Tensor& upstream,
                                  AttentionGateParams& params) {
  if (!cache.valid) throw StateError("attention backward: cache is stale or was never filled");
  if (upstream.shape() != cache.x.shape()) {
    throw ShapeError("attention backward: upstream " + shape_to_string(upstream.shape()) +
                     " does not match cached input " + shape_to_string(cache.x.shape()));
  }
  check_inputs(cache.x, cache.g, params);
  if (cache.hidden.extent(2) != params.intermediate_channels()) {
    throw StateError("attention backward: cache was produced by a gate of different width");
  }
  cache.valid = false;

  const Tensor& x = cache.x;
  const std::size_t h = x.extent(0), w = x.extent(1), fx = x.extent(2);
  const std::size_t hg = cache.g.extent(0), wg = cache.g.extent(1);

  // gated = x * alpha_fine
  Tensor dx = mul(upstream, cache.alpha_fine);
  Tensor d_alpha_fine({h, w, 1});
  for (std::size_t p = 0; p < h * w; ++p) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fx; ++c) acc += upstream[p * fx + c] * x[p * fx + c];
    d_alpha_fine[p] = acc;
  }

  // alpha_fine = resize(alpha_coarse); alpha_coarse = sigmoid(q)
  const Tensor d_alpha_coarse = bilinear_resize_adjoint(d_alpha_fine, hg, wg);
  const Tensor dq = nn::activation_backward(nn::Activation::kSigmoid, cache.alpha_coarse,
                                            cache.alpha_coarse, d_alpha_coarse);

  // q = conv1x1(hidden; psi) + b_psi
  auto psi_grads = nn::conv2d_backward(cache.hidden, params.psi.value, dq);
  params.psi.grad.accumulate(psi_grads.weights);
  params.b_psi.grad.accumulate(psi_grads.bias);

  const Tensor d_joined = nn::activation_backward(nn::Activation::kRelu, cache.joined,
                                                  cache.hidden, psi_grads.input);

  // joined = resize(conv1x1(x; W_x)) + conv1x1(g; W_g) + b_g
  auto g_grads = nn::conv2d_backward(cache.g, params.w_g.value, d_joined);
  params.w_g.grad.accumulate(g_grads.weights);
  params.b_g.grad.accumulate(g_grads.bias);

  const Tensor d_x_proj = bilinear_resize_adjoint(d_joined, h, w);
  auto x_grads = nn::conv2d_backward(x, params.w_x.value, d_x_proj);
  params.w_x.grad.accumulate(x_grads.weights);
  dx.accumulate(x_grads.input);

  return {std::move(dx), std::move(g_grads.input)};
}

}  // namespace attnvgg
