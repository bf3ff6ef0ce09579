#include "attnvgg/layers.hpp"

#include <cmath>

#include "attnvgg/error.hpp"

namespace attnvgg {

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)),
      value(std::move(value_)),
      grad(value.shape()),
      opt_state(value.shape()) {}

namespace nn {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_to_string(t.shape()));
  }
}

void check_conv_shapes(const Tensor& input, const Tensor& weights) {
  require_rank(input, 3, "conv2d input");
  require_rank(weights, 4, "conv2d weights");
  if (weights.extent(0) % 2 == 0 || weights.extent(1) % 2 == 0) {
    throw ShapeError("conv2d: kernel extents must be odd, got " +
                     shape_to_string(weights.shape()));
  }
  if (weights.extent(2) != input.extent(2)) {
    throw ShapeError("conv2d: input has " + std::to_string(input.extent(2)) +
                     " channels but weights " + shape_to_string(weights.shape()) + " expect " +
                     std::to_string(weights.extent(2)));
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  check_conv_shapes(input, weights);
  const std::size_t h = input.extent(0), w = input.extent(1), cin = input.extent(2);
  const std::size_t kh = weights.extent(0), kw = weights.extent(1), cout = weights.extent(3);
  if (bias.shape() != Shape{cout}) {
    throw ShapeError("conv2d: bias " + shape_to_string(bias.shape()) + " for " +
                     std::to_string(cout) + " filters");
  }
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);
  const double* x = input.data().data();
  const double* wt = weights.data().data();

  Tensor out({h, w, cout});
  double* y = out.data().data();
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double* dst = y + (i * w + j) * cout;
      for (std::size_t o = 0; o < cout; ++o) dst[o] = bias[o];
      for (std::size_t a = 0; a < kh; ++a) {
        const auto si = static_cast<std::ptrdiff_t>(i + a) - ph;
        if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t b = 0; b < kw; ++b) {
          const auto sj = static_cast<std::ptrdiff_t>(j + b) - pw;
          if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(w)) continue;
          const double* src = x + (static_cast<std::size_t>(si) * w + static_cast<std::size_t>(sj)) * cin;
          const double* tap = wt + (a * kw + b) * cin * cout;
          for (std::size_t c = 0; c < cin; ++c) {
            const double xv = src[c];
            const double* wrow = tap + c * cout;
            for (std::size_t o = 0; o < cout; ++o) dst[o] += xv * wrow[o];
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream) {
  check_conv_shapes(input, weights);
  const std::size_t h = input.extent(0), w = input.extent(1), cin = input.extent(2);
  const std::size_t kh = weights.extent(0), kw = weights.extent(1), cout = weights.extent(3);
  if (upstream.shape() != Shape{h, w, cout}) {
    throw ShapeError("conv2d backward: upstream " + shape_to_string(upstream.shape()) +
                     ", expected " + shape_to_string({h, w, cout}));
  }
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);

  Conv2dGrads g{Tensor(input.shape()), Tensor(weights.shape()), Tensor({cout})};
  const double* x = input.data().data();
  const double* wt = weights.data().data();
  const double* dy = upstream.data().data();
  double* dx = g.input.data().data();
  double* dw = g.weights.data().data();
  double* db = g.bias.data().data();

  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double* grad = dy + (i * w + j) * cout;
      for (std::size_t o = 0; o < cout; ++o) db[o] += grad[o];
      for (std::size_t a = 0; a < kh; ++a) {
        const auto si = static_cast<std::ptrdiff_t>(i + a) - ph;
        if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t b = 0; b < kw; ++b) {
          const auto sj = static_cast<std::ptrdiff_t>(j + b) - pw;
          if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(w)) continue;
          const std::size_t src_off =
              (static_cast<std::size_t>(si) * w + static_cast<std::size_t>(sj)) * cin;
          const double* src = x + src_off;
          double* dsrc = dx + src_off;
          const std::size_t tap_off = (a * kw + b) * cin * cout;
          for (std::size_t c = 0; c < cin; ++c) {
            const double xv = src[c];
            const double* wrow = wt + tap_off + c * cout;
            double* dwrow = dw + tap_off + c * cout;
            double acc = 0.0;
            for (std::size_t o = 0; o < cout; ++o) {
              dwrow[o] += xv * grad[o];
              acc += wrow[o] * grad[o];
            }
            dsrc[c] += acc;
          }
        }
      }
    }
  }
  return g;
}

Tensor maxpool2_forward(const Tensor& input, MaxPoolCache* cache) {
  require_rank(input, 3, "maxpool2");
  const std::size_t h = input.extent(0), w = input.extent(1), c = input.extent(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2: spatial extents must be even, got " +
                     shape_to_string(input.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out({oh, ow, c});
  if (cache) {
    cache->input_shape = input.shape();
    cache->argmax.assign(out.size(), 0);
  }
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      for (std::size_t k = 0; k < c; ++k) {
        std::size_t best = ((2 * i) * w + 2 * j) * c + k;
        for (std::size_t a = 0; a < 2; ++a) {
          for (std::size_t b = 0; b < 2; ++b) {
            const std::size_t idx = ((2 * i + a) * w + 2 * j + b) * c + k;
            if (input[idx] > input[best]) best = idx;  // strict: first max wins
          }
        }
        const std::size_t o = (i * ow + j) * c + k;
        out[o] = input[best];
        if (cache) cache->argmax[o] = best;
      }
    }
  }
  return out;
}

Tensor maxpool2_backward(const MaxPoolCache& cache, const Tensor& upstream) {
  if (upstream.size() != cache.argmax.size()) {
    throw ShapeError("maxpool2 backward: upstream " + shape_to_string(upstream.shape()) +
                     " does not match cached forward");
  }
  Tensor dx(cache.input_shape);
  for (std::size_t o = 0; o < upstream.size(); ++o) dx[cache.argmax[o]] += upstream[o];
  return dx;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Tensor activation_forward(const Tensor& input, Activation kind) {
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = kind == Activation::kRelu ? (input[i] > 0.0 ? input[i] : 0.0) : sigmoid(input[i]);
  }
  return out;
}

Tensor activation_backward(Activation kind, const Tensor& input, const Tensor& output,
                           const Tensor& upstream) {
  const Tensor& ref = kind == Activation::kRelu ? input : output;
  if (ref.shape() != upstream.shape()) {
    throw ShapeError("activation backward: upstream " + shape_to_string(upstream.shape()) +
                     " vs " + shape_to_string(ref.shape()));
  }
  Tensor dx(upstream.shape());
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    if (kind == Activation::kRelu) {
      dx[i] = input[i] > 0.0 ? upstream[i] : 0.0;
    } else {
      dx[i] = upstream[i] * output[i] * (1.0 - output[i]);
    }
  }
  return dx;
}

namespace {

void check_dense_shapes(const Tensor& input, const Tensor& weights) {
  require_rank(input, 1, "dense input");
  require_rank(weights, 2, "dense weights");
  if (weights.extent(0) != input.extent(0)) {
    throw ShapeError("dense: input length " + std::to_string(input.extent(0)) +
                     " does not match weights " + shape_to_string(weights.shape()));
  }
}

}  // namespace

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  check_dense_shapes(input, weights);
  const std::size_t n = weights.extent(0), m = weights.extent(1);
  if (bias.shape() != Shape{m}) {
    throw ShapeError("dense: bias " + shape_to_string(bias.shape()) + " for " +
                     std::to_string(m) + " outputs");
  }
  Tensor out = bias;
  for (std::size_t i = 0; i < n; ++i) {
    const double xv = input[i];
    const double* row = &weights.data()[i * m];
    for (std::size_t j = 0; j < m; ++j) out[j] += xv * row[j];
  }
  return out;
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream) {
  check_dense_shapes(input, weights);
  const std::size_t n = weights.extent(0), m = weights.extent(1);
  if (upstream.shape() != Shape{m}) {
    throw ShapeError("dense backward: upstream " + shape_to_string(upstream.shape()) +
                     " for " + std::to_string(m) + " outputs");
  }
  DenseGrads g{Tensor({n}), Tensor(weights.shape()), upstream};
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &weights.data()[i * m];
    double* grow = &g.weights[i * m];
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      grow[j] = input[i] * upstream[j];
      acc += row[j] * upstream[j];
    }
    g.input[i] = acc;
  }
  return g;
}

Tensor dropout_mask(const Shape& shape, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  Tensor mask(shape, 1.0);
  if (rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng.uniform01() < rate ? 0.0 : keep_scale;
  }
  return mask;
}

Tensor dropout_forward(const Tensor& input, double rate, bool training, Rng* rng,
                       Tensor* mask_out) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) {
    if (mask_out) *mask_out = Tensor(input.shape(), 1.0);
    return input;
  }
  if (!rng) throw StateError("dropout in training mode needs a generator");
  Tensor mask = dropout_mask(input.shape(), rate, *rng);
  Tensor out = mul(input, mask);
  if (mask_out) *mask_out = std::move(mask);
  return out;
}

Tensor dropout_backward(const Tensor& mask, const Tensor& upstream) { return mul(upstream, mask); }

Tensor global_avg_pool(const Tensor& input) {
  require_rank(input, 3, "global_avg_pool");
  const std::size_t hw = input.extent(0) * input.extent(1), c = input.extent(2);
  Tensor out({c});
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t k = 0; k < c; ++k) out[k] += input[p * c + k];
  }
  for (std::size_t k = 0; k < c; ++k) out[k] /= static_cast<double>(hw);
  return out;
}

Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& upstream) {
  if (input_shape.size() != 3 || upstream.shape() != Shape{input_shape[2]}) {
    throw ShapeError("global_avg_pool backward: upstream " + shape_to_string(upstream.shape()) +
                     " for input " + shape_to_string(input_shape));
  }
  const std::size_t hw = input_shape[0] * input_shape[1], c = input_shape[2];
  Tensor dx(input_shape);
  const double inv = 1.0 / static_cast<double>(hw);
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t k = 0; k < c; ++k) dx[p * c + k] = upstream[k] * inv;
  }
  return dx;
}

}  // namespace nn
}  // namespace attnvgg
