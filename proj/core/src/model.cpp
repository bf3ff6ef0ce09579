#include "attnvgg/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "attnvgg/error.hpp"

namespace attnvgg {

ArchitectureSpec ArchitectureSpec::vgg16(bool attention) {
  ArchitectureSpec s;
  s.name = "vgg16";
  s.height = 128;
  s.width = 128;
  s.channels = 3;
  s.conv_plan = {{2, 64}, {2, 128}, {3, 256}, {3, 512}, {3, 512}};
  s.attention_enabled = attention;
  s.tap_x = 13;
  s.tap_g = 18;
  return s;
}

ArchitectureSpec ArchitectureSpec::vgg_tiny(bool attention) {
  ArchitectureSpec s;
  s.name = "vgg_tiny";
  s.height = 32;
  s.width = 32;
  s.channels = 1;
  s.conv_plan = {{1, 8}, {1, 16}};
  s.attention_enabled = attention;
  s.tap_x = 3;
  s.tap_g = 4;
  return s;
}

ArchitectureSpec ArchitectureSpec::by_name(std::string_view name, bool attention) {
  if (name == "vgg16") return vgg16(attention);
  if (name == "vgg_tiny") return vgg_tiny(attention);
  throw ConfigError("unknown architecture '" + std::string(name) + "' (expected vgg16, vgg_tiny)");
}

void ArchitectureSpec::validate() const {
  auto fail = [this](const std::string& why) {
    throw ConfigError("architecture '" + name + "': " + why);
  };
  if (height == 0 || width == 0 || channels == 0) fail("input extents must be >= 1");
  if (conv_plan.empty()) fail("conv_plan must contain at least one block");
  std::size_t h = height, w = width;
  for (std::size_t b = 0; b < conv_plan.size(); ++b) {
    if (conv_plan[b].convs == 0 || conv_plan[b].channels == 0) {
      fail("block " + std::to_string(b + 1) + " needs >= 1 conv and >= 1 channel");
    }
    if (h % 2 != 0 || w % 2 != 0) {
      fail("input " + std::to_string(height) + "x" + std::to_string(width) +
           " is not divisible by 2 at pool of block " + std::to_string(b + 1));
    }
    h /= 2;
    w /= 2;
  }
  std::size_t last = 0;
  for (const auto& blk : conv_plan) last += blk.convs + 1;
  if (tap_g != last) {
    fail("tap_g (" + std::to_string(tap_g) + ") must address the last layer (" +
         std::to_string(last) + ")");
  }
  if (tap_x == 0 || tap_x >= tap_g) fail("tap_x must satisfy 1 <= tap_x < tap_g");
  if (hidden_units == 0) fail("head hidden units must be >= 1");
  if (output_units != 1) fail("head output units must be 1 (binary classifier)");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
}

std::vector<LayerInfo> enumerate_layers(const ArchitectureSpec& spec) {
  spec.validate();
  std::vector<LayerInfo> layers;
  Shape shape{spec.height, spec.width, spec.channels};
  layers.push_back({0, LayerKind::kInput, 0, 0, shape});
  for (std::size_t b = 0; b < spec.conv_plan.size(); ++b) {
    const auto& blk = spec.conv_plan[b];
    for (std::size_t k = 0; k < blk.convs; ++k) {
      shape = {shape[0], shape[1], blk.channels};
      layers.push_back({layers.size(), LayerKind::kConv, b + 1, k + 1, shape});
    }
    shape = {shape[0] / 2, shape[1] / 2, shape[2]};
    layers.push_back({layers.size(), LayerKind::kPool, b + 1, 0, shape});
  }
  return layers;
}

std::size_t gate_intermediate_channels(const ArchitectureSpec& spec) {
  const auto layers = enumerate_layers(spec);
  return std::max<std::size_t>(1, layers[spec.tap_x].output_shape[2] / 2);
}

std::size_t head_input_width(const ArchitectureSpec& spec) {
  const auto layers = enumerate_layers(spec);
  const std::size_t fg = layers[spec.tap_g].output_shape[2];
  return spec.attention_enabled ? layers[spec.tap_x].output_shape[2] + fg : fg;
}

namespace {

Tensor float_normal(const Shape& shape, double mean, double stddev, Rng& rng) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<double>(static_cast<float>(rng.normal(mean, stddev)));
  }
  return t;
}

void round_to_float(Parameter& p) {
  for (double& v : p.value.data()) v = static_cast<double>(static_cast<float>(v));
}

std::string conv_name(const LayerInfo& info) {
  return "block" + std::to_string(info.block) + "_conv" + std::to_string(info.position);
}

}  // namespace

Model Model::build(const ArchitectureSpec& spec, std::uint64_t seed) {
  Model m;
  m.spec_ = spec;
  m.seed_ = seed;
  m.layers_ = enumerate_layers(spec);
  m.conv_of_layer_.assign(m.layers_.size(), std::numeric_limits<std::size_t>::max());

  Rng rng(seed);
  std::size_t in_channels = spec.channels;
  for (const auto& info : m.layers_) {
    if (info.kind != LayerKind::kConv) continue;
    const std::size_t out_channels = info.output_shape[2];
    const double fan_in = 9.0 * static_cast<double>(in_channels);
    ConvLayer conv;
    conv.index = info.index;
    conv.weight = Parameter(conv_name(info) + ".weight",
                            float_normal({3, 3, in_channels, out_channels}, 0.0,
                                         std::sqrt(2.0 / fan_in), rng));
    conv.bias = Parameter(conv_name(info) + ".bias", Tensor({out_channels}));
    m.conv_of_layer_[info.index] = m.convs_.size();
    m.convs_.push_back(std::move(conv));
    in_channels = out_channels;
  }

  if (spec.attention_enabled) {
    const std::size_t fx = m.layers_[spec.tap_x].output_shape[2];
    const std::size_t fg = m.layers_[spec.tap_g].output_shape[2];
    m.gate_ = AttentionGateParams::create(fx, fg, gate_intermediate_channels(spec), rng);
    for (Parameter* p : {&m.gate_->w_x, &m.gate_->w_g, &m.gate_->b_g, &m.gate_->psi,
                         &m.gate_->b_psi}) {
      round_to_float(*p);
    }
  }

  const double head_mean = spec.head_init == HeadInit::kLiteral ? 1.0 : 0.0;
  const double head_stddev = spec.head_init == HeadInit::kLiteral ? 0.1 : 0.01;
  const std::size_t feat = head_input_width(spec);
  m.fc1_weight_ = Parameter("head.fc1.weight",
                            float_normal({feat, spec.hidden_units}, head_mean, head_stddev, rng));
  m.fc1_bias_ = Parameter("head.fc1.bias", Tensor({spec.hidden_units}));
  m.fc2_weight_ = Parameter("head.fc2.weight",
                            float_normal({spec.hidden_units, spec.output_units}, head_mean,
                                         head_stddev, rng));
  m.fc2_bias_ = Parameter("head.fc2.bias", Tensor({spec.output_units}));
  return m;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (auto& c : convs_) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  if (gate_) {
    for (Parameter* p : {&gate_->w_x, &gate_->w_g, &gate_->b_g, &gate_->psi, &gate_->b_psi}) {
      out.push_back(p);
    }
  }
  for (Parameter* p : {&fc1_weight_, &fc1_bias_, &fc2_weight_, &fc2_bias_}) out.push_back(p);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  auto mut = const_cast<Model*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

Parameter* Model::find_parameter(std::string_view name) {
  for (Parameter* p : parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

const Parameter* Model::find_parameter(std::string_view name) const {
  return const_cast<Model*>(this)->find_parameter(name);
}

void Model::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

ForwardResult Model::forward(const Tensor& image, const ForwardOptions& options) const {
  const Shape expected{spec_.height, spec_.width, spec_.channels};
  if (image.shape() != expected) {
    throw ShapeError("layer 0 (input): image " + shape_to_string(image.shape()) +
                     " does not match architecture input " + shape_to_string(expected));
  }

  ForwardResult result;
  ModelCache& cache = result.cache;
  cache.training = options.training;
  cache.activations.resize(layers_.size());
  cache.pre_relu.resize(layers_.size());
  cache.pools.resize(layers_.size());
  cache.activations[0] = image;

  for (std::size_t i = 1; i < layers_.size(); ++i) {
    const Tensor& in = cache.activations[i - 1];
    try {
      if (layers_[i].kind == LayerKind::kConv) {
        const ConvLayer& conv = convs_[conv_of_layer_[i]];
        cache.pre_relu[i] = nn::conv2d_forward(in, conv.weight.value, conv.bias.value);
        cache.activations[i] = nn::relu(cache.pre_relu[i]);
      } else {
        cache.activations[i] = nn::maxpool2_forward(in, &cache.pools[i]);
      }
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
    }
  }

  const Tensor& g = cache.activations[spec_.tap_g];
  if (gate_) {
    const Tensor& x = cache.activations[spec_.tap_x];
    const GateOutput gated = attention_forward(x, g, *gate_, &cache.gate);
    const Tensor a = nn::global_avg_pool(gated.gated);
    const Tensor b = nn::global_avg_pool(g);
    cache.feature = Tensor({a.size() + b.size()});
    std::copy(a.data().begin(), a.data().end(), cache.feature.data().begin());
    std::copy(b.data().begin(), b.data().end(), cache.feature.data().begin() + a.size());
  } else {
    cache.feature = nn::global_avg_pool(g);
  }

  cache.hidden_pre = nn::dense_forward(cache.feature, fc1_weight_.value, fc1_bias_.value);
  cache.hidden = nn::relu(cache.hidden_pre);
  if (options.training && options.dropout_mask) {
    if (options.dropout_mask->shape() != cache.hidden.shape()) {
      throw ShapeError("dropout mask " + shape_to_string(options.dropout_mask->shape()) +
                       " does not match head width " + shape_to_string(cache.hidden.shape()));
    }
    cache.dropout_mask = *options.dropout_mask;
    cache.dropped = mul(cache.hidden, cache.dropout_mask);
  } else {
    cache.dropped = nn::dropout_forward(cache.hidden, spec_.dropout_rate, options.training,
                                        options.rng, &cache.dropout_mask);
  }
  const Tensor logit = nn::dense_forward(cache.dropped, fc2_weight_.value, fc2_bias_.value);
  // Keep the score strictly inside (0, 1) even when the sigmoid saturates.
  cache.prediction =
      std::clamp(nn::sigmoid(logit[0]), std::numeric_limits<double>::min(), 1.0 - 0x1.0p-53);
  cache.valid = true;
  result.prediction = cache.prediction;
  return result;
}

double Model::predict(const Tensor& image) const { return forward(image).prediction; }

void Model::backward(ModelCache& cache, double dloss_dprediction) {
  if (!cache.valid) throw StateError("model backward: cache is missing or already consumed");
  if (!cache.training) throw StateError("model backward: cache comes from an evaluation pass");
  if (cache.activations.size() != layers_.size()) {
    throw StateError("model backward: cache belongs to a different architecture");
  }
  cache.valid = false;

  const double p = cache.prediction;
  const Tensor d_logit = Tensor::vector({dloss_dprediction * p * (1.0 - p)});

  auto fc2 = nn::dense_backward(cache.dropped, fc2_weight_.value, d_logit);
  fc2_weight_.grad.accumulate(fc2.weights);
  fc2_bias_.grad.accumulate(fc2.bias);
  const Tensor d_hidden = nn::dropout_backward(cache.dropout_mask, fc2.input);
  const Tensor d_hidden_pre =
      nn::activation_backward(nn::Activation::kRelu, cache.hidden_pre, cache.hidden, d_hidden);
  auto fc1 = nn::dense_backward(cache.feature, fc1_weight_.value, d_hidden_pre);
  fc1_weight_.grad.accumulate(fc1.weights);
  fc1_bias_.grad.accumulate(fc1.bias);

  const Tensor& g = cache.activations[spec_.tap_g];
  const std::size_t fg = g.extent(2);
  Tensor grad;  // gradient w.r.t. the activation of the current layer
  std::optional<Tensor> d_tap_x;
  if (gate_) {
    const Tensor& x = cache.activations[spec_.tap_x];
    const std::size_t fx = x.extent(2);
    Tensor d_gap_gated({fx}), d_gap_g({fg});
    std::copy_n(fc1.input.data().begin(), fx, d_gap_gated.data().begin());
    std::copy_n(fc1.input.data().begin() + fx, fg, d_gap_g.data().begin());
    const Tensor d_gated = nn::global_avg_pool_backward(x.shape(), d_gap_gated);
    GateInputGrads gate_grads = attention_backward(cache.gate, d_gated, *gate_);
    grad = nn::global_avg_pool_backward(g.shape(), d_gap_g);
    grad.accumulate(gate_grads.g);
    d_tap_x = std::move(gate_grads.x);
  } else {
    grad = nn::global_avg_pool_backward(g.shape(), fc1.input);
  }

  for (std::size_t i = spec_.tap_g; i >= 1; --i) {
    if (i == spec_.tap_x && d_tap_x) grad.accumulate(*d_tap_x);
    if (layers_[i].kind == LayerKind::kPool) {
      grad = nn::maxpool2_backward(cache.pools[i], grad);
    } else {
      ConvLayer& conv = convs_[conv_of_layer_[i]];
      const Tensor d_pre = nn::activation_backward(nn::Activation::kRelu, cache.pre_relu[i],
                                                   cache.activations[i], grad);
      auto cg = nn::conv2d_backward(cache.activations[i - 1], conv.weight.value, d_pre);
      conv.weight.grad.accumulate(cg.weights);
      conv.bias.grad.accumulate(cg.bias);
      if (i > 1) grad = std::move(cg.input);
    }
  }
}

}  // namespace attnvgg
