#include "attnvgg/gradcheck_suite.hpp"

#include <memory>

#include "attnvgg/attention.hpp"
#include "attnvgg/error.hpp"
#include "attnvgg/layers.hpp"
#include "attnvgg/losses.hpp"
#include "attnvgg/model.hpp"
#include "attnvgg/rng.hpp"

namespace attnvgg {

namespace {

Tensor uniform(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (double& v : t.data()) v = lo + (hi - lo) * rng.uniform01();
  return t;
}

// Uniform magnitude in [0.1, 1] with random sign; keeps ReLU kinks out of
// reach of the finite-difference step.
Tensor away_from_zero(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  for (double& v : t.data()) {
    const double m = 0.1 + 0.9 * rng.uniform01();
    v = rng.uniform01() < 0.5 ? -m : m;
  }
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct ConvState {
  Tensor x, w, b, up;
  nn::Conv2dGrads grads;
};

GradCheckUnit conv_unit(Rng& rng) {
  auto s = std::make_shared<ConvState>();
  s->x = uniform({5, 5, 2}, rng);
  s->w = uniform({3, 3, 2, 2}, rng);
  s->b = uniform({2}, rng);
  s->up = uniform({5, 5, 2}, rng);
  s->grads = {Tensor(s->x.shape()), Tensor(s->w.shape()), Tensor({2})};
  GradCheckUnit u;
  u.name = "conv2d";
  u.objective = [s] { return dot(s->up, nn::conv2d_forward(s->x, s->w, s->b)); };
  u.compute_analytic = [s] { s->grads = nn::conv2d_backward(s->x, s->w, s->up); };
  u.targets = {{"input", &s->x, &s->grads.input},
               {"weights", &s->w, &s->grads.weights},
               {"bias", &s->b, &s->grads.bias}};
  return u;
}

struct UnaryState {
  Tensor x, up, dx;
};

GradCheckUnit maxpool_unit(Rng& rng) {
  auto s = std::make_shared<UnaryState>();
  // Distinct entries: a shuffled ramp keeps every window free of ties.
  std::vector<double> ramp(4 * 4 * 2);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.1 * static_cast<double>(i);
  rng.shuffle(std::span<double>(ramp));
  s->x = Tensor({4, 4, 2}, ramp);
  s->up = uniform({2, 2, 2}, rng);
  s->dx = Tensor(s->x.shape());
  GradCheckUnit u;
  u.name = "maxpool2";
  u.objective = [s] { return dot(s->up, nn::maxpool2_forward(s->x)); };
  u.compute_analytic = [s] {
    nn::MaxPoolCache cache;
    nn::maxpool2_forward(s->x, &cache);
    s->dx = nn::maxpool2_backward(cache, s->up);
  };
  u.targets = {{"input", &s->x, &s->dx}};
  return u;
}

GradCheckUnit activation_unit(nn::Activation kind, Rng& rng) {
  auto s = std::make_shared<UnaryState>();
  s->x = kind == nn::Activation::kRelu ? away_from_zero({3, 3, 2}, rng) : uniform({3, 3, 2}, rng, -3, 3);
  s->up = uniform({3, 3, 2}, rng);
  s->dx = Tensor(s->x.shape());
  GradCheckUnit u;
  u.name = kind == nn::Activation::kRelu ? "relu" : "sigmoid";
  u.objective = [s, kind] { return dot(s->up, nn::activation_forward(s->x, kind)); };
  u.compute_analytic = [s, kind] {
    const Tensor y = nn::activation_forward(s->x, kind);
    s->dx = nn::activation_backward(kind, s->x, y, s->up);
  };
  u.targets = {{"input", &s->x, &s->dx}};
  return u;
}

struct DenseState {
  Tensor x, w, b, up;
  nn::DenseGrads grads;
};

GradCheckUnit dense_unit(Rng& rng) {
  auto s = std::make_shared<DenseState>();
  s->x = uniform({3}, rng);
  s->w = uniform({3, 2}, rng);
  s->b = uniform({2}, rng);
  s->up = uniform({2}, rng);
  s->grads = {Tensor({3}), Tensor({3, 2}), Tensor({2})};
  GradCheckUnit u;
  u.name = "dense";
  u.objective = [s] { return dot(s->up, nn::dense_forward(s->x, s->w, s->b)); };
  u.compute_analytic = [s] { s->grads = nn::dense_backward(s->x, s->w, s->up); };
  u.targets = {{"input", &s->x, &s->grads.input},
               {"weights", &s->w, &s->grads.weights},
               {"bias", &s->b, &s->grads.bias}};
  return u;
}

struct DropoutState {
  Tensor x, mask, up, dx;
};

GradCheckUnit dropout_unit(Rng& rng) {
  auto s = std::make_shared<DropoutState>();
  s->x = uniform({4, 4, 2}, rng);
  s->mask = nn::dropout_mask(s->x.shape(), 0.5, rng);  // frozen
  s->up = uniform(s->x.shape(), rng);
  s->dx = Tensor(s->x.shape());
  GradCheckUnit u;
  u.name = "dropout";
  u.objective = [s] { return dot(s->up, mul(s->x, s->mask)); };
  u.compute_analytic = [s] { s->dx = nn::dropout_backward(s->mask, s->up); };
  u.targets = {{"input", &s->x, &s->dx}};
  return u;
}

GradCheckUnit gap_unit(Rng& rng) {
  auto s = std::make_shared<UnaryState>();
  s->x = uniform({3, 4, 3}, rng);
  s->up = uniform({3}, rng);
  s->dx = Tensor(s->x.shape());
  GradCheckUnit u;
  u.name = "global_avg_pool";
  u.objective = [s] { return dot(s->up, nn::global_avg_pool(s->x)); };
  u.compute_analytic = [s] { s->dx = nn::global_avg_pool_backward(s->x.shape(), s->up); };
  u.targets = {{"input", &s->x, &s->dx}};
  return u;
}

GradCheckUnit resize_unit(Rng& rng) {
  auto s = std::make_shared<UnaryState>();
  s->x = uniform({3, 5, 2}, rng);
  s->up = uniform({7, 4, 2}, rng);
  s->dx = Tensor(s->x.shape());
  GradCheckUnit u;
  u.name = "bilinear_resize";
  u.objective = [s] { return dot(s->up, bilinear_resize(s->x, 7, 4)); };
  u.compute_analytic = [s] { s->dx = bilinear_resize_adjoint(s->up, 3, 5); };
  u.targets = {{"input", &s->x, &s->dx}};
  return u;
}

struct GateState {
  Tensor x, g, up;
  AttentionGateParams params;
  GateInputGrads grads;
};

GradCheckUnit gate_unit(Rng& rng) {
  auto s = std::make_shared<GateState>();
  s->x = uniform({6, 6, 3}, rng);
  s->g = uniform({3, 3, 3}, rng);
  s->up = uniform({6, 6, 3}, rng);
  s->params = AttentionGateParams::create(3, 3, 2, rng);
  // Rescale from the near-zero init so every path carries signal.
  for (Parameter* p : {&s->params.w_x, &s->params.w_g, &s->params.b_g, &s->params.psi,
                       &s->params.b_psi}) {
    p->value = uniform(p->value.shape(), rng);
  }
  GradCheckUnit u;
  u.name = "attention_gate";
  u.objective = [s] { return dot(s->up, attention_forward(s->x, s->g, s->params).gated); };
  u.compute_analytic = [s] {
    for (Parameter* p : {&s->params.w_x, &s->params.w_g, &s->params.b_g, &s->params.psi,
                         &s->params.b_psi}) {
      p->zero_grad();
    }
    GateCache cache;
    attention_forward(s->x, s->g, s->params, &cache);
    s->grads = attention_backward(cache, s->up, s->params);
  };
  u.targets = {{"x", &s->x, &s->grads.x},
               {"g", &s->g, &s->grads.g},
               {"W_x", &s->params.w_x.value, &s->params.w_x.grad},
               {"W_g", &s->params.w_g.value, &s->params.w_g.grad},
               {"b_g", &s->params.b_g.value, &s->params.b_g.grad},
               {"psi", &s->params.psi.value, &s->params.psi.grad},
               {"b_psi", &s->params.b_psi.value, &s->params.b_psi.grad}};
  return u;
}

struct LossState {
  double label = 0.0;
  Tensor prediction;
  Tensor grad;
  LossConfig config;
};

GradCheckUnit loss_unit(LossKind kind, Rng& rng) {
  auto s = std::make_shared<LossState>();
  s->label = rng.uniform01() < 0.5 ? 0.0 : 1.0;
  s->prediction = Tensor::vector({0.1 + 0.8 * rng.uniform01()});
  s->grad = Tensor({1});
  s->config.kind = kind;
  GradCheckUnit u;
  u.name = "loss_" + std::string(to_string(kind));
  u.objective = [s] { return loss_ensemble(s->label, s->prediction[0], s->config).value; };
  u.compute_analytic = [s] { s->grad[0] = loss_ensemble(s->label, s->prediction[0], s->config).grad; };
  u.targets = {{"prediction", &s->prediction, &s->grad}};
  return u;
}

struct ModelState {
  explicit ModelState(Model m) : model(std::move(m)) {}
  Model model;
  Tensor image;
  Tensor mask;
  double label = 0.0;
  LossConfig loss;
};

GradCheckUnit model_unit(bool attention, LossKind kind, Rng& rng) {
  ArchitectureSpec spec = ArchitectureSpec::vgg_tiny(attention);
  spec.height = 8;
  spec.width = 8;
  auto s = std::make_shared<ModelState>(Model::build(spec, rng.next_u64()));
  // Head and gate start near zero; widen them so gradients reach the backbone.
  for (Parameter* p : s->model.parameters()) {
    if (!is_backbone_parameter(p->name)) p->value = uniform(p->value.shape(), rng, -0.5, 0.5);
  }
  s->image = uniform({8, 8, 1}, rng, 0.0, 1.0);
  s->mask = nn::dropout_mask({spec.hidden_units}, spec.dropout_rate, rng);
  s->label = rng.uniform01() < 0.5 ? 0.0 : 1.0;
  s->loss.kind = kind;

  GradCheckUnit u;
  u.name = std::string(attention ? "model_attention_" : "model_plain_") + std::string(to_string(kind));
  auto predict = [s] {
    ForwardOptions opt;
    opt.training = true;
    opt.dropout_mask = &s->mask;
    return s->model.forward(s->image, opt);
  };
  u.objective = [s, predict] { return loss_ensemble(s->label, predict().prediction, s->loss).value; };
  u.compute_analytic = [s, predict] {
    s->model.zero_grad();
    ForwardResult fr = predict();
    s->model.backward(fr.cache, loss_ensemble(s->label, fr.prediction, s->loss).grad);
  };
  for (Parameter* p : s->model.parameters()) u.targets.push_back({p->name, &p->value, &p->grad});
  return u;
}

}  // namespace

std::vector<std::string> gradcheck_unit_names() {
  return {"conv2d",
          "maxpool2",
          "relu",
          "sigmoid",
          "dense",
          "dropout",
          "global_avg_pool",
          "bilinear_resize",
          "attention_gate",
          "loss_ce",
          "loss_logcosh",
          "loss_ce_logcosh",
          "model_attention_ce",
          "model_attention_logcosh",
          "model_attention_ce_logcosh",
          "model_plain_ce",
          "model_plain_logcosh",
          "model_plain_ce_logcosh"};
}

GradCheckUnit make_gradcheck_unit(const std::string& name, std::uint64_t seed) {
  Rng rng(seed);
  if (name == "conv2d") return conv_unit(rng);
  if (name == "maxpool2") return maxpool_unit(rng);
  if (name == "relu") return activation_unit(nn::Activation::kRelu, rng);
  if (name == "sigmoid") return activation_unit(nn::Activation::kSigmoid, rng);
  if (name == "dense") return dense_unit(rng);
  if (name == "dropout") return dropout_unit(rng);
  if (name == "global_avg_pool") return gap_unit(rng);
  if (name == "bilinear_resize") return resize_unit(rng);
  if (name == "attention_gate") return gate_unit(rng);
  for (LossKind kind : {LossKind::kCe, LossKind::kLogcosh, LossKind::kCeLogcosh}) {
    const std::string k(to_string(kind));
    if (name == "loss_" + k) return loss_unit(kind, rng);
    if (name == "model_attention_" + k) return model_unit(true, kind, rng);
    if (name == "model_plain_" + k) return model_unit(false, kind, rng);
  }
  throw ConfigError("unknown gradient-check unit '" + name + "'");
}

std::vector<GradCheckReport> run_gradcheck_suite(const GradcheckSuiteOptions& options) {
  std::vector<GradCheckReport> reports;
  for (const auto& name : gradcheck_unit_names()) {
    GradCheckUnit unit = make_gradcheck_unit(name, derive_seed(options.seed, reports.size()));
    if (name == options.corrupt_unit) {
      auto analytic = unit.compute_analytic;
      // The suite's units own their gradient storage, so writing through the
      // target pointer is well defined.
      auto* first = const_cast<Tensor*>(unit.targets.front().analytic);
      unit.compute_analytic = [analytic, first] {
        analytic();
        (*first)[0] += 1.0;
      };
    }
    reports.push_back(gradient_check(unit, options.tolerance));
  }
  return reports;
}

}  // namespace attnvgg
