#include "attnvgg/optimizer.hpp"

#include <cmath>

#include "attnvgg/error.hpp"

namespace attnvgg {

void OptimizerConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be > 0");
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
  if (!(decay >= 0.0)) throw ConfigError("decay must be >= 0");
}

double lr_at(std::uint64_t epoch, const OptimizerConfig& config) {
  return config.lr0 / (1.0 + config.decay * static_cast<double>(epoch));
}

void rmsprop_step(Parameter& param, double lr, const OptimizerConfig& config) {
  auto value = param.value.data();
  auto grad = param.grad.data();
  auto v = param.opt_state.data();
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    v[i] = config.rho * v[i] + (1.0 - config.rho) * g * g;
    value[i] -= lr * g / (std::sqrt(v[i]) + config.eps);
  }
  param.zero_grad();
}

void rmsprop_step(std::span<Parameter* const> params, double lr, const OptimizerConfig& config) {
  for (Parameter* p : params) rmsprop_step(*p, lr, config);
}

}  // namespace attnvgg
