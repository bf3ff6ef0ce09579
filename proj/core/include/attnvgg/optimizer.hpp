#pragma once

#include <cstdint>
#include <span>

#include "attnvgg/layers.hpp"

namespace attnvgg {

struct OptimizerConfig {
  double lr0 = 2e-6;
  double decay = 1e-6;
  double rho = 0.9;
  double eps = 1e-7;

  void validate() const;
};

/// Inverse-time schedule lr0 / (1 + decay * epoch), epoch = epochs completed.
double lr_at(std::uint64_t epoch, const OptimizerConfig& config);

/// One RMSprop update; zeroes param.grad afterwards.
///   v <- rho v + (1 - rho) g^2
///   w <- w - lr g / (sqrt(v) + eps)
void rmsprop_step(Parameter& param, double lr, const OptimizerConfig& config);

void rmsprop_step(std::span<Parameter* const> params, double lr, const OptimizerConfig& config);

}  // namespace attnvgg
