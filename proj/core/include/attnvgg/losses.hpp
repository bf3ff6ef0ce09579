#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace attnvgg {

enum class LossKind { kCe, kLogcosh, kCeLogcosh };

std::string_view to_string(LossKind kind);
/// Parses "ce", "logcosh" or "ce_logcosh"; throws ConfigError otherwise.
LossKind parse_loss_kind(std::string_view token);

struct LossConfig {
  LossKind kind = LossKind::kCeLogcosh;
  double alpha = 0.5;  // weight of cross entropy
  double beta = 0.5;   // weight of log-cosh
  double clip_epsilon = 1e-7;

  /// Throws ConfigError on negative weights, alpha + beta == 0 for the
  /// ensemble, or a clip outside (0, 0.5).
  void validate() const;
};

struct LossValue {
  double value = 0.0;
  double grad = 0.0;  // d value / d prediction
};

/// Binary cross entropy, prediction clamped to [eps, 1 - eps]; the gradient
/// is evaluated at the clamped value.
LossValue loss_ce(double label, double prediction, double clip_epsilon = 1e-7);

/// ln(cosh(prediction - label)) via |e| + ln(1 + exp(-2|e|)) - ln 2.
LossValue loss_logcosh(double label, double prediction);

/// Dispatches on config.kind; the ensemble is alpha * CE + beta * log-cosh.
LossValue loss_ensemble(double label, double prediction, const LossConfig& config);

struct BatchLoss {
  double mean = 0.0;
  std::vector<double> grads;  // per-sample gradients already scaled by 1/batch
};

BatchLoss batch_loss(std::span<const double> labels, std::span<const double> predictions,
                     const LossConfig& config);

}  // namespace attnvgg
