#include "attnvgg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "attnvgg/error.hpp"

namespace attnvgg {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCe: return "ce";
    case LossKind::kLogcosh: return "logcosh";
    case LossKind::kCeLogcosh: return "ce_logcosh";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view token) {
  if (token == "ce") return LossKind::kCe;
  if (token == "logcosh") return LossKind::kLogcosh;
  if (token == "ce_logcosh") return LossKind::kCeLogcosh;
  throw ConfigError("unknown loss '" + std::string(token) + "' (expected ce, logcosh, ce_logcosh)");
}

void LossConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0) throw ConfigError("loss weights must be non-negative");
  if (kind == LossKind::kCeLogcosh && alpha + beta <= 0.0) {
    throw ConfigError("ce_logcosh needs alpha + beta > 0");
  }
  if (!(clip_epsilon > 0.0 && clip_epsilon < 0.5)) {
    throw ConfigError("clip_epsilon must lie in (0, 0.5)");
  }
}

LossValue loss_ce(double label, double prediction, double clip_epsilon) {
  const double p = std::clamp(prediction, clip_epsilon, 1.0 - clip_epsilon);
  return {-(label * std::log(p) + (1.0 - label) * std::log(1.0 - p)),
          -label / p + (1.0 - label) / (1.0 - p)};
}

LossValue loss_logcosh(double label, double prediction) {
  const double e = prediction - label;
  const double a = std::abs(e);
  // Cancellation near e = 0 can dip a few ulps below zero.
  const double value = a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
  return {std::max(0.0, value), std::tanh(e)};
}

LossValue loss_ensemble(double label, double prediction, const LossConfig& config) {
  switch (config.kind) {
    case LossKind::kCe: return loss_ce(label, prediction, config.clip_epsilon);
    case LossKind::kLogcosh: return loss_logcosh(label, prediction);
    case LossKind::kCeLogcosh: break;
  }
  const LossValue ce = loss_ce(label, prediction, config.clip_epsilon);
  const LossValue lc = loss_logcosh(label, prediction);
  return {config.alpha * ce.value + config.beta * lc.value,
          config.alpha * ce.grad + config.beta * lc.grad};
}

BatchLoss batch_loss(std::span<const double> labels, std::span<const double> predictions,
                     const LossConfig& config) {
  if (labels.empty()) throw ConfigError("batch_loss: empty batch");
  if (labels.size() != predictions.size()) {
    throw ShapeError("batch_loss: " + std::to_string(labels.size()) + " labels vs " +
                     std::to_string(predictions.size()) + " predictions");
  }
  const double n = static_cast<double>(labels.size());
  BatchLoss out;
  out.grads.reserve(labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const LossValue lv = loss_ensemble(labels[i], predictions[i], config);
    total += lv.value;
    out.grads.push_back(lv.grad / n);
  }
  out.mean = total / n;
  return out;
}

}  // namespace attnvgg
