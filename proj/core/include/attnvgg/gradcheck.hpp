#pragma once

#include <functional>
#include <string>
#include <vector>

#include "attnvgg/tensor.hpp"

namespace attnvgg {

/// One tensor whose entries get perturbed, paired with the analytic gradient
/// of the unit's objective with respect to it.
struct GradCheckTarget {
  std::string name;
  Tensor* value = nullptr;
  const Tensor* analytic = nullptr;
};

/// A scalar objective plus the analytic gradients to verify. The objective is
/// re-evaluated after every perturbation, so it must read the target tensors
/// through the pointers and be deterministic (dropout masks frozen).
struct GradCheckUnit {
  std::string name;
  bool deterministic = true;
  std::function<double()> objective;
  std::function<void()> compute_analytic;
  std::vector<GradCheckTarget> targets;
};

struct GradCheckEntry {
  std::string target;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::string unit;
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// |analytic - numeric| / max(1, |analytic|, |numeric|)
double relative_error(double analytic, double numeric);

/// Central finite differences with step `step` on each entry of each target.
/// Throws StateError for a unit flagged non-deterministic.
GradCheckReport gradient_check(const GradCheckUnit& unit, double tolerance, double step = 1e-5);

}  // namespace attnvgg
