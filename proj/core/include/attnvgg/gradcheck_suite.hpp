#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnvgg/gradcheck.hpp"

namespace attnvgg {

struct GradcheckSuiteOptions {
  std::uint64_t seed = 7;
  double tolerance = 1e-4;
  /// Test hook: a unit whose analytic gradient is deliberately corrupted.
  std::string corrupt_unit;
};

/// Names of all units in the order they are checked.
std::vector<std::string> gradcheck_unit_names();

/// Builds one unit by name on a small seeded random instance.
GradCheckUnit make_gradcheck_unit(const std::string& name, std::uint64_t seed);

/// Runs every unit; one report per unit.
std::vector<GradCheckReport> run_gradcheck_suite(const GradcheckSuiteOptions& options = {});

}  // namespace attnvgg
