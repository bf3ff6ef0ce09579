#include "attnvgg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "attnvgg/error.hpp"

namespace attnvgg {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradient_check(const GradCheckUnit& unit, double tolerance, double step) {
  if (!unit.deterministic) {
    throw StateError("gradient check of '" + unit.name +
                     "' rejected: forward is not deterministic (freeze the dropout mask)");
  }
  if (!unit.objective) throw StateError("gradient check of '" + unit.name + "': no objective");
  if (unit.compute_analytic) unit.compute_analytic();

  GradCheckReport report;
  report.unit = unit.name;
  report.tolerance = tolerance;
  for (const auto& target : unit.targets) {
    if (!target.value || !target.analytic || target.value->shape() != target.analytic->shape()) {
      throw ShapeError("gradient check of '" + unit.name + "': target '" + target.name +
                       "' has no matching analytic gradient");
    }
    GradCheckEntry entry{target.name, target.value->size(), 0.0};
    for (std::size_t i = 0; i < target.value->size(); ++i) {
      double& x = (*target.value)[i];
      const double saved = x;
      x = saved + step;
      const double plus = unit.objective();
      x = saved - step;
      const double minus = unit.objective();
      x = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double err = relative_error((*target.analytic)[i], numeric);
      // NaN compares false; fold it in as an infinite error.
      entry.max_rel_error = std::max(entry.max_rel_error, std::isnan(err) ? INFINITY : err);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace attnvgg
