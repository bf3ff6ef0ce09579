#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace attnvgg {

/// Binary confusion counts; positive = malignant (label 1).
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct MetricsReport {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double mcc = 0.0;
  ConfusionMatrix confusion;
};

/// A prediction counts as positive iff prediction >= threshold.
ConfusionMatrix confusion_from_predictions(std::span<const int> labels,
                                           std::span<const double> predictions,
                                           double threshold = 0.5);

/// All six metrics; a ratio with a zero denominator is reported as 0.
MetricsReport compute_metrics(const ConfusionMatrix& cm);

/// JSON object with the six metrics (6 decimals), the four counts and the
/// threshold, plus `"config": <config_json>` when config_json is non-empty.
std::string metrics_report_json(const MetricsReport& report, double threshold,
                                std::string_view config_json = {});

/// 2x2 annotated confusion grid as a standalone SVG document.
std::string confusion_svg(const ConfusionMatrix& cm, std::string_view title = {});
void render_confusion_figure(const ConfusionMatrix& cm, const std::filesystem::path& path,
                             std::string_view title = {});

/// "%.6f" formatting shared by every text artifact.
std::string format_fixed(double value, int decimals = 6);

}  // namespace attnvgg
