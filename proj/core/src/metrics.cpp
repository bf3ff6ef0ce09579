#include "attnvgg/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "attnvgg/error.hpp"

namespace attnvgg {

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

ConfusionMatrix confusion_from_predictions(std::span<const int> labels,
                                           std::span<const double> predictions,
                                           double threshold) {
  if (labels.size() != predictions.size()) {
    throw ShapeError("confusion: " + std::to_string(labels.size()) + " labels vs " +
                     std::to_string(predictions.size()) + " predictions");
  }
  if (labels.empty()) throw ConfigError("confusion: no samples");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("confusion: threshold must lie in (0, 1)");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool positive = predictions[i] >= threshold;
    if (labels[i] == 1) {
      ++(positive ? cm.tp : cm.fn);
    } else if (labels[i] == 0) {
      ++(positive ? cm.fp : cm.tn);
    } else {
      throw ConfigError("confusion: label " + std::to_string(labels[i]) + " is not 0 or 1");
    }
  }
  return cm;
}

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ConfigError("metrics: confusion matrix is empty");
  const auto tp = static_cast<double>(cm.tp);
  const auto fp = static_cast<double>(cm.fp);
  const auto tn = static_cast<double>(cm.tn);
  const auto fn = static_cast<double>(cm.fn);

  MetricsReport r;
  r.confusion = cm;
  r.accuracy = ratio(tp + tn, tp + fn + tn + fp);
  r.sensitivity = ratio(tp, tp + fn);
  r.specificity = ratio(tn, tn + fp);
  r.precision = ratio(tp, tp + fp);
  r.f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn);
  // Paired so that swapping the positive class permutes only commutative
  // products, which keeps mcc bit-identical under the swap.
  const double den = ((tp + fp) * (tn + fn)) * ((tp + fn) * (tn + fp));
  r.mcc = den == 0.0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(den);
  return r;
}

std::string metrics_report_json(const MetricsReport& report, double threshold,
                                std::string_view config_json) {
  const auto& cm = report.confusion;
  std::ostringstream os;
  os << "{\n"
     << "  \"sensitivity\": " << format_fixed(report.sensitivity) << ",\n"
     << "  \"specificity\": " << format_fixed(report.specificity) << ",\n"
     << "  \"precision\": " << format_fixed(report.precision) << ",\n"
     << "  \"accuracy\": " << format_fixed(report.accuracy) << ",\n"
     << "  \"f1\": " << format_fixed(report.f1) << ",\n"
     << "  \"mcc\": " << format_fixed(report.mcc) << ",\n"
     << "  \"tp\": " << cm.tp << ",\n"
     << "  \"fp\": " << cm.fp << ",\n"
     << "  \"tn\": " << cm.tn << ",\n"
     << "  \"fn\": " << cm.fn << ",\n"
     << "  \"threshold\": " << format_fixed(threshold);
  if (!config_json.empty()) os << ",\n  \"config\": " << config_json;
  os << "\n}\n";
  return os.str();
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string confusion_svg(const ConfusionMatrix& cm, std::string_view title) {
  constexpr int kCell = 160;
  constexpr int kLeft = 150;
  constexpr int kTop = 70;
  const int width = kLeft + 2 * kCell + 20;
  const int height = kTop + 2 * kCell + 60;

  // rows: actual benign, actual malignant; columns: predicted benign, malignant
  const struct {
    std::uint64_t count;
    const char* tag;
    bool correct;
  } cells[2][2] = {{{cm.tn, "TN", true}, {cm.fp, "FP", false}},
                   {{cm.fn, "FN", false}, {cm.tp, "TP", true}}};

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\">\n"
     << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
     << "\" fill=\"#ffffff\"/>\n";
  if (!title.empty()) {
    os << "  <text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"18\">"
       << xml_escape(title) << "</text>\n";
  }
  for (int c = 0; c < 2; ++c) {
    os << "  <text class=\"axis\" x=\"" << kLeft + c * kCell + kCell / 2 << "\" y=\""
       << kTop - 12 << "\" text-anchor=\"middle\" font-size=\"14\">"
       << (c == 0 ? "Predicted benign" : "Predicted malignant") << "</text>\n";
  }
  for (int r = 0; r < 2; ++r) {
    os << "  <text class=\"axis\" x=\"" << kLeft - 10 << "\" y=\""
       << kTop + r * kCell + kCell / 2 + 5 << "\" text-anchor=\"end\" font-size=\"14\">"
       << (r == 0 ? "Actual benign" : "Actual malignant") << "</text>\n";
  }
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const auto& cell = cells[r][c];
      const int x = kLeft + c * kCell;
      const int y = kTop + r * kCell;
      os << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell << "\" height=\""
         << kCell << "\" fill=\"" << (cell.correct ? "#9ecae1" : "#fcbba1")
         << "\" stroke=\"#333333\"/>\n"
         << "  <text class=\"count\" data-cell=\"" << cell.tag << "\" x=\"" << x + kCell / 2
         << "\" y=\"" << y + kCell / 2 + 10 << "\" text-anchor=\"middle\" font-size=\"28\">"
         << cell.count << "</text>\n"
         << "  <text class=\"tag\" x=\"" << x + kCell / 2 << "\" y=\"" << y + kCell - 14
         << "\" text-anchor=\"middle\" font-size=\"12\">" << cell.tag << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

void render_confusion_figure(const ConfusionMatrix& cm, const std::filesystem::path& path,
                             std::string_view title) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write confusion figure: " + path.string());
  out << confusion_svg(cm, title);
  if (!out) throw IoError("failed writing confusion figure: " + path.string());
}

}  // namespace attnvgg
