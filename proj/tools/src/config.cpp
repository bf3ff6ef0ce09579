#include "attnvgg/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "attnvgg/error.hpp"

namespace attnvgg::cli {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

double parse_double(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + std::string(key) + "': '" + std::string(text) +
                      "' is not a number");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + std::string(key) + "': '" + std::string(text) +
                      "' is not a non-negative integer");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string t = lower(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("config key '" + std::string(key) + "': '" + std::string(text) +
                    "' is not a boolean");
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string_view head_init_name(HeadInit h) {
  return h == HeadInit::kLiteral ? "literal" : "zero_mean";
}

enum class JsonType { kString, kNumber, kInteger, kBool };

// One entry per field: name, JSON type, reader, writer.
struct Field {
  const char* name;
  JsonType type;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define ATTNVGG_STRING_FIELD(f) \
  Field{#f, JsonType::kString, [](ExperimentConfig& c, std::string_view v) { c.f = std::string(v); }, \
        [](const ExperimentConfig& c) { return c.f; }}
#define ATTNVGG_DOUBLE_FIELD(f) \
  Field{#f, JsonType::kNumber, [](ExperimentConfig& c, std::string_view v) { c.f = parse_double(#f, v); }, \
        [](const ExperimentConfig& c) { return shortest(c.f); }}
#define ATTNVGG_UINT_FIELD(f) \
  Field{#f, JsonType::kInteger, [](ExperimentConfig& c, std::string_view v) { c.f = parse_uint(#f, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.f); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"arch", JsonType::kString,
            [](ExperimentConfig& c, std::string_view v) {
              ArchitectureSpec::by_name(v);
              c.arch = std::string(v);
            },
            [](const ExperimentConfig& c) { return c.arch; }},
      Field{"attention", JsonType::kBool, [](ExperimentConfig& c, std::string_view v) { c.attention = parse_bool("attention", v); },
            [](const ExperimentConfig& c) { return std::string(c.attention ? "true" : "false"); }},
      Field{"loss", JsonType::kString, [](ExperimentConfig& c, std::string_view v) { c.loss = parse_loss_kind(v); },
            [](const ExperimentConfig& c) { return std::string(to_string(c.loss)); }},
      ATTNVGG_DOUBLE_FIELD(alpha),
      ATTNVGG_DOUBLE_FIELD(beta),
      ATTNVGG_UINT_FIELD(epochs),
      ATTNVGG_UINT_FIELD(batch_size),
      ATTNVGG_DOUBLE_FIELD(lr0),
      ATTNVGG_DOUBLE_FIELD(decay),
      ATTNVGG_DOUBLE_FIELD(dropout),
      ATTNVGG_DOUBLE_FIELD(threshold),
      ATTNVGG_UINT_FIELD(seed),
      Field{"head_init", JsonType::kString,
            [](ExperimentConfig& c, std::string_view v) {
              if (v == "zero_mean") {
                c.head_init = HeadInit::kZeroMean;
              } else if (v == "literal") {
                c.head_init = HeadInit::kLiteral;
              } else {
                throw ConfigError("config key 'head_init': expected zero_mean or literal, got '" +
                                  std::string(v) + "'");
              }
            },
            [](const ExperimentConfig& c) { return std::string(head_init_name(c.head_init)); }},
      ATTNVGG_UINT_FIELD(height),
      ATTNVGG_UINT_FIELD(width),
      ATTNVGG_UINT_FIELD(channels),
      ATTNVGG_STRING_FIELD(data),
      ATTNVGG_STRING_FIELD(labels),
      ATTNVGG_STRING_FIELD(split),
      ATTNVGG_STRING_FIELD(weights_in),
      ATTNVGG_STRING_FIELD(weights_out),
      ATTNVGG_STRING_FIELD(log),
      ATTNVGG_STRING_FIELD(report),
      ATTNVGG_STRING_FIELD(figure),
      ATTNVGG_STRING_FIELD(out),
  };
  return table;
}

#undef ATTNVGG_STRING_FIELD
#undef ATTNVGG_DOUBLE_FIELD
#undef ATTNVGG_UINT_FIELD

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.emplace_back(f.name);
    return k;
  }();
  return keys;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (key == f.name) {
      f.set(*this, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void ExperimentConfig::validate() const {
  ArchitectureSpec::by_name(arch);
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  loss_config().validate();
  optimizer_config().validate();
  architecture().validate();
}

ArchitectureSpec ExperimentConfig::architecture() const {
  ArchitectureSpec spec = ArchitectureSpec::by_name(arch, attention);
  if (height != 0) spec.height = height;
  if (width != 0) spec.width = width;
  if (channels != 0) spec.channels = channels;
  spec.dropout_rate = dropout;
  spec.head_init = head_init;
  return spec;
}

LossConfig ExperimentConfig::loss_config() const {
  LossConfig c;
  c.kind = loss;
  c.alpha = alpha;
  c.beta = beta;
  return c;
}

OptimizerConfig ExperimentConfig::optimizer_config() const {
  OptimizerConfig c;
  c.lr0 = lr0;
  c.decay = decay;
  return c;
}

std::string ExperimentConfig::to_key_value() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.name) + "=" + f.get(*this) + "\n";
  return out;
}

std::string ExperimentConfig::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& f : fields()) {
    const std::string text = f.get(*this);
    switch (f.type) {
      case JsonType::kString: j[f.name] = text; break;
      case JsonType::kNumber: j[f.name] = parse_double(f.name, text); break;
      case JsonType::kInteger: j[f.name] = parse_uint(f.name, text); break;
      case JsonType::kBool: j[f.name] = text == "true"; break;
    }
  }
  return j.dump();
}

void apply_config_text(ExperimentConfig& config, std::string_view text, std::string_view source) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    const std::string where = std::string(source) + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
    try {
      config.set(trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str(), path.string());
}

void write_config_sidecar(const ExperimentConfig& config, const std::filesystem::path& artifact) {
  const std::filesystem::path path = artifact.string() + ".config";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << config.to_key_value();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace attnvgg::cli
