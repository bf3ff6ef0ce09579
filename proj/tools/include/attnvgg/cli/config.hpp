#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "attnvgg/losses.hpp"
#include "attnvgg/model.hpp"
#include "attnvgg/optimizer.hpp"

namespace attnvgg::cli {

/// Every knob a command can read. Keys in config files are the field names.
struct ExperimentConfig {
  std::string arch = "vgg16";
  bool attention = true;
  LossKind loss = LossKind::kCeLogcosh;
  double alpha = 0.5;
  double beta = 0.5;
  std::uint64_t epochs = 250;
  std::uint64_t batch_size = 32;
  double lr0 = 2e-6;
  double decay = 1e-6;
  double dropout = 0.5;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  HeadInit head_init = HeadInit::kZeroMean;
  // 0 means "the architecture's native input"
  std::uint64_t height = 0;
  std::uint64_t width = 0;
  std::uint64_t channels = 0;

  std::string data;
  std::string labels;
  std::string split;
  std::string weights_in;
  std::string weights_out;
  std::string log;
  std::string report;
  std::string figure;
  std::string out;

  /// Sets one field from its textual form; throws ConfigError for an unknown
  /// key or an unparsable value.
  void set(std::string_view key, std::string_view value);

  /// Range checks shared by all commands.
  void validate() const;

  ArchitectureSpec architecture() const;
  LossConfig loss_config() const;
  OptimizerConfig optimizer_config() const;

  /// key=value lines in a fixed order; readable back with apply_config_text.
  std::string to_key_value() const;
  /// Flat JSON object in the same order.
  std::string to_json() const;
};

/// Field names in serialization order.
const std::vector<std::string>& config_keys();

/// Applies `key=value` lines (blank lines and `#` comments ignored). Errors name
/// the source and line.
void apply_config_text(ExperimentConfig& config, std::string_view text,
                       std::string_view source = "<config>");
void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path);

/// Writes config.to_key_value() next to an artifact, at `<artifact>.config`.
void write_config_sidecar(const ExperimentConfig& config, const std::filesystem::path& artifact);

}  // namespace attnvgg::cli
