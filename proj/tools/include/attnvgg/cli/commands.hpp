#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "attnvgg/cli/config.hpp"

namespace attnvgg::cli {

/// Exit statuses shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // training / evaluation failure
inline constexpr int kExitInput = 2;    // bad input or configuration

int cmd_split(const ExperimentConfig& config, std::ostream& out);
int cmd_train(const ExperimentConfig& config, std::ostream& out);
int cmd_eval(const ExperimentConfig& config, std::ostream& out);
int cmd_ablate(const ExperimentConfig& config, std::ostream& out, std::ostream& err);
int cmd_predict(const ExperimentConfig& config, const std::filesystem::path& image,
                std::ostream& out);
int cmd_gradcheck(const ExperimentConfig& config, std::ostream& out,
                  const std::string& corrupt_unit = {});
int cmd_synth(const ExperimentConfig& config, std::size_t n_per_class, std::size_t size,
              std::ostream& out);

/// Path of the best-validation checkpoint written next to `weights_out`:
/// "model.agw" -> "model.best.agw".
std::filesystem::path best_weights_path(const std::filesystem::path& weights_out);

/// Order of the ablation grid: plain backbone first, then the attention
/// variant, each over ce, logcosh, ce_logcosh.
struct AblationCell {
  bool attention = false;
  LossKind loss = LossKind::kCe;
};
std::vector<AblationCell> ablation_grid();

/// Full command-line entry point: parses args (args[0] is the program name),
/// resolves defaults < config file < flags, dispatches, and maps exceptions
/// to exit statuses.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace attnvgg::cli
