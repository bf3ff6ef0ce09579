#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "attnvgg/data.hpp"
#include "attnvgg/losses.hpp"
#include "attnvgg/metrics.hpp"
#include "attnvgg/model.hpp"
#include "attnvgg/optimizer.hpp"

namespace attnvgg::cli {

struct TrainOptions {
  std::uint64_t epochs = 250;
  std::uint64_t batch_size = 32;
  LossConfig loss;
  OptimizerConfig optimizer;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  /// Stop once an epoch's training accuracy reaches this value (<= 0 disables).
  double stop_at_train_accuracy = 0.0;
};

struct EpochStats {
  std::uint64_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean over the epoch's training-mode passes
  double train_accuracy = 0.0;  // evaluation-mode accuracy after the epoch
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::uint64_t best_epoch = 0;
  /// Parameter values after best_epoch, in Model::parameters() order.
  std::vector<Tensor> best_values;
};

using EpochCallback = std::function<void(const EpochStats&, const Model&, bool is_best)>;

/// Mini-batch RMSprop training. Each epoch shuffles the training set with a
/// generator derived from options.seed, and takes one optimizer step per
/// batch at lr_at(epochs completed). Best = highest validation accuracy, the
/// earlier epoch winning ties; without validation data every epoch scores 0
/// and epoch 1 stays best. Throws NumericError naming epoch and batch when a
/// loss is not finite.
TrainResult train_model(Model& model, std::span<const Sample* const> train,
                        std::span<const Sample* const> validation, const TrainOptions& options,
                        const EpochCallback& on_epoch = {});

struct EvalResult {
  double mean_loss = 0.0;
  ConfusionMatrix confusion;
  std::vector<double> scores;
};

/// Evaluation-mode pass over `samples`.
EvalResult evaluate(const Model& model, std::span<const Sample* const> samples,
                    const LossConfig& loss, double threshold);

/// Copies parameter values in Model::parameters() order.
std::vector<Tensor> snapshot(const Model& model);
void restore(Model& model, const std::vector<Tensor>& values);

}  // namespace attnvgg::cli
