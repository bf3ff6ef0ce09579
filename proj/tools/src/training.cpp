#include "attnvgg/cli/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "attnvgg/error.hpp"
#include "attnvgg/rng.hpp"

namespace attnvgg::cli {

namespace {

double accuracy_of(const ConfusionMatrix& cm) {
  return cm.total() == 0 ? 0.0 : static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

}  // namespace

std::vector<Tensor> snapshot(const Model& model) {
  std::vector<Tensor> values;
  for (const Parameter* p : model.parameters()) values.push_back(p->value);
  return values;
}

void restore(Model& model, const std::vector<Tensor>& values) {
  const auto params = model.parameters();
  if (params.size() != values.size()) throw StateError("restore: parameter count differs");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.shape() != values[i].shape()) {
      throw StateError("restore: shape differs for " + params[i]->name);
    }
    params[i]->value = values[i];
  }
}

EvalResult evaluate(const Model& model, std::span<const Sample* const> samples,
                    const LossConfig& loss, double threshold) {
  EvalResult r;
  if (samples.empty()) return r;
  std::vector<int> labels;
  double total = 0.0;
  for (const Sample* s : samples) {
    const double p = model.predict(s->image);
    r.scores.push_back(p);
    labels.push_back(s->label);
    total += loss_ensemble(s->label, p, loss).value;
  }
  r.mean_loss = total / static_cast<double>(samples.size());
  r.confusion = confusion_from_predictions(labels, r.scores, threshold);
  return r;
}

TrainResult train_model(Model& model, std::span<const Sample* const> train,
                        std::span<const Sample* const> validation, const TrainOptions& options,
                        const EpochCallback& on_epoch) {
  if (train.empty()) throw ConfigError("training set is empty");
  if (options.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (options.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  options.loss.validate();
  options.optimizer.validate();

  Rng shuffle_rng(derive_seed(options.seed, 1));
  Rng dropout_rng(derive_seed(options.seed, 2));
  const auto params = model.parameters();

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  double best_accuracy = -1.0;
  ForwardOptions fwd;
  fwd.training = true;
  fwd.rng = &dropout_rng;

  for (std::uint64_t epoch = 0; epoch < options.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    const double lr = lr_at(epoch, options.optimizer);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;

    for (std::size_t start = 0; start < order.size(); start += options.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      const double n = static_cast<double>(end - start);
      model.zero_grad();
      // Forward and backward one sample at a time: the mean-reduced batch
      // gradient of sample i only depends on its own prediction, so no batch
      // of caches has to be held at once.
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = *train[order[k]];
        ForwardResult fr = model.forward(s.image, fwd);
        const LossValue lv = loss_ensemble(s.label, fr.prediction, options.loss);
        if (!std::isfinite(lv.value) || !std::isfinite(lv.grad)) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                             std::to_string(batch_index + 1) + " (sample " + s.id + ")");
        }
        loss_sum += lv.value;
        model.backward(fr.cache, lv.grad / n);
      }
      rmsprop_step(params, lr, options.optimizer);
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.train_accuracy =
        accuracy_of(evaluate(model, train, options.loss, options.threshold).confusion);
    const EvalResult val = evaluate(model, validation, options.loss, options.threshold);
    stats.val_loss = val.mean_loss;
    stats.val_accuracy = accuracy_of(val.confusion);
    result.history.push_back(stats);

    const bool is_best = stats.val_accuracy > best_accuracy;
    if (is_best) {
      best_accuracy = stats.val_accuracy;
      result.best_epoch = stats.epoch;
      result.best_values = snapshot(model);
    }
    if (on_epoch) on_epoch(stats, model, is_best);
    if (options.stop_at_train_accuracy > 0.0 &&
        stats.train_accuracy >= options.stop_at_train_accuracy) {
      break;
    }
  }
  return result;
}

}  // namespace attnvgg::cli
