#include "attnvgg/cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "attnvgg/cli/training.hpp"
#include "attnvgg/data.hpp"
#include "attnvgg/error.hpp"
#include "attnvgg/gradcheck_suite.hpp"
#include "attnvgg/metrics.hpp"
#include "attnvgg/model.hpp"

namespace attnvgg::cli {

namespace fs = std::filesystem;

namespace {

void require(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) throw ConfigError(std::string(command) + " needs --" + flag);
}

std::vector<Sample> load_samples(const ExperimentConfig& config) {
  const ArchitectureSpec spec = config.architecture();
  return load_dataset(config.data, config.labels, spec.height, spec.width, spec.channels);
}

std::vector<const Sample*> select(const std::vector<Sample>& samples,
                                  const std::vector<std::string>& ids, const char* part) {
  std::unordered_map<std::string, const Sample*> by_id;
  for (const auto& s : samples) by_id.emplace(s.id, &s);
  std::vector<const Sample*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw ConfigError(std::string("split manifest ") + part + " id '" + id +
                        "' is not in the dataset");
    }
    out.push_back(it->second);
  }
  return out;
}

TrainOptions train_options(const ExperimentConfig& config) {
  TrainOptions o;
  o.epochs = config.epochs;
  o.batch_size = config.batch_size;
  o.loss = config.loss_config();
  o.optimizer = config.optimizer_config();
  o.threshold = config.threshold;
  o.seed = config.seed;
  return o;
}

Model build_model(const ExperimentConfig& config, std::ostream& out) {
  Model model = Model::build(config.architecture(), config.seed);
  if (!config.weights_in.empty()) {
    const LoadReport r = load_weights(model, config.weights_in);
    out << "loaded " << r.loaded.size() << " tensors from " << config.weights_in;
    if (!r.kept_fresh.empty()) out << "; " << r.kept_fresh.size() << " kept at fresh init";
    out << "\n";
  }
  return model;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

std::string arch_label(const std::string& arch) { return arch == "vgg16" ? "VGG16" : "VGG-tiny"; }

std::string figure_title(const ExperimentConfig& config) {
  return std::string(config.attention ? "Attention-" : "") + arch_label(config.arch) + " / " +
         std::string(to_string(config.loss));
}

}  // namespace

fs::path best_weights_path(const fs::path& weights_out) {
  fs::path p = weights_out;
  const fs::path ext = p.extension();
  p.replace_extension();
  p += ".best";
  p += ext;
  return p;
}

std::vector<AblationCell> ablation_grid() {
  std::vector<AblationCell> grid;
  for (bool attention : {false, true}) {
    for (LossKind loss : {LossKind::kCe, LossKind::kLogcosh, LossKind::kCeLogcosh}) {
      grid.push_back({attention, loss});
    }
  }
  return grid;
}

int cmd_split(const ExperimentConfig& config, std::ostream& out) {
  require(config.data, "data", "split");
  require(config.labels, "labels", "split");
  require(config.out, "out", "split");
  const auto records = load_labels_csv(config.labels);
  std::vector<std::string> ids;
  std::vector<int> labels;
  for (const auto& r : records) {
    if (!fs::exists(fs::path(config.data) / r.filename)) {
      throw IoError(config.labels + ":" + std::to_string(r.line) + ": image " + r.filename +
                    " not found in " + config.data);
    }
    ids.push_back(r.filename);
    labels.push_back(r.label);
  }
  const DatasetSplit split = stratified_split(ids, labels, config.seed);
  write_split_manifest(split, config.out);
  write_config_sidecar(config, config.out);
  out << "split " << ids.size() << " samples: train " << split.train.size() << ", validation "
      << split.validation.size() << ", test " << split.test.size() << " -> " << config.out << "\n";
  return kExitOk;
}

int cmd_train(const ExperimentConfig& config, std::ostream& out) {
  require(config.data, "data", "train");
  require(config.labels, "labels", "train");
  require(config.split, "split", "train");
  require(config.weights_out, "weights-out", "train");
  const std::string log_path = config.log.empty() ? config.weights_out + ".log.csv" : config.log;

  const auto samples = load_samples(config);
  const DatasetSplit split = read_split_manifest(config.split);
  const auto train = select(samples, split.train, "train");
  const auto validation = select(samples, split.validation, "validation");
  Model model = build_model(config, out);

  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw IoError("cannot write training log " + log_path);
  log << "epoch,train_loss,val_loss,val_accuracy\n";
  const fs::path best_path = best_weights_path(config.weights_out);

  const TrainResult result =
      train_model(model, train, validation, train_options(config),
                  [&](const EpochStats& s, const Model& m, bool is_best) {
                    log << s.epoch << ',' << format_fixed(s.train_loss) << ','
                        << format_fixed(s.val_loss) << ',' << format_fixed(s.val_accuracy) << '\n';
                    log.flush();
                    if (is_best) save_weights(m, best_path);
                  });
  if (!log) throw IoError("failed writing training log " + log_path);

  save_weights(model, config.weights_out);
  write_config_sidecar(config, log_path);
  write_config_sidecar(config, config.weights_out);
  const EpochStats& last = result.history.back();
  out << "trained " << result.history.size() << " epochs; final train_loss "
      << format_fixed(last.train_loss) << ", val_accuracy " << format_fixed(last.val_accuracy)
      << "; best epoch " << result.best_epoch << " -> " << best_path.string() << "\n";
  return kExitOk;
}

int cmd_eval(const ExperimentConfig& config, std::ostream& out) {
  require(config.data, "data", "eval");
  require(config.labels, "labels", "eval");
  require(config.weights_in, "weights-in", "eval");
  require(config.report, "report", "eval");
  const std::string figure =
      config.figure.empty() ? fs::path(config.report).replace_extension(".svg").string()
                            : config.figure;

  const auto samples = load_samples(config);
  std::vector<const Sample*> test;
  if (config.split.empty()) {
    for (const auto& s : samples) test.push_back(&s);
  } else {
    test = select(samples, read_split_manifest(config.split).test, "test");
  }
  if (test.empty()) throw ConfigError("eval: no test samples");
  const Model model = build_model(config, out);

  const EvalResult r = evaluate(model, test, config.loss_config(), config.threshold);
  const MetricsReport report = compute_metrics(r.confusion);
  write_text(config.report, metrics_report_json(report, config.threshold, config.to_json()));
  render_confusion_figure(r.confusion, figure, figure_title(config));
  write_config_sidecar(config, figure);
  out << "evaluated " << test.size() << " samples: accuracy " << format_fixed(report.accuracy)
      << ", sensitivity " << format_fixed(report.sensitivity) << ", specificity "
      << format_fixed(report.specificity) << ", mcc " << format_fixed(report.mcc) << "\n";
  return kExitOk;
}

int cmd_ablate(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  require(config.data, "data", "ablate");
  require(config.labels, "labels", "ablate");
  require(config.split, "split", "ablate");
  require(config.out, "out", "ablate");

  const auto samples = load_samples(config);
  const DatasetSplit split = read_split_manifest(config.split);
  const auto train = select(samples, split.train, "train");
  const auto validation = select(samples, split.validation, "validation");
  const auto test = select(samples, split.test, "test");
  if (test.empty()) throw ConfigError("ablate: split has no test samples");

  std::string csv = "model,loss,sensitivity,specificity,precision,accuracy,f1,mcc\n";
  bool any_failed = false;
  for (const AblationCell& cell : ablation_grid()) {
    ExperimentConfig c = config;
    c.attention = cell.attention;
    c.loss = cell.loss;
    const std::string model_name = (cell.attention ? "Attention-" : "") + arch_label(c.arch);
    const std::string loss_name(to_string(cell.loss));
    try {
      Model model = build_model(c, out);
      const TrainResult tr = train_model(model, train, validation, train_options(c));
      restore(model, tr.best_values);
      const EvalResult er = evaluate(model, test, c.loss_config(), c.threshold);
      const MetricsReport m = compute_metrics(er.confusion);
      csv += model_name + "," + loss_name + "," + format_fixed(m.sensitivity) + "," +
             format_fixed(m.specificity) + "," + format_fixed(m.precision) + "," +
             format_fixed(m.accuracy) + "," + format_fixed(m.f1) + "," + format_fixed(m.mcc) + "\n";
      out << model_name << " " << loss_name << ": accuracy " << format_fixed(m.accuracy)
          << " (best epoch " << tr.best_epoch << ")\n";
    } catch (const std::exception& e) {
      any_failed = true;
      csv += model_name + "," + loss_name + ",error,error,error,error,error,error\n";
      err << "ablate: " << model_name << " " << loss_name << " failed: " << e.what() << "\n";
    }
  }
  write_text(config.out, csv);
  write_config_sidecar(config, config.out);
  out << "ablation table -> " << config.out << "\n";
  return any_failed ? kExitFailure : kExitOk;
}

int cmd_predict(const ExperimentConfig& config, const fs::path& image, std::ostream& out) {
  require(config.weights_in, "weights-in", "predict");
  if (image.empty()) throw ConfigError("predict needs an image path");
  const ArchitectureSpec spec = config.architecture();
  const Tensor prepared =
      replicate_channels(prepare(load_pgm(image), spec.height, spec.width), spec.channels);
  std::ostringstream ignored;
  const Model model = build_model(config, ignored);
  const double score = model.predict(prepared);
  out << image.filename().string() << ',' << format_fixed(score) << ','
      << label_name(score >= config.threshold ? kMalignant : kBenign) << "\n";
  return kExitOk;
}

int cmd_gradcheck(const ExperimentConfig& config, std::ostream& out,
                  const std::string& corrupt_unit) {
  GradcheckSuiteOptions options;
  options.seed = config.seed;
  options.corrupt_unit = corrupt_unit;
  const auto reports = run_gradcheck_suite(options);
  std::size_t passed = 0;
  for (const auto& r : reports) {
    char line[160];
    std::snprintf(line, sizeof line, "%-28s max_rel_error %.3e  %s\n", r.unit.c_str(),
                  r.max_rel_error, r.passed ? "PASS" : "FAIL");
    out << line;
    passed += r.passed;
  }
  out << "gradcheck: " << passed << "/" << reports.size() << " units within tolerance "
      << reports.front().tolerance << " (seed " << config.seed << ")\n";
  return passed == reports.size() ? kExitOk : kExitFailure;
}

int cmd_synth(const ExperimentConfig& config, std::size_t n_per_class, std::size_t size,
              std::ostream& out) {
  require(config.out, "out", "synth");
  const auto samples = synth_dataset(n_per_class, size, config.seed);
  write_dataset(samples, config.out);
  out << "wrote " << samples.size() << " synthetic " << size << "x" << size << " images to "
      << config.out << "\n";
  return kExitOk;
}

}  // namespace attnvgg::cli
