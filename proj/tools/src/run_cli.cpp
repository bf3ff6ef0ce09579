#include <CLI11.hpp>
#include <map>

#include "attnvgg/cli/commands.hpp"
#include "attnvgg/error.hpp"

namespace attnvgg::cli {

namespace {

std::string kebab(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

// Config-backed flags attached to one subcommand.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  CLI::Option* config_option = nullptr;
  CLI::Option* no_attention = nullptr;

  void attach(CLI::App& sub) {
    config_option = sub.add_option("--config", config_file, "key=value config file");
    for (const auto& key : config_keys()) {
      options[key] = sub.add_option("--" + kebab(key), values[key], "config key " + key);
    }
    no_attention = sub.add_flag("--no-attention", "same as --attention false");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig config;
    if (!config_file.empty()) apply_config_file(config, config_file);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) config.set(key, values.at(key));
    }
    if (no_attention->count() > 0) config.attention = false;
    config.validate();
    return config;
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"attention-gated VGG classifier: split, train, eval, ablate, predict, gradcheck"};
  app.require_subcommand(1);

  struct Command {
    CLI::App* app;
    ConfigFlags flags;
  };
  std::map<std::string, Command> commands;
  auto add = [&](const std::string& name, const std::string& help) -> Command& {
    Command& c = commands[name];
    c.app = app.add_subcommand(name, help);
    c.flags.attach(*c.app);
    return c;
  };

  add("split", "write a stratified train/validation/test manifest");
  add("train", "train a model and log per-epoch metrics");
  add("eval", "evaluate weights on the test split");
  add("ablate", "train and evaluate the six model/loss cells");
  Command& predict = add("predict", "score one PGM image");
  std::string image;
  predict.app->add_option("image", image, "PGM image")->required();
  Command& gradcheck = add("gradcheck", "finite-difference check of every gradient");
  std::string corrupt_unit;
  gradcheck.app->add_option("--corrupt-unit", corrupt_unit)->group("");
  Command& synth = add("synth", "write a synthetic two-class PGM dataset");
  std::size_t n_per_class = 32;
  std::size_t size = 32;
  synth.app->add_option("--n-per-class", n_per_class, "images per class")->capture_default_str();
  synth.app->add_option("--size", size, "image side length")->capture_default_str();

  std::vector<std::string> argv_tail(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv_tail.begin(), argv_tail.end());  // CLI11 consumes from the back
  try {
    app.parse(argv_tail);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    for (auto& [name, c] : commands) {
      if (!c.app->parsed()) continue;
      const ExperimentConfig config = c.flags.resolve();
      if (name == "split") return cmd_split(config, out);
      if (name == "train") return cmd_train(config, out);
      if (name == "eval") return cmd_eval(config, out);
      if (name == "ablate") return cmd_ablate(config, out, err);
      if (name == "predict") return cmd_predict(config, image, out);
      if (name == "gradcheck") return cmd_gradcheck(config, out, corrupt_unit);
      if (name == "synth") return cmd_synth(config, n_per_class, size, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << "error: no subcommand ran\n";
  return kExitInput;
}

}  // namespace attnvgg::cli
