// Command-line driver: synth | pretrain | extract | train-eval | report.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "bridgeprompt/error.hpp"
#include "bridgeprompt/pipeline.hpp"

namespace {

// "--key value" and "--key=value" pairs left over after CLI11 parsing.
void apply_overrides(const std::vector<std::string>& extras, bp::ConfigMap& settings) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const auto& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() < 3) throw bp::ConfigError("unexpected argument '" + arg + "'");
    auto key = arg.substr(2);
    std::string value;
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw bp::ConfigError("--" + key + ": missing value");
      value = extras[++i];
    }
    for (auto& ch : key)
      if (ch == '-') ch = '_';
    settings[key] = value;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompt-bridged contrastive pre-training and gesture recognition"};
  app.require_subcommand(1);

  struct Common {
    std::string config;
    std::string out;
    std::string seed;
  };
  Common common;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "Write a synthetic corpus"},
      {"pretrain", "Contrastive pre-training of the encoders"},
      {"extract", "Frozen frame-wise feature extraction"},
      {"train-eval", "Train and evaluate the recognizer per fold"},
      {"report", "Collect the mean rows of several runs"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", common.config, "key = value configuration file");
    sub->add_option("--out", common.out, "output directory");
    sub->add_option("--seed", common.seed, "random seed");
    sub->allow_extras();
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    CLI::App* sub = nullptr;
    for (auto* s : subs)
      if (s->parsed()) sub = s;
    bp::ConfigMap settings;
    if (!common.config.empty()) {
      if (!std::filesystem::exists(common.config)) throw bp::IoError("config file not found: " + common.config);
      settings = bp::parse_config_text(bp::read_text_file(common.config));
    }
    apply_overrides(sub->remaining(), settings);
    if (!common.out.empty()) settings["out"] = common.out;
    if (!common.seed.empty()) settings["seed"] = common.seed;
    const auto config = bp::resolve_config(settings);

    const auto name = sub->get_name();
    if (name == "synth") bp::run_synth(config);
    else if (name == "pretrain") bp::run_pretrain(config);
    else if (name == "extract") bp::run_extract(config);
    else if (name == "train-eval") bp::run_train_eval(config);
    else bp::run_report(config);
  } catch (const bp::Error& e) {
    std::cerr << "error (" << bp::to_string(e.kind()) << "): " << e.what() << "\n";
    return bp::exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
