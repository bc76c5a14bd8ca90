#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "sasim/experiment.hpp"

// Exit codes: 0 ok, 1 config error, 2 runtime error.

int main(int argc, char** argv) {
  CLI::App app{"sasim: stochastic-approximation experiments for Markov models"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("config", config_path, "key = value config file")->required();

  std::string validate_path;
  auto* validate =
      app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", validate_path, "key = value config file")
      ->required();

  auto* fixtures =
      app.add_subcommand("list-fixtures", "List builtin instance names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fixtures->parsed()) {
      for (const auto& f : sasim::list_fixtures()) std::printf("%s\n", f.c_str());
      return 0;
    }
    if (validate->parsed()) {
      sasim::ExperimentConfig cfg;
      try {
        cfg = sasim::parse_config_file(validate_path);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "config-error: %s\n", e.what());
        return 1;
      }
      const auto rep = sasim::validate_config(cfg);
      for (const auto& w : rep.warnings) {
        std::printf("warning: %s\n", w.c_str());
      }
      for (const auto& e : rep.errors) std::printf("error: %s\n", e.c_str());
      if (!rep.ok()) return 1;
      std::printf("ok\n");
      return 0;
    }
    // run
    sasim::ExperimentConfig cfg;
    try {
      cfg = sasim::parse_config_file(config_path);
      const auto rep = sasim::validate_config(cfg);
      for (const auto& w : rep.warnings) {
        std::fprintf(stderr, "warning: %s\n", w.c_str());
      }
      if (!rep.ok()) {
        std::fprintf(stderr, "config-error: %s\n", rep.errors.front().c_str());
        return 1;
      }
    } catch (const std::exception& e) {
      std::fprintf(stderr, "config-error: %s\n", e.what());
      return 1;
    }
    const auto manifest = sasim::run_experiment(cfg);
    std::printf("%s finished; outputs under %s\n", manifest.experiment.c_str(),
                manifest.resolved_config.at("output_dir").c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime-error: %s\n", e.what());
    return 2;
  }
}
