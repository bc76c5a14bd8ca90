#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sasim {

/// Flat key = value experiment configuration ('#' starts a comment).
/// Recognized common keys: experiment, instance, seed, output_dir; all
/// other keys are experiment-specific hyperparameters and are checked
/// against the experiment's known set during validation.
struct ExperimentConfig {
  std::string experiment;
  std::string instance;  // builtin fixture name or instance file path
  std::uint64_t seed = 0;
  bool seed_was_set = false;
  std::string output_dir = "out";
  std::map<std::string, std::string> params;

  double param_d(const std::string& key, double fallback) const;
  long param_l(const std::string& key, long fallback) const;
  std::string param_s(const std::string& key,
                      const std::string& fallback) const;
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

/// Schema and hyperparameter-constraint checks (step-size admissibility,
/// eps < Delta, fixture existence with a nearest-name hint, dry-run
/// instance load). Does not execute the experiment.
ValidationReport validate_config(const ExperimentConfig& config);

struct RunManifest {
  std::string experiment;
  std::string version;
  std::string started_utc;
  std::string finished_utc;
  std::map<std::string, std::string> resolved_config;
  std::map<std::string, std::string> output_checksums;  // file -> fnv1a hex
};

/// Execute the experiment, write its CSV/JSON outputs plus manifest.json
/// under the resolved output directory, and return the manifest. The
/// SASIM_OUTPUT_ROOT environment variable, when set, re-roots relative
/// output directories.
RunManifest run_experiment(const ExperimentConfig& config);

std::vector<std::string> list_fixtures();
std::vector<std::string> list_experiments();

/// 64-bit FNV-1a of a file's bytes, as hex (the manifest checksum).
std::string file_checksum(const std::string& path);

}  // namespace sasim
