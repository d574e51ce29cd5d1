#pragma once

// Experiment configuration: a flat "section.key = value" document with '#'
// comments. Every key has a documented default and unknown keys are errors.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "latpred/features.hpp"
#include "latpred/model.hpp"
#include "latpred/sim.hpp"
#include "latpred/system_model.hpp"
#include "latpred/train.hpp"

namespace latpred {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = 1;
  WorkloadSpec workload;
  MicroarchConfig sim;
  SimOptions sim_options;
  WindowConfig window;
  TargetConfig target;
  ModelConfig model;
  TrainSpec train;
  ExactDeploymentParams deploy;
  std::string deploy_preset;  // empty: none
  double gpu_power_w = 0.0;   // 0: efficiency ratio not reported
  std::string out_dir = ".";
  bool fp16_checkpoint = false;
};

struct ConfigKey {
  std::string key;
  std::string default_value;
  std::string help;
};

/// All recognized keys with their defaults, in documentation order.
std::vector<ConfigKey> config_keys();

/// Parses "key = value" lines; blank lines and '#' comments are ignored.
std::map<std::string, std::string> parse_kv_text(const std::string& text);

/// Applies key/value pairs on top of `base`. `sim.preset` is applied before
/// any other sim.* key. Throws ConfigError for unknown keys or bad values.
RunConfig apply_config(const std::map<std::string, std::string>& kv, RunConfig base = {});

RunConfig load_run_config(const std::string& path, RunConfig base = {});

/// Seeds for each stage, split from the root seed.
struct StageSeeds {
  std::uint64_t workload;
  std::uint64_t train;
};
StageSeeds stage_seeds(std::uint64_t root);

}  // namespace latpred
