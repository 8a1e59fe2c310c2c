#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "tdm/baselines.hpp"
#include "tdm/tdm_learner.hpp"

namespace tdm {

enum class Algo { kTdm, kDdpg, kModelBasedMpc };

std::string to_string(Algo algo);
Algo parse_algo(const std::string& name);

/// Full description of an experiment. Text form is flat `key = value` lines
/// with `#` comments; every key has a default and unknown keys are rejected.
struct ExperimentConfig {
  std::string env = "pointmass";
  Algo algo = Algo::kTdm;
  int horizon = 50;
  TrainConfig tdm;
  DdpgConfig ddpg;
  ModelBasedConfig model_based;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::int64_t env_steps = 50000;
  std::int64_t eval_cadence = 1000;
  int eval_episodes = 10;
  double stop_at_distance = 0.0;  // > 0: stop a seed once its eval median drops below
  int tabular_steps = 50000;      // gradient steps when env names a tabular MDP
  int workers = 0;                // 0: hardware concurrency
  std::string output_dir = "runs/default";

  void set(const std::string& key, const std::string& value);
  void validate() const;
  std::string to_text() const;
  std::uint64_t hash() const;
  bool is_tabular() const;
};

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);

/// All keys accepted by ExperimentConfig::set.
const std::vector<std::string>& config_keys();

}  // namespace tdm
