#pragma once

// Seeded multi-run experiments: periodic noise-free evaluation, per-seed and
// aggregate CSV curves, ablation sweeps and TDM checkpoints.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "tdm/config.hpp"
#include "tdm/oracle.hpp"

namespace tdm {

struct EvalPoint {
  std::int64_t env_steps = 0;
  std::int64_t eval_steps = 0;  // cumulative evaluation transitions, never counted in env_steps
  double median = 0.0;
  double mean = 0.0;
  double reached_fraction = 0.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<EvalPoint> curve;
  bool failed = false;
  std::string error;
  // Tabular environments: agreement of the one-hot critic with the exact table.
  bool tabular = false;
  TableComparison oracle;
};

/// One aggregate row. A seed that stopped early contributes its last value;
/// a failed seed contributes nothing after its last point.
struct AggregateRow {
  std::int64_t env_steps = 0;
  std::vector<double> per_seed;  // NaN where a seed has no value
  double median = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

struct ExperimentResult {
  std::vector<SeedResult> seeds;
  std::vector<AggregateRow> aggregate;
};

std::unique_ptr<Learner> make_learner(const ExperimentConfig& cfg, const EnvSpec& spec, std::uint64_t seed);

/// Trains and evaluates one seed. With a non-empty `dir`, writes
/// train_log.csv and eval.csv there (and a checkpoint for TDM runs). For a
/// tabular env it instead fits the one-hot critic and writes oracle.csv.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir);

/// Pure function of the per-seed curves.
std::vector<AggregateRow> aggregate(const std::vector<SeedResult>& seeds);

/// Validates, then runs every seed (concurrently up to cfg.workers) and writes
/// seed_<n>/ directories plus aggregate.csv under cfg.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// tau_max for tabular runs: the configured value, or num_states - 1 when unset.
int tabular_tau_max(const ExperimentConfig& cfg, const TabularMdp& mdp);

void write_eval_csv(std::ostream& os, const std::vector<EvalPoint>& curve);
void write_aggregate_csv(std::ostream& os, const std::vector<std::uint64_t>& seeds,
                         const std::vector<AggregateRow>& rows, const std::vector<SeedResult>& results);

/// First env_steps at which the value drops below `threshold`, or -1.
std::int64_t steps_to_threshold(const std::vector<EvalPoint>& curve, double threshold);
std::int64_t steps_to_threshold(const std::vector<AggregateRow>& rows, double threshold);

/// Keys accepted by run_ablation.
bool is_sweep_key(const std::string& key);

struct AblationResult {
  std::string key;
  std::vector<std::string> values;
  std::vector<ExperimentResult> runs;
};

/// One experiment per value under output_dir/<key>_<value>/, plus a long
/// CSV output_dir/ablation_<key>.csv.
AblationResult run_ablation(const ExperimentConfig& base, const std::string& key,
                            const std::vector<std::string>& values);

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  int episodes = 0;
  TdmCritic critic;
  TdmActor actor;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
/// Throws ConfigError when the manifest does not match the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace tdm
