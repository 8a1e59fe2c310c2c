#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <ostream>
#include <vector>

#include "tdm/env.hpp"
#include "tdm/replay.hpp"

namespace tdm {

/// Final goal distance below which an episode counts as "reached".
inline constexpr double kReachThreshold = 0.1;

struct EpisodeStats {
  double mean_critic_loss = 0.0;
  double mean_q = 0.0;
};

/// Interface shared by the TDM learner and the baselines so that one
/// episode loop drives all of them.
class Learner {
 public:
  virtual ~Learner() = default;
  /// Action at episode step t; `explore` adds training noise.
  virtual Eigen::VectorXd act(const Eigen::VectorXd& state, const Eigen::VectorXd& goal, int t, bool explore,
                              Rng& rng) const = 0;
  /// Store one environment transition and run the per-step updates.
  virtual void observe(const Transition& transition, const Eigen::VectorXd& goal) = 0;
  /// Statistics accumulated since the previous call.
  virtual EpisodeStats finish_episode() = 0;
};

struct EpisodeLogRow {
  int episode = 0;
  std::int64_t env_steps = 0;
  double final_distance = 0.0;
  bool reached = false;
  double mean_critic_loss = 0.0;
  double mean_q = 0.0;
};

void write_episode_header(std::ostream& os);
void write_episode_row(std::ostream& os, const EpisodeLogRow& row);

/// Negative values mean "unbounded"; the loop stops at whichever limit hits first.
struct TrainingBudget {
  int episodes = -1;
  std::int64_t env_steps = -1;
};

/// Called after every environment step with the running env-step count;
/// returning false stops training after the current step.
using StepHook = std::function<bool(std::int64_t env_steps)>;

std::vector<EpisodeLogRow> run_training(const EnvSpec& spec, Learner& learner, const TrainingBudget& budget,
                                        Rng& env_rng, Rng& act_rng, const StepHook& hook = {},
                                        std::ostream* log = nullptr);

struct EvalEpisode {
  double final_distance = 0.0;
  bool reached = false;
  int steps_to_reach = -1;  // first step count with distance below threshold, -1 if never
};

/// Noise-free rollouts. Goals and planner randomness come from `seed`.
std::vector<EvalEpisode> evaluate(const EnvSpec& spec, const Learner& learner, int episodes, std::uint64_t seed);

double median(std::vector<double> values);

}  // namespace tdm
