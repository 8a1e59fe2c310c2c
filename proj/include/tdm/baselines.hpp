#pragma once

// Comparison learners: a learned forward-dynamics model driven by
// random-shooting MPC, and goal-as-input DDPG on a dense distance reward
// without any relabeling.

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "tdm/control.hpp"
#include "tdm/learner.hpp"
#include "tdm/tdm_learner.hpp"

namespace tdm {

// ---------------------------------------------------------------------------
// Model-based baseline

/// Per-dimension affine normalization; std is floored at 1e-6.
struct Normalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  static constexpr double kStdFloor = 1e-6;

  /// Fits mean/std over columns; returns the number of floored dimensions.
  int fit(const Eigen::MatrixXd& samples);
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd denormalize(const Eigen::MatrixXd& z) const;
};

/// Predicts the normalized state difference from normalized (s, a).
struct DynamicsModel {
  Mlp net;
  Normalizer state;
  Normalizer action;
  Normalizer delta;

  Eigen::MatrixXd predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const;
  Eigen::VectorXd predict(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const;
};

DynamicsModel make_dynamics_model(int state_dim, int action_dim, const std::vector<int>& hidden, Rng& rng);

/// Fits the normalizers to everything currently in `buffer`. Returns the
/// number of degenerate (floored) dimensions.
int fit_normalization(DynamicsModel& model, const ReplayBuffer& buffer);

/// Mean squared error in normalized-difference space on the given transitions.
double dynamics_loss(const DynamicsModel& model, const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                     const Eigen::MatrixXd& next_states);

/// `steps` Adam steps, each on a fresh size-`batch_size` minibatch. Returns
/// the loss before the last step.
double fit_dynamics(DynamicsModel& model, const ReplayBuffer& buffer, int steps, int batch_size, Adam& opt,
                    double learning_rate, Rng& rng);

struct ShootingConfig {
  int horizon = 15;
  int sequences = 512;
};

/// Samples action sequences uniformly in the action box, rolls them through
/// the model summing the task reward of each goal-mapped predicted state, and
/// returns the first action of the best sequence (lowest index on ties).
Eigen::VectorXd shooting_mpc(const DynamicsModel& model, const EnvSpec& spec, const Eigen::VectorXd& state,
                             const TaskReward& reward, const ShootingConfig& cfg, Rng& rng);

struct ModelBasedConfig {
  ShootingConfig shooting;
  int warmup_rollouts = 20;
  double learning_rate = 1e-3;
};

class ModelBasedLearner final : public Learner {
 public:
  ModelBasedLearner(const EnvSpec& spec, const TrainConfig& base, const ModelBasedConfig& cfg, std::uint64_t seed);

  Eigen::VectorXd act(const Eigen::VectorXd& state, const Eigen::VectorXd& goal, int t, bool explore,
                      Rng& rng) const override;
  void observe(const Transition& transition, const Eigen::VectorXd& goal) override;
  EpisodeStats finish_episode() override;

  bool ready() const { return ready_; }
  const DynamicsModel& model() const { return model_; }
  const ReplayBuffer& buffer() const { return buffer_; }

 private:
  EnvSpec spec_;
  TrainConfig base_;
  ModelBasedConfig cfg_;
  Rng rng_;
  DynamicsModel model_;
  Adam opt_;
  ReplayBuffer buffer_;
  bool ready_ = false;
  double loss_sum_ = 0.0;
  std::int64_t update_count_ = 0;
};

// ---------------------------------------------------------------------------
// DDPG baseline

struct DdpgConfig {
  double gamma = 0.99;
};

/// Transitions with the goal fixed at collection time. There is no
/// relabeling path and no horizon anywhere in this buffer.
class GoalReplayBuffer {
 public:
  GoalReplayBuffer(int state_dim, int action_dim, int goal_dim, std::size_t capacity);

  void store(const Eigen::VectorXd& state, const Eigen::VectorXd& action, const Eigen::VectorXd& next_state,
             const Eigen::VectorXd& goal, double reward);
  std::size_t size() const { return size_; }

  struct Batch {
    Eigen::MatrixXd states, actions, next_states, goals;
    Eigen::RowVectorXd rewards;
  };
  Batch sample(std::size_t batch_size, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t next_ = 0;
  Eigen::MatrixXd states_, actions_, next_states_, goals_;
  Eigen::RowVectorXd rewards_;
};

/// Q(s, g, a) with a linear scalar head; the actor maps (s, g) to actions.
struct DdpgNetworks {
  Mlp critic;
  Mlp actor;
  Box bounds;
  int state_dim = 0;
  int goal_dim = 0;

  Eigen::MatrixXd act(const Eigen::MatrixXd& states, const Eigen::MatrixXd& goals) const;
  Eigen::RowVectorXd q(const Eigen::MatrixXd& states, const Eigen::MatrixXd& goals, const Eigen::MatrixXd& actions) const;
};

/// y = r + gamma * Q'(s', g, pi'(s', g)).
Eigen::RowVectorXd ddpg_targets(const DdpgNetworks& target, const GoalReplayBuffer::Batch& batch, double gamma);

class DdpgLearner final : public Learner {
 public:
  DdpgLearner(const EnvSpec& spec, const TrainConfig& base, const DdpgConfig& cfg, std::uint64_t seed);

  Eigen::VectorXd act(const Eigen::VectorXd& state, const Eigen::VectorXd& goal, int t, bool explore,
                      Rng& rng) const override;
  void observe(const Transition& transition, const Eigen::VectorXd& goal) override;
  EpisodeStats finish_episode() override;

  /// One critic + actor + target update on a sampled batch; returns the critic loss.
  double update();
  double update_on(const GoalReplayBuffer::Batch& batch);

  const DdpgNetworks& networks() const { return online_; }
  const DdpgNetworks& target_networks() const { return target_; }

 private:
  EnvSpec spec_;
  TrainConfig base_;
  DdpgConfig cfg_;
  Rng rng_;
  DdpgNetworks online_;
  DdpgNetworks target_;
  Adam critic_opt_;
  Adam actor_opt_;
  GoalReplayBuffer buffer_;
  double loss_sum_ = 0.0;
  double q_sum_ = 0.0;
  std::int64_t update_count_ = 0;
};

struct DdpgResult {
  DdpgNetworks networks;
  std::vector<EpisodeLogRow> log;
};

/// base.episodes episodes of noisy collection with base.updates_per_step
/// updates after every environment step.
DdpgResult ddpg_train(const EnvSpec& spec, const TrainConfig& base, const DdpgConfig& cfg, std::uint64_t seed);

}  // namespace tdm
