#pragma once

#include <cstdint>
#include <vector>

#include "tdm/control.hpp"
#include "tdm/learner.hpp"
#include "tdm/tdm.hpp"

namespace tdm {

struct TrainConfig {
  int batch_size = 128;
  int updates_per_step = 5;
  double polyak = 0.95;
  double exploration_noise = 0.1;  // std-dev as a fraction of the action half-range
  int tau_max = -1;                // < 0: horizon - 1
  double critic_lr = 1e-3;
  double actor_lr = 1e-3;
  int episodes = 0;
  SupervisionMode supervision = SupervisionMode::kVectorized;
  RelabelStrategy relabel = RelabelStrategy::kFutureOnTrajectory;
  int future_window = 0;
  std::vector<int> hidden = {64, 64};
  std::size_t buffer_capacity = 100000;
  double reward_scale = 1.0;
  PolicyMode policy = PolicyMode::kDirect;
  PlannerConfig planner;

  void validate() const;
  int resolved_tau_max(const EnvSpec& spec) const { return tau_max < 0 ? spec.horizon - 1 : tau_max; }
};

/// Algorithm state for one training run: online and target networks,
/// optimizer moments and the replay buffer.
class TdmLearner final : public Learner {
 public:
  TdmLearner(const EnvSpec& spec, const TrainConfig& cfg, std::uint64_t seed);
  /// Wraps existing networks (e.g. a loaded checkpoint).
  TdmLearner(const EnvSpec& spec, const TrainConfig& cfg, TdmCritic critic, TdmActor actor, std::uint64_t seed);

  Eigen::VectorXd act(const Eigen::VectorXd& state, const Eigen::VectorXd& goal, int t, bool explore,
                      Rng& rng) const override;
  void observe(const Transition& transition, const Eigen::VectorXd& goal) override;
  EpisodeStats finish_episode() override;

  /// One sample-relabel-target-update iteration; requires a nonempty buffer.
  CriticStep update();

  const TdmCritic& critic() const { return critic_; }
  const TdmActor& actor() const { return actor_; }
  const TdmCritic& target_critic() const { return target_critic_; }
  const TdmActor& target_actor() const { return target_actor_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const TrainConfig& config() const { return cfg_; }
  const EnvSpec& spec() const { return spec_; }
  int tau_max() const { return tau_max_; }
  void set_policy(PolicyMode mode, const PlannerConfig& planner);

 private:
  void probe_non_positive();

  EnvSpec spec_;
  TrainConfig cfg_;
  int tau_max_;
  Rng rng_;
  TdmCritic critic_;
  TdmActor actor_;
  TdmCritic target_critic_;
  TdmActor target_actor_;
  Adam critic_opt_;
  Adam actor_opt_;
  ReplayBuffer buffer_;
  double loss_sum_ = 0.0;
  double q_sum_ = 0.0;
  std::int64_t update_count_ = 0;
};

struct TrainResult {
  TdmCritic critic;
  TdmActor actor;
  std::vector<EpisodeLogRow> log;
};

/// Runs cfg.episodes episodes of noisy data collection with
/// cfg.updates_per_step relabeled updates after every environment step.
TrainResult train(const EnvSpec& spec, const TrainConfig& cfg, std::uint64_t seed);

}  // namespace tdm
