#include "tdm/tdm_learner.hpp"

#include "tdm/errors.hpp"

namespace tdm {

namespace {

enum Stream : std::uint64_t { kInit = 1, kUpdates = 2, kEnv = 3, kAct = 4 };

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (updates_per_step < 1) throw ConfigError("updates_per_step must be >= 1");
  if (!(polyak >= 0.0 && polyak <= 1.0)) throw ConfigError("polyak must lie in [0, 1]");
  if (exploration_noise < 0.0) throw ConfigError("exploration_noise must be >= 0");
  if (!(critic_lr > 0.0) || !(actor_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (episodes < 0) throw ConfigError("episodes must be >= 0");
  if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be >= 1");
  if (!(reward_scale > 0.0)) throw ConfigError("reward_scale must be positive");
  if (future_window < 0) throw ConfigError("future_window must be >= 0");
  if (planner.candidates < 1) throw ConfigError("candidates must be >= 1");
  if (planner.k < 1) throw ConfigError("K must be >= 1");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden layer sizes must be positive");
}

TdmLearner::TdmLearner(const EnvSpec& spec, const TrainConfig& cfg, std::uint64_t seed)
    : TdmLearner(spec, cfg, TdmCritic{}, TdmActor{}, seed) {}

TdmLearner::TdmLearner(const EnvSpec& spec, const TrainConfig& cfg, TdmCritic critic, TdmActor actor,
                       std::uint64_t seed)
    : spec_(spec),
      cfg_(cfg),
      tau_max_(cfg.resolved_tau_max(spec)),
      rng_(derive_seed(seed, kUpdates)),
      buffer_(spec.state_dim, spec.action_dim, cfg.buffer_capacity) {
  cfg_.validate();
  if (critic.f.layers.empty()) {
    Rng init(derive_seed(seed, kInit));
    critic = make_critic(spec.state_dim, spec.action_dim, spec.goal_dim(), cfg.hidden, init, cfg.reward_scale);
    actor = make_actor(spec.state_dim, spec.goal_dim(), spec.action_bounds, cfg.hidden, init);
  }
  critic_ = std::move(critic);
  actor_ = std::move(actor);
  target_critic_ = critic_;
  target_actor_ = actor_;
  critic_opt_ = Adam::for_params(critic_.f);
  actor_opt_ = Adam::for_params(actor_.net);
  cfg_.planner.tau_cap = tau_max_;
}

void TdmLearner::set_policy(PolicyMode mode, const PlannerConfig& planner) {
  cfg_.policy = mode;
  cfg_.planner = planner;
  cfg_.planner.tau_cap = tau_max_;
}

Eigen::VectorXd TdmLearner::act(const Eigen::VectorXd& state, const Eigen::VectorXd& goal, int t, bool explore,
                                Rng& rng) const {
  const int remaining = spec_.horizon - t;
  Eigen::VectorXd a;
  switch (cfg_.policy) {
    case PolicyMode::kDirect:
      a = direct_policy(actor_, state, goal, planning_tau(spec_.horizon, t, tau_max_));
      break;
    case PolicyMode::kMpc:
      a = explicit_mpc(critic_, actor_, state, task_for(spec_, goal), remaining, cfg_.planner, spec_.goal_box, rng);
      break;
    case PolicyMode::kSkipK:
      a = skip_k_plan(critic_, actor_, state, task_for(spec_, goal), remaining, std::min(cfg_.planner.k, remaining),
                      cfg_.planner, spec_.goal_box, rng);
      break;
  }
  if (explore && cfg_.exploration_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, 1.0);
    const Eigen::VectorXd half = spec_.action_bounds.half_width();
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += cfg_.exploration_noise * half(i) * noise(rng);
  }
  return spec_.action_bounds.clip(a);
}

CriticStep TdmLearner::update() {
  const RelabeledBatch batch = buffer_.sample_relabeled(static_cast<std::size_t>(cfg_.batch_size), cfg_.relabel,
                                                        tau_max_, spec_, rng_, cfg_.future_window);
  const BellmanTargets targets = bellman_targets(target_critic_, target_actor_, batch);
  const CriticStep step = critic_update(critic_, batch, targets, critic_opt_, cfg_.supervision, cfg_.critic_lr);
  actor_update(actor_, critic_, batch, actor_opt_, cfg_.actor_lr);
  nn::polyak_update(target_critic_.f, critic_.f, cfg_.polyak);
  nn::polyak_update(target_actor_.net, actor_.net, cfg_.polyak);
  return step;
}

void TdmLearner::observe(const Transition& transition, const Eigen::VectorXd& /*goal*/) {
  buffer_.store(transition);
  for (int i = 0; i < cfg_.updates_per_step; ++i) {
    const CriticStep step = update();
    loss_sum_ += step.loss;
    q_sum_ += step.mean_q;
    ++update_count_;
  }
}

void TdmLearner::probe_non_positive() {
  if (buffer_.empty()) return;
  constexpr int kProbes = 16;
  const auto idx = buffer_.sample_indices(kProbes, rng_);
  Eigen::MatrixXd s, a, next;
  buffer_.gather(idx, s, a, next);
  Eigen::MatrixXd goals(spec_.goal_dim(), kProbes);
  std::vector<int> taus(kProbes);
  std::uniform_int_distribution<int> tau(0, tau_max_);
  for (int j = 0; j < kProbes; ++j) {
    goals.col(j) = spec_.goal_box.sample(rng_);
    taus[j] = tau(rng_);
  }
  if ((critic_.q(s, a, goals, taus).array() > 0.0).any()) throw std::logic_error("critic produced a positive q value");
}

EpisodeStats TdmLearner::finish_episode() {
  probe_non_positive();
  EpisodeStats stats;
  if (update_count_ > 0) {
    stats.mean_critic_loss = loss_sum_ / static_cast<double>(update_count_);
    stats.mean_q = q_sum_ / static_cast<double>(update_count_);
  }
  loss_sum_ = q_sum_ = 0.0;
  update_count_ = 0;
  return stats;
}

TrainResult train(const EnvSpec& spec, const TrainConfig& cfg, std::uint64_t seed) {
  TdmLearner learner(spec, cfg, seed);
  Rng env_rng(derive_seed(seed, kEnv));
  Rng act_rng(derive_seed(seed, kAct));
  auto log = run_training(spec, learner, {cfg.episodes, -1}, env_rng, act_rng);
  return {learner.critic(), learner.actor(), std::move(log)};
}

}  // namespace tdm
