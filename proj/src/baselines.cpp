#include "tdm/baselines.hpp"

#include <cmath>
#include <iostream>

#include "tdm/errors.hpp"

namespace tdm {

namespace {

enum Stream : std::uint64_t { kInit = 1, kUpdates = 2, kEnv = 3, kAct = 4 };

Eigen::MatrixXd uniform_in(const Box& box, Eigen::Index n, Rng& rng) {
  Eigen::MatrixXd out(box.dim(), n);
  for (Eigen::Index j = 0; j < n; ++j) out.col(j) = box.sample(rng);
  return out;
}

void negate(Mlp& grad) {
  for (auto& l : grad.layers) {
    l.weight = -l.weight;
    l.bias = -l.bias;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Normalizer / dynamics model

int Normalizer::fit(const Eigen::MatrixXd& samples) {
  if (samples.cols() == 0) throw ShapeError("normalizer needs at least one sample");
  mean = samples.rowwise().mean();
  const Eigen::MatrixXd centered = samples.colwise() - mean;
  std = (centered.array().square().rowwise().sum() / static_cast<double>(samples.cols())).sqrt().matrix();
  int floored = 0;
  for (Eigen::Index i = 0; i < std.size(); ++i) {
    if (!(std(i) >= kStdFloor)) {
      std(i) = kStdFloor;
      ++floored;
    }
  }
  return floored;
}

Eigen::MatrixXd Normalizer::normalize(const Eigen::MatrixXd& x) const {
  if (x.rows() != mean.size()) throw ShapeError(shape_message("normalize", mean.size(), x.rows()));
  return ((x.colwise() - mean).array().colwise() / std.array()).matrix();
}

Eigen::MatrixXd Normalizer::denormalize(const Eigen::MatrixXd& z) const {
  if (z.rows() != mean.size()) throw ShapeError(shape_message("denormalize", mean.size(), z.rows()));
  return ((z.array().colwise() * std.array()).matrix()).colwise() + mean;
}

Eigen::MatrixXd DynamicsModel::predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const {
  if (states.cols() != actions.cols()) throw ShapeError(shape_message("dynamics batch", states.cols(), actions.cols()));
  Eigen::MatrixXd x(states.rows() + actions.rows(), states.cols());
  x << state.normalize(states), action.normalize(actions);
  return states + delta.denormalize(nn::forward(net, Eigen::Ref<const Eigen::MatrixXd>(x)));
}

Eigen::VectorXd DynamicsModel::predict(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  return predict(Eigen::MatrixXd(s), Eigen::MatrixXd(a)).col(0);
}

DynamicsModel make_dynamics_model(int state_dim, int action_dim, const std::vector<int>& hidden, Rng& rng) {
  DynamicsModel m;
  m.net = nn::make_mlp<double>(state_dim + action_dim, hidden, state_dim, nn::Activation::kLinear, rng);
  auto identity = [](int d) { return Normalizer{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)}; };
  m.state = identity(state_dim);
  m.action = identity(action_dim);
  m.delta = identity(state_dim);
  return m;
}

int fit_normalization(DynamicsModel& model, const ReplayBuffer& buffer) {
  std::vector<std::size_t> all(buffer.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  Eigen::MatrixXd s, a, next;
  buffer.gather(all, s, a, next);
  int floored = model.state.fit(s) + model.action.fit(a) + model.delta.fit(next - s);
  if (floored > 0)
    std::cerr << "warning: " << floored << " degenerate normalization dimension(s) floored at "
              << Normalizer::kStdFloor << '\n';
  return floored;
}

namespace {

struct DynamicsGrad {
  double loss;
  Mlp grad;
};

DynamicsGrad dynamics_loss_and_grad(const DynamicsModel& model, const Eigen::MatrixXd& states,
                                    const Eigen::MatrixXd& actions, const Eigen::MatrixXd& next_states) {
  const Eigen::Index m = states.cols();
  Eigen::MatrixXd x(states.rows() + actions.rows(), m);
  x << model.state.normalize(states), model.action.normalize(actions);
  nn::ForwardCache<double> cache;
  const Eigen::MatrixXd& out = nn::forward(model.net, Eigen::Ref<const Eigen::MatrixXd>(x), cache);
  const Eigen::MatrixXd err = out - model.delta.normalize(next_states - states);
  const double loss = err.squaredNorm() / static_cast<double>(m);
  if (!std::isfinite(loss)) throw NumericError("dynamics loss is not finite");
  const Eigen::MatrixXd upstream = (2.0 / static_cast<double>(m)) * err;
  auto g = nn::backward(model.net, cache, Eigen::Ref<const Eigen::MatrixXd>(upstream));
  return {loss, std::move(g.params)};
}

}  // namespace

double dynamics_loss(const DynamicsModel& model, const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                     const Eigen::MatrixXd& next_states) {
  Eigen::MatrixXd x(states.rows() + actions.rows(), states.cols());
  x << model.state.normalize(states), model.action.normalize(actions);
  const Eigen::MatrixXd err =
      nn::forward(model.net, Eigen::Ref<const Eigen::MatrixXd>(x)) - model.delta.normalize(next_states - states);
  return err.squaredNorm() / static_cast<double>(states.cols());
}

double fit_dynamics(DynamicsModel& model, const ReplayBuffer& buffer, int steps, int batch_size, Adam& opt,
                    double learning_rate, Rng& rng) {
  if (buffer.empty()) throw std::invalid_argument("fit_dynamics: empty buffer");
  double loss = 0.0;
  Eigen::MatrixXd s, a, next;
  for (int i = 0; i < steps; ++i) {
    buffer.gather(buffer.sample_indices(static_cast<std::size_t>(batch_size), rng), s, a, next);
    auto lg = dynamics_loss_and_grad(model, s, a, next);
    nn::adam_step(model.net, lg.grad, opt, learning_rate);
    loss = lg.loss;
  }
  return loss;
}

Eigen::VectorXd shooting_mpc(const DynamicsModel& model, const EnvSpec& spec, const Eigen::VectorXd& state,
                             const TaskReward& reward, const ShootingConfig& cfg, Rng& rng) {
  if (cfg.horizon < 1) throw std::invalid_argument("shooting_mpc: horizon must be >= 1");
  if (cfg.sequences < 1) throw std::invalid_argument("shooting_mpc: need at least one sequence");
  if (state.size() != spec.state_dim) throw ShapeError(shape_message("shooting state", spec.state_dim, state.size()));
  const Eigen::Index n = cfg.sequences;
  // Sequence j's actions are column j of each per-step draw.
  Eigen::MatrixXd states = state.replicate(1, n);
  Eigen::RowVectorXd score = Eigen::RowVectorXd::Zero(n);
  Eigen::MatrixXd first;
  for (int h = 0; h < cfg.horizon; ++h) {
    Eigen::MatrixXd actions = uniform_in(spec.action_bounds, n, rng);
    if (h == 0) first = actions;
    states = model.predict(states, actions);
    score += reward.evaluate(goal_map(spec, states));
  }
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < n; ++j)
    if (score(j) > score(best)) best = j;
  return first.col(best);
}

ModelBasedLearner::ModelBasedLearner(const EnvSpec& spec, const TrainConfig& base, const ModelBasedConfig& cfg,
                                     std::uint64_t seed)
    : spec_(spec),
      base_(base),
      cfg_(cfg),
      rng_(derive_seed(seed, kUpdates)),
      buffer_(spec.state_dim, spec.action_dim, base.buffer_capacity) {
  base_.validate();
  if (cfg_.warmup_rollouts < 1) throw ConfigError("warmup_rollouts must be >= 1");
  if (cfg_.shooting.horizon < 1 || cfg_.shooting.sequences < 1) throw ConfigError("shooting horizon and sequences must be >= 1");
  if (!(cfg_.learning_rate > 0.0)) throw ConfigError("model learning rate must be positive");
  Rng init(derive_seed(seed, kInit));
  model_ = make_dynamics_model(spec.state_dim, spec.action_dim, base.hidden, init);
  opt_ = Adam::for_params(model_.net);
}

Eigen::VectorXd ModelBasedLearner::act(const Eigen::VectorXd& state, const Eigen::VectorXd& goal, int /*t*/,
                                       bool /*explore*/, Rng& rng) const {
  if (!ready_) return spec_.action_bounds.sample(rng);
  return shooting_mpc(model_, spec_, state, task_for(spec_, goal), cfg_.shooting, rng);
}

void ModelBasedLearner::observe(const Transition& transition, const Eigen::VectorXd& /*goal*/) {
  buffer_.store(transition);
  if (!ready_) {
    const bool warmup_done =
        transition.trajectory + 1 >= cfg_.warmup_rollouts && transition.step + 1 >= spec_.horizon;
    if (!warmup_done) return;
    fit_normalization(model_, buffer_);
    ready_ = true;
  }
  loss_sum_ += fit_dynamics(model_, buffer_, 1, base_.batch_size, opt_, cfg_.learning_rate, rng_);
  ++update_count_;
}

EpisodeStats ModelBasedLearner::finish_episode() {
  EpisodeStats stats;
  if (update_count_ > 0) stats.mean_critic_loss = loss_sum_ / static_cast<double>(update_count_);
  loss_sum_ = 0.0;
  update_count_ = 0;
  return stats;
}

// ---------------------------------------------------------------------------
// DDPG

GoalReplayBuffer::GoalReplayBuffer(int state_dim, int action_dim, int goal_dim, std::size_t capacity)
    : capacity_(capacity),
      states_(state_dim, static_cast<Eigen::Index>(capacity)),
      actions_(action_dim, static_cast<Eigen::Index>(capacity)),
      next_states_(state_dim, static_cast<Eigen::Index>(capacity)),
      goals_(goal_dim, static_cast<Eigen::Index>(capacity)),
      rewards_(static_cast<Eigen::Index>(capacity)) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
}

void GoalReplayBuffer::store(const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                             const Eigen::VectorXd& next_state, const Eigen::VectorXd& goal, double reward) {
  if (state.size() != states_.rows()) throw ShapeError(shape_message("stored state", states_.rows(), state.size()));
  if (action.size() != actions_.rows()) throw ShapeError(shape_message("stored action", actions_.rows(), action.size()));
  if (next_state.size() != states_.rows())
    throw ShapeError(shape_message("stored next state", states_.rows(), next_state.size()));
  if (goal.size() != goals_.rows()) throw ShapeError(shape_message("stored goal", goals_.rows(), goal.size()));
  if (!state.allFinite() || !action.allFinite() || !next_state.allFinite() || !goal.allFinite() ||
      !std::isfinite(reward))
    throw NumericError("refusing to store a non-finite transition");
  const auto j = static_cast<Eigen::Index>(next_);
  states_.col(j) = state;
  actions_.col(j) = action;
  next_states_.col(j) = next_state;
  goals_.col(j) = goal;
  rewards_(j) = reward;
  next_ = (next_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

GoalReplayBuffer::Batch GoalReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (size_ == 0) throw std::invalid_argument("cannot sample from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  const auto m = static_cast<Eigen::Index>(batch_size);
  Batch b{Eigen::MatrixXd(states_.rows(), m), Eigen::MatrixXd(actions_.rows(), m),
          Eigen::MatrixXd(states_.rows(), m), Eigen::MatrixXd(goals_.rows(), m), Eigen::RowVectorXd(m)};
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto i = static_cast<Eigen::Index>(pick(rng));
    b.states.col(j) = states_.col(i);
    b.actions.col(j) = actions_.col(i);
    b.next_states.col(j) = next_states_.col(i);
    b.goals.col(j) = goals_.col(i);
    b.rewards(j) = rewards_(i);
  }
  return b;
}

Eigen::MatrixXd DdpgNetworks::act(const Eigen::MatrixXd& states, const Eigen::MatrixXd& goals) const {
  Eigen::MatrixXd x(state_dim + goal_dim, states.cols());
  x << states, goals;
  const Eigen::MatrixXd z = nn::forward(actor, Eigen::Ref<const Eigen::MatrixXd>(x));
  return (z.array().colwise() * bounds.half_width().array()).colwise() + bounds.center().array();
}

Eigen::RowVectorXd DdpgNetworks::q(const Eigen::MatrixXd& states, const Eigen::MatrixXd& goals,
                                   const Eigen::MatrixXd& actions) const {
  Eigen::MatrixXd x(state_dim + goal_dim + actions.rows(), states.cols());
  x << states, goals, actions;
  return nn::forward(critic, Eigen::Ref<const Eigen::MatrixXd>(x)).row(0);
}

Eigen::RowVectorXd ddpg_targets(const DdpgNetworks& target, const GoalReplayBuffer::Batch& batch, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (gamma == 0.0) return batch.rewards;
  const Eigen::MatrixXd next_actions = target.act(batch.next_states, batch.goals);
  return batch.rewards + gamma * target.q(batch.next_states, batch.goals, next_actions);
}

DdpgLearner::DdpgLearner(const EnvSpec& spec, const TrainConfig& base, const DdpgConfig& cfg, std::uint64_t seed)
    : spec_(spec),
      base_(base),
      cfg_(cfg),
      rng_(derive_seed(seed, kUpdates)),
      buffer_(spec.state_dim, spec.action_dim, spec.goal_dim(), base.buffer_capacity) {
  base_.validate();
  if (!(cfg_.gamma >= 0.0 && cfg_.gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  Rng init(derive_seed(seed, kInit));
  const int sd = spec.state_dim, gd = spec.goal_dim(), ad = spec.action_dim;
  online_.critic = nn::make_mlp<double>(sd + gd + ad, base.hidden, 1, nn::Activation::kLinear, init);
  online_.actor = nn::make_mlp<double>(sd + gd, base.hidden, ad, nn::Activation::kTanh, init, 0.1);
  online_.bounds = spec.action_bounds;
  online_.state_dim = sd;
  online_.goal_dim = gd;
  target_ = online_;
  critic_opt_ = Adam::for_params(online_.critic);
  actor_opt_ = Adam::for_params(online_.actor);
}

Eigen::VectorXd DdpgLearner::act(const Eigen::VectorXd& state, const Eigen::VectorXd& goal, int /*t*/, bool explore,
                                 Rng& rng) const {
  Eigen::VectorXd a = online_.act(Eigen::MatrixXd(state), Eigen::MatrixXd(goal)).col(0);
  if (explore && base_.exploration_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, 1.0);
    const Eigen::VectorXd half = spec_.action_bounds.half_width();
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += base_.exploration_noise * half(i) * noise(rng);
  }
  return spec_.action_bounds.clip(a);
}

void DdpgLearner::observe(const Transition& transition, const Eigen::VectorXd& goal) {
  const double reward =
      -base_.reward_scale * (goal_map(spec_, transition.next_state) - goal).lpNorm<1>();
  buffer_.store(transition.state, transition.action, transition.next_state, goal, reward);
  for (int i = 0; i < base_.updates_per_step; ++i) {
    loss_sum_ += update();
    ++update_count_;
  }
}

double DdpgLearner::update() { return update_on(buffer_.sample(static_cast<std::size_t>(base_.batch_size), rng_)); }

double DdpgLearner::update_on(const GoalReplayBuffer::Batch& batch) {
  const Eigen::Index m = batch.states.cols();
  const double inv_m = 1.0 / static_cast<double>(m);
  const Eigen::RowVectorXd y = ddpg_targets(target_, batch, cfg_.gamma);

  // Critic: mean (Q - y)^2.
  Eigen::MatrixXd xc(online_.state_dim + online_.goal_dim + batch.actions.rows(), m);
  xc << batch.states, batch.goals, batch.actions;
  nn::ForwardCache<double> cc;
  const Eigen::RowVectorXd q = nn::forward(online_.critic, Eigen::Ref<const Eigen::MatrixXd>(xc), cc).row(0);
  const Eigen::RowVectorXd err = q - y;
  const double loss = err.squaredNorm() * inv_m;
  if (!std::isfinite(loss)) throw NumericError("ddpg critic loss is not finite");
  const Eigen::MatrixXd d_q = 2.0 * inv_m * err;
  auto cg = nn::backward(online_.critic, cc, Eigen::Ref<const Eigen::MatrixXd>(d_q));
  nn::adam_step(online_.critic, cg.params, critic_opt_, base_.critic_lr);

  // Actor: ascend mean Q(s, g, pi(s, g)).
  Eigen::MatrixXd xa(online_.state_dim + online_.goal_dim, m);
  xa << batch.states, batch.goals;
  nn::ForwardCache<double> ac;
  const Eigen::MatrixXd& z = nn::forward(online_.actor, Eigen::Ref<const Eigen::MatrixXd>(xa), ac);
  const Eigen::VectorXd half = online_.bounds.half_width();
  const Eigen::MatrixXd actions = (z.array().colwise() * half.array()).colwise() + online_.bounds.center().array();
  xc << batch.states, batch.goals, actions;
  nn::ForwardCache<double> qc;
  const Eigen::RowVectorXd q_pi = nn::forward(online_.critic, Eigen::Ref<const Eigen::MatrixXd>(xc), qc).row(0);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(1, m, inv_m);
  const auto qg = nn::backward(online_.critic, qc, Eigen::Ref<const Eigen::MatrixXd>(ones));
  const Eigen::MatrixXd d_z =
      (qg.input.bottomRows(batch.actions.rows()).array().colwise() * half.array()).matrix();
  auto ag = nn::backward(online_.actor, ac, Eigen::Ref<const Eigen::MatrixXd>(d_z));
  negate(ag.params);
  nn::adam_step(online_.actor, ag.params, actor_opt_, base_.actor_lr);

  nn::polyak_update(target_.critic, online_.critic, base_.polyak);
  nn::polyak_update(target_.actor, online_.actor, base_.polyak);
  q_sum_ += q_pi.mean();
  return loss;
}

EpisodeStats DdpgLearner::finish_episode() {
  EpisodeStats stats;
  if (update_count_ > 0) {
    stats.mean_critic_loss = loss_sum_ / static_cast<double>(update_count_);
    stats.mean_q = q_sum_ / static_cast<double>(update_count_);
  }
  loss_sum_ = q_sum_ = 0.0;
  update_count_ = 0;
  return stats;
}

DdpgResult ddpg_train(const EnvSpec& spec, const TrainConfig& base, const DdpgConfig& cfg, std::uint64_t seed) {
  DdpgLearner learner(spec, base, cfg, seed);
  Rng env_rng(derive_seed(seed, kEnv));
  Rng act_rng(derive_seed(seed, kAct));
  auto log = run_training(spec, learner, {base.episodes, -1}, env_rng, act_rng);
  return {learner.networks(), std::move(log)};
}

}  // namespace tdm
