#include "tdm/tdm.hpp"

#include <sstream>

#include "tdm/errors.hpp"

namespace tdm {

namespace {

Eigen::ArrayXXd sign(const Eigen::MatrixXd& x) {
  return (x.array() > 0.0).cast<double>() - (x.array() < 0.0).cast<double>();
}

void check_columns(Eigen::Index expected, Eigen::Index actual, const char* what) {
  if (expected != actual) throw ShapeError(shape_message(what, expected, actual));
}

void check_taus(const std::vector<int>& taus) {
  for (int t : taus)
    if (t < 0) throw std::invalid_argument("horizon tau must be >= 0, got " + std::to_string(t));
}

Eigen::RowVectorXd tau_row(const std::vector<int>& taus) {
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(taus.size()));
  for (std::size_t j = 0; j < taus.size(); ++j) row(static_cast<Eigen::Index>(j)) = taus[j];
  return row;
}

}  // namespace

std::string to_string(SupervisionMode mode) { return mode == SupervisionMode::kScalar ? "scalar" : "vectorized"; }

SupervisionMode parse_supervision_mode(const std::string& name) {
  if (name == "scalar") return SupervisionMode::kScalar;
  if (name == "vectorized") return SupervisionMode::kVectorized;
  throw ConfigError("unknown supervision mode '" + name + "' (expected scalar|vectorized)");
}

Eigen::MatrixXd TdmCritic::input(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                                 const Eigen::MatrixXd& goals, const std::vector<int>& taus) const {
  check_columns(state_dim, states.rows(), "critic state");
  check_columns(action_dim, actions.rows(), "critic action");
  check_columns(goal_dim, goals.rows(), "critic goal");
  const Eigen::Index n = states.cols();
  check_columns(n, actions.cols(), "critic batch (actions)");
  check_columns(n, goals.cols(), "critic batch (goals)");
  check_columns(n, static_cast<Eigen::Index>(taus.size()), "critic batch (taus)");
  check_taus(taus);
  Eigen::MatrixXd x(state_dim + action_dim + goal_dim + 1, n);
  x << states, actions, goals, tau_row(taus);
  return x;
}

Eigen::MatrixXd TdmCritic::predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                                   const Eigen::MatrixXd& goals, const std::vector<int>& taus) const {
  return nn::forward(f, Eigen::Ref<const Eigen::MatrixXd>(input(states, actions, goals, taus)));
}

Eigen::RowVectorXd TdmCritic::q(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                                const Eigen::MatrixXd& goals, const std::vector<int>& taus) const {
  return -distance_scale * (predict(states, actions, goals, taus) - goals).cwiseAbs().colwise().sum();
}

Eigen::MatrixXd TdmActor::input(const Eigen::MatrixXd& states, const Eigen::MatrixXd& goals,
                                const std::vector<int>& taus) const {
  check_columns(state_dim, states.rows(), "actor state");
  check_columns(goal_dim, goals.rows(), "actor goal");
  const Eigen::Index n = states.cols();
  check_columns(n, goals.cols(), "actor batch (goals)");
  check_columns(n, static_cast<Eigen::Index>(taus.size()), "actor batch (taus)");
  check_taus(taus);
  Eigen::MatrixXd x(state_dim + goal_dim + 1, n);
  x << states, goals, tau_row(taus);
  return x;
}

Eigen::MatrixXd TdmActor::act(const Eigen::MatrixXd& states, const Eigen::MatrixXd& goals,
                              const std::vector<int>& taus) const {
  Eigen::MatrixXd z = nn::forward(net, Eigen::Ref<const Eigen::MatrixXd>(input(states, goals, taus)));
  return (z.array().colwise() * bounds.half_width().array()).colwise() + bounds.center().array();
}

Eigen::VectorXd TdmActor::act(const Eigen::VectorXd& state, const Eigen::VectorXd& goal, int tau) const {
  return act(Eigen::MatrixXd(state), Eigen::MatrixXd(goal), std::vector<int>{tau}).col(0);
}

TdmCritic make_critic(int state_dim, int action_dim, int goal_dim, const std::vector<int>& hidden, Rng& rng,
                      double distance_scale) {
  TdmCritic c;
  c.state_dim = state_dim;
  c.action_dim = action_dim;
  c.goal_dim = goal_dim;
  c.distance_scale = distance_scale;
  c.f = nn::make_mlp<double>(state_dim + action_dim + goal_dim + 1, hidden, goal_dim, nn::Activation::kLinear, rng, 0.1);
  return c;
}

TdmActor make_actor(int state_dim, int goal_dim, const Box& action_bounds, const std::vector<int>& hidden, Rng& rng) {
  TdmActor a;
  a.state_dim = state_dim;
  a.goal_dim = goal_dim;
  a.bounds = action_bounds;
  a.net = nn::make_mlp<double>(state_dim + goal_dim + 1, hidden, static_cast<int>(action_bounds.dim()),
                               nn::Activation::kTanh, rng, 0.1);
  return a;
}

TdmValue tdm_value(const TdmCritic& critic, const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                   const Eigen::VectorXd& goal, int tau) {
  if (tau < 0) throw std::invalid_argument("tdm_value: tau must be >= 0");
  const Eigen::VectorXd f =
      critic.predict(Eigen::MatrixXd(state), Eigen::MatrixXd(action), Eigen::MatrixXd(goal), {tau}).col(0);
  TdmValue v;
  v.per_dim = (f - goal).cwiseAbs();
  v.q = -critic.distance_scale * v.per_dim.sum();
  return v;
}

BellmanTargets bellman_targets(const TdmCritic& target_critic, const TdmActor& target_actor,
                               const RelabeledBatch& batch) {
  const Eigen::Index m = batch.size();
  check_taus(batch.taus);
  BellmanTargets out;
  out.per_dim.resize(target_critic.goal_dim, m);

  std::vector<Eigen::Index> boot;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (batch.taus[j] == 0)
      out.per_dim.col(j) = (batch.achieved.col(j) - batch.goals.col(j)).cwiseAbs();
    else
      boot.push_back(j);
  }
  if (!boot.empty()) {
    const auto n = static_cast<Eigen::Index>(boot.size());
    Eigen::MatrixXd s(batch.next_states.rows(), n), g(batch.goals.rows(), n);
    std::vector<int> taus(boot.size());
    for (Eigen::Index k = 0; k < n; ++k) {
      s.col(k) = batch.next_states.col(boot[k]);
      g.col(k) = batch.goals.col(boot[k]);
      taus[k] = batch.taus[boot[k]] - 1;
    }
    const Eigen::MatrixXd a = target_actor.act(s, g, taus);
    const Eigen::MatrixXd d = (target_critic.predict(s, a, g, taus) - g).cwiseAbs();
    for (Eigen::Index k = 0; k < n; ++k) out.per_dim.col(boot[k]) = d.col(k);
  }
  out.scalar = -target_critic.distance_scale * out.per_dim.colwise().sum();
  return out;
}

LossAndGrad critic_loss_and_grad(const TdmCritic& critic, const RelabeledBatch& batch, const BellmanTargets& targets,
                                 SupervisionMode mode) {
  const Eigen::Index m = batch.size();
  check_columns(m, targets.scalar.size(), "critic targets");
  nn::ForwardCache<double> cache;
  const Eigen::MatrixXd x = critic.input(batch.states, batch.actions, batch.goals, batch.taus);
  const Eigen::MatrixXd& f = nn::forward(critic.f, Eigen::Ref<const Eigen::MatrixXd>(x), cache);
  const Eigen::MatrixXd diff = f - batch.goals;
  const Eigen::ArrayXXd sgn = sign(diff);
  const double scale = critic.distance_scale;
  const double inv_m = 1.0 / static_cast<double>(m);

  Eigen::MatrixXd upstream;
  double loss = 0.0;
  Eigen::RowVectorXd row_loss;
  const Eigen::RowVectorXd q = -scale * diff.cwiseAbs().colwise().sum();
  if (mode == SupervisionMode::kScalar) {
    const Eigen::RowVectorXd err = q - targets.scalar;
    row_loss = err.array().square();
    upstream = (sgn.rowwise() * (-2.0 * scale * inv_m * err.array())).matrix();
  } else {
    check_columns(critic.goal_dim, targets.per_dim.rows(), "vector targets");
    const Eigen::ArrayXXd err = scale * (diff.cwiseAbs() - targets.per_dim).array();
    row_loss = err.square().colwise().sum().matrix();
    upstream = (2.0 * scale * inv_m * err * sgn).matrix();
  }
  loss = row_loss.mean();
  if (!std::isfinite(loss)) {
    Eigen::Index bad = 0;
    for (; bad < m; ++bad)
      if (!std::isfinite(row_loss(bad))) break;
    std::ostringstream msg;
    msg << "critic loss is not finite (batch row " << bad;
    if (bad < m)
      msg << ", tau " << batch.taus[bad] << ", target " << targets.scalar(bad) << ", f " << f.col(bad).transpose()
          << ", goal " << batch.goals.col(bad).transpose();
    msg << ")";
    throw NumericError(msg.str());
  }
  return {loss, nn::backward(critic.f, cache, Eigen::Ref<const Eigen::MatrixXd>(upstream)).params, q.mean()};
}

LossAndGrad actor_objective_and_grad(const TdmActor& actor, const TdmCritic& critic, const RelabeledBatch& batch) {
  const Eigen::Index m = batch.size();
  nn::ForwardCache<double> actor_cache, critic_cache;
  const Eigen::MatrixXd xa = actor.input(batch.states, batch.goals, batch.taus);
  const Eigen::MatrixXd& z = nn::forward(actor.net, Eigen::Ref<const Eigen::MatrixXd>(xa), actor_cache);
  const Eigen::VectorXd half = actor.bounds.half_width();
  const Eigen::MatrixXd actions = (z.array().colwise() * half.array()).colwise() + actor.bounds.center().array();

  const Eigen::MatrixXd xc = critic.input(batch.states, actions, batch.goals, batch.taus);
  const Eigen::MatrixXd& f = nn::forward(critic.f, Eigen::Ref<const Eigen::MatrixXd>(xc), critic_cache);
  const Eigen::MatrixXd diff = f - batch.goals;
  const double scale = critic.distance_scale;
  const double objective = -scale * diff.cwiseAbs().sum() / static_cast<double>(m);
  if (!std::isfinite(objective)) throw NumericError("actor objective is not finite");

  const Eigen::MatrixXd d_f = (-scale / static_cast<double>(m)) * sign(diff).matrix();
  const auto critic_grad = nn::backward(critic.f, critic_cache, Eigen::Ref<const Eigen::MatrixXd>(d_f));
  const Eigen::MatrixXd d_z =
      (critic_grad.input.middleRows(critic.state_dim, critic.action_dim).array().colwise() * half.array()).matrix();
  auto actor_grad = nn::backward(actor.net, actor_cache, Eigen::Ref<const Eigen::MatrixXd>(d_z));
  if (!actor_grad.params.all_finite()) throw NumericError("actor gradient is not finite");
  return {objective, std::move(actor_grad.params), objective};
}

CriticStep critic_update(TdmCritic& critic, const RelabeledBatch& batch, const BellmanTargets& targets, Adam& opt,
                         SupervisionMode mode, double learning_rate) {
  auto lg = critic_loss_and_grad(critic, batch, targets, mode);
  nn::adam_step(critic.f, lg.grad, opt, learning_rate);
  return {lg.value, lg.mean_q};
}

double actor_update(TdmActor& actor, const TdmCritic& critic, const RelabeledBatch& batch, Adam& opt,
                    double learning_rate) {
  auto lg = actor_objective_and_grad(actor, critic, batch);
  for (auto& l : lg.grad.layers) {
    l.weight = -l.weight;
    l.bias = -l.bias;
  }
  nn::adam_step(actor.net, lg.grad, opt, learning_rate);
  return lg.value;
}

}  // namespace tdm
