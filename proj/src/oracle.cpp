#include "tdm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tdm/errors.hpp"

namespace tdm {

TdmTable::TdmTable(int num_states, int num_actions, int tau_max)
    : states_(num_states), actions_(num_actions), tau_max_(tau_max) {
  if (num_states < 1 || num_actions < 1) throw std::invalid_argument("table needs states and actions");
  if (tau_max < 0) throw std::invalid_argument("tau_max must be >= 0");
  data_.assign(static_cast<std::size_t>(num_states) * num_actions * num_states * (tau_max + 1), 0.0);
}

std::size_t TdmTable::index(int s, int a, int g, int tau) const {
  if (s < 0 || s >= states_ || g < 0 || g >= states_ || a < 0 || a >= actions_ || tau < 0 || tau > tau_max_)
    throw std::out_of_range("table index out of range");
  const auto T = static_cast<std::size_t>(tau_max_ + 1);
  return ((static_cast<std::size_t>(s) * actions_ + a) * states_ + g) * T + tau;
}

double TdmTable::max_over_actions(int s, int g, int tau) const {
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < actions_; ++a) best = std::max(best, at(s, a, g, tau));
  return best;
}

TdmTable dp_solve(const TabularMdp& mdp, int tau_max) {
  TdmTable q(mdp.num_states, mdp.num_actions, tau_max);
  for (int tau = 0; tau <= tau_max; ++tau)
    for (int s = 0; s < mdp.num_states; ++s)
      for (int a = 0; a < mdp.num_actions; ++a) {
        const int next = tabular_step(mdp, s, a);
        for (int g = 0; g < mdp.num_states; ++g)
          q.at(s, a, g, tau) = tau == 0 ? -mdp.distance(next, g) : q.max_over_actions(next, g, tau - 1);
      }
  return q;
}

void tabular_td_update(TdmTable& q, const TabularMdp& mdp, int s, int a, int g, int tau, double alpha) {
  const int next = tabular_step(mdp, s, a);
  const double target = tau == 0 ? -mdp.distance(next, g) : q.max_over_actions(next, g, tau - 1);
  double& cell = q.at(s, a, g, tau);
  cell += alpha * (target - cell);
}

TdmTable tabular_tdm_qlearning(const TabularMdp& mdp, int tau_max, const TabularLearningConfig& cfg, Rng& rng) {
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  TdmTable q(mdp.num_states, mdp.num_actions, tau_max);
  // Distinct (s, a) pairs only: with deterministic dynamics a repeat adds nothing.
  std::vector<std::pair<int, int>> replay;
  std::vector<bool> seen(static_cast<std::size_t>(mdp.num_states * mdp.num_actions), false);
  std::uniform_int_distribution<int> state_dist(0, mdp.num_states - 1);
  std::uniform_int_distribution<int> action_dist(0, mdp.num_actions - 1);
  std::uniform_int_distribution<int> tau_dist(0, tau_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    int s = state_dist(rng);
    const int goal = state_dist(rng);
    for (int t = 0; t < cfg.episode_length; ++t) {
      int a;
      if (unit(rng) < cfg.epsilon) {
        a = action_dist(rng);
      } else {
        const int tau = std::min(cfg.episode_length - t - 1, tau_max);
        a = 0;
        for (int b = 1; b < mdp.num_actions; ++b)
          if (q.at(s, b, goal, tau) > q.at(s, a, goal, tau)) a = b;
      }
      if (!seen[static_cast<std::size_t>(s * mdp.num_actions + a)]) {
        seen[static_cast<std::size_t>(s * mdp.num_actions + a)] = true;
        replay.emplace_back(s, a);
      }
      for (int u = 0; u < cfg.updates_per_step; ++u) {
        std::uniform_int_distribution<std::size_t> pick(0, replay.size() - 1);
        const auto [rs, ra] = replay[pick(rng)];
        tabular_td_update(q, mdp, rs, ra, state_dist(rng), tau_dist(rng), cfg.alpha);
      }
      s = tabular_step(mdp, s, a);
    }
  }
  return q;
}

namespace {

std::vector<int> argmax_set(const TdmTable& q, int s, int g, int tau, double tol) {
  const double best = q.max_over_actions(s, g, tau);
  std::vector<int> out;
  for (int a = 0; a < q.num_actions(); ++a)
    if (q.at(s, a, g, tau) >= best - tol) out.push_back(a);
  return out;
}

}  // namespace

TableComparison compare_tables(const TdmTable& a, const TdmTable& b, double tie_tol) {
  if (a.num_states() != b.num_states() || a.num_actions() != b.num_actions() || a.tau_max() != b.tau_max())
    throw ShapeError("compare_tables: table shapes differ");
  TableComparison out;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    out.max_abs = std::max(out.max_abs, std::abs(a.data()[i] - b.data()[i]));
  for (int s = 0; s < a.num_states(); ++s)
    for (int g = 0; g < a.num_states(); ++g)
      for (int tau = 0; tau <= a.tau_max(); ++tau) {
        const auto sa = argmax_set(a, s, g, tau, tie_tol);
        const auto sb = argmax_set(b, s, g, tau, tie_tol);
        const bool meet = std::any_of(sa.begin(), sa.end(),
                                      [&](int x) { return std::find(sb.begin(), sb.end(), x) != sb.end(); });
        if (!meet) ++out.argmax_mismatches;
      }
  return out;
}

// ---------------------------------------------------------------------------
// One-hot neural path

Eigen::MatrixXd one_hot(const std::vector<int>& ids, int n) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] < 0 || ids[j] >= n) throw std::out_of_range("one_hot id out of range");
    out(ids[j], static_cast<Eigen::Index>(j)) = 1.0;
  }
  return out;
}

namespace {

Eigen::MatrixXd embed(const TabularMdp& mdp, const std::vector<int>& ids) {
  Eigen::MatrixXd out(mdp.coordinate_dim(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = mdp.embedding.row(ids[j]).transpose();
  return out;
}

/// Vectorized targets with the max over the discrete action set.
BellmanTargets discrete_targets(const TdmCritic& target, const TabularMdp& mdp, const RelabeledBatch& batch) {
  const Eigen::Index m = batch.size();
  const int A = mdp.num_actions;
  BellmanTargets out;
  out.per_dim = (batch.achieved - batch.goals).cwiseAbs();

  std::vector<int> tau_prev(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) tau_prev[j] = std::max(batch.taus[j] - 1, 0);
  Eigen::MatrixXd best_f(target.goal_dim, m);
  Eigen::RowVectorXd best_q = Eigen::RowVectorXd::Constant(m, -std::numeric_limits<double>::infinity());
  for (int a = 0; a < A; ++a) {
    const Eigen::MatrixXd acts = one_hot(std::vector<int>(static_cast<std::size_t>(m), a), A);
    const Eigen::MatrixXd f = target.predict(batch.next_states, acts, batch.goals, tau_prev);
    const Eigen::RowVectorXd q = -(f - batch.goals).cwiseAbs().colwise().sum();
    for (Eigen::Index j = 0; j < m; ++j)
      if (q(j) > best_q(j)) {
        best_q(j) = q(j);
        best_f.col(j) = f.col(j);
      }
  }
  for (Eigen::Index j = 0; j < m; ++j)
    if (batch.taus[j] > 0) out.per_dim.col(j) = (best_f.col(j) - batch.goals.col(j)).cwiseAbs();
  out.scalar = -target.distance_scale * out.per_dim.colwise().sum();
  return out;
}

}  // namespace

TdmCritic train_tabular_critic(const TabularMdp& mdp, int tau_max, const NeuralTabularConfig& cfg,
                               std::uint64_t seed) {
  if (tau_max < 0) throw std::invalid_argument("tau_max must be >= 0");
  if (cfg.steps < 0 || cfg.batch_size < 1) throw ConfigError("invalid neural tabular config");
  Rng rng(derive_seed(seed, 1));
  TdmCritic critic = make_critic(mdp.num_states, mdp.num_actions, mdp.coordinate_dim(), cfg.hidden, rng);
  TdmCritic target = critic;
  Adam opt = Adam::for_params(critic.f);
  Rng data(derive_seed(seed, 2));
  std::uniform_int_distribution<int> state_dist(0, mdp.num_states - 1);
  std::uniform_int_distribution<int> action_dist(0, mdp.num_actions - 1);
  std::uniform_int_distribution<int> tau_dist(0, tau_max);

  const auto m = static_cast<std::size_t>(cfg.batch_size);
  std::vector<int> s(m), a(m), g(m), next(m);
  RelabeledBatch batch;
  batch.taus.resize(m);
  for (int step = 0; step < cfg.steps; ++step) {
    for (std::size_t j = 0; j < m; ++j) {
      s[j] = state_dist(data);
      a[j] = action_dist(data);
      g[j] = state_dist(data);
      batch.taus[j] = tau_dist(data);
      next[j] = tabular_step(mdp, s[j], a[j]);
    }
    batch.states = one_hot(s, mdp.num_states);
    batch.actions = one_hot(a, mdp.num_actions);
    batch.next_states = one_hot(next, mdp.num_states);
    batch.goals = embed(mdp, g);
    batch.achieved = embed(mdp, next);
    const BellmanTargets targets = discrete_targets(target, mdp, batch);
    critic_update(critic, batch, targets, opt, SupervisionMode::kVectorized, cfg.learning_rate);
    nn::polyak_update(target.f, critic.f, cfg.polyak);
  }
  return critic;
}

TdmTable critic_table(const TdmCritic& critic, const TabularMdp& mdp, int tau_max) {
  TdmTable table(mdp.num_states, mdp.num_actions, tau_max);
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a) {
      const auto n = static_cast<std::size_t>(mdp.num_states * (tau_max + 1));
      std::vector<int> ss(n, s), aa(n, a), gg(n), taus(n);
      for (int g = 0; g < mdp.num_states; ++g)
        for (int tau = 0; tau <= tau_max; ++tau) {
          const std::size_t j = static_cast<std::size_t>(g * (tau_max + 1) + tau);
          gg[j] = g;
          taus[j] = tau;
        }
      const Eigen::RowVectorXd q =
          critic.q(one_hot(ss, mdp.num_states), one_hot(aa, mdp.num_actions), embed(mdp, gg), taus);
      for (std::size_t j = 0; j < n; ++j) table.at(s, a, gg[j], taus[j]) = q(static_cast<Eigen::Index>(j));
    }
  return table;
}

// ---------------------------------------------------------------------------
// Planner adapter

namespace {

int decode(const Eigen::VectorXd& one_hot_col) {
  Eigen::Index i = 0;
  one_hot_col.maxCoeff(&i);
  return static_cast<int>(i);
}

int greedy_action(const TdmTable& q, int s, int g, int tau) {
  int best = 0;
  for (int a = 1; a < q.num_actions(); ++a)
    if (q.at(s, a, g, tau) > q.at(s, best, g, tau)) best = a;
  return best;
}

}  // namespace

int TabularTdmModel::goal_index(const Eigen::VectorXd& goal) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int s = 0; s < mdp_->num_states; ++s) {
    const double d = (mdp_->embedding.row(s).transpose() - goal).lpNorm<1>();
    if (d < best_d) {
      best_d = d;
      best = s;
    }
  }
  return best;
}

Eigen::MatrixXd TabularTdmModel::predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                                         const Eigen::MatrixXd& goals, const std::vector<int>& taus) const {
  const Eigen::Index n = states.cols();
  if (actions.cols() != n || goals.cols() != n || static_cast<Eigen::Index>(taus.size()) != n)
    throw ShapeError("tabular model: batch sizes differ");
  Eigen::MatrixXd out(mdp_->coordinate_dim(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int g = goal_index(goals.col(j));
    const int tau = std::min(taus[j], table_->tau_max());
    // Greedy rollout: its final distance is exactly -Q for an optimal table.
    int cur = tabular_step(*mdp_, decode(states.col(j)), decode(actions.col(j)));
    for (int k = tau - 1; k >= 0; --k) cur = tabular_step(*mdp_, cur, greedy_action(*table_, cur, g, k));
    out.col(j) = mdp_->embedding.row(cur).transpose();
  }
  return out;
}

Eigen::MatrixXd TabularTdmModel::act(const Eigen::MatrixXd& states, const Eigen::MatrixXd& goals,
                                     const std::vector<int>& taus) const {
  const Eigen::Index n = states.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(mdp_->num_actions, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int tau = std::min(taus[j], table_->tau_max());
    out(greedy_action(*table_, decode(states.col(j)), goal_index(goals.col(j)), tau), j) = 1.0;
  }
  return out;
}

}  // namespace tdm
