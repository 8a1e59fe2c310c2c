#pragma once

// Policy extraction from a trained goal-conditioned model: acting with the
// actor directly, or choosing a terminal goal by candidate sampling and
// scoring the model's predicted outcome under the task reward.

#include <Eigen/Core>

#include <concepts>
#include <limits>
#include <string>
#include <vector>

#include "tdm/env.hpp"

namespace tdm {

/// Critic-like model exposing the goal-space prediction f(s, a, g, tau).
template <typename M>
concept GoalConditionedModel = requires(const M& m, const Eigen::MatrixXd& x, const std::vector<int>& taus) {
  { m.predict(x, x, x, taus) } -> std::convertible_to<Eigen::MatrixXd>;
};

/// Actor-like policy a = pi(s, g, tau).
template <typename P>
concept GoalConditionedPolicy = requires(const P& p, const Eigen::MatrixXd& x, const std::vector<int>& taus) {
  { p.act(x, x, taus) } -> std::convertible_to<Eigen::MatrixXd>;
};

/// Terminal task reward r_c(g) = -sum over fixed components |g_j - target_j|.
/// Free components are left to the planner.
struct TaskReward {
  Eigen::VectorXd target;
  std::vector<bool> fixed;

  static TaskReward goal_reaching(const Eigen::VectorXd& goal);
  static TaskReward feature_target(const Eigen::VectorXd& goal, const std::vector<int>& fixed_components);

  int free_count() const;
  double operator()(const Eigen::VectorXd& goal_space) const;
  Eigen::RowVectorXd evaluate(const Eigen::MatrixXd& goal_space) const;
};

/// Task reward implied by an environment: its task components are fixed.
TaskReward task_for(const EnvSpec& spec, const Eigen::VectorXd& goal);

enum class PolicyMode { kDirect, kMpc, kSkipK };

std::string to_string(PolicyMode mode);
PolicyMode parse_policy_mode(const std::string& name);

struct PlannerConfig {
  int candidates = 1024;
  int tau_cap = -1;  // < 0: no cap
  int k = 1;
};

/// Horizon fed to the networks at episode step t: min(T - t - 1, tau_max).
int planning_tau(int horizon, int t, int tau_max);

template <GoalConditionedPolicy Actor>
Eigen::VectorXd direct_policy(const Actor& actor, const Eigen::VectorXd& state, const Eigen::VectorXd& goal, int tau) {
  if (tau < 0) throw std::invalid_argument("direct_policy: tau must be >= 0");
  return actor.act(Eigen::MatrixXd(state), Eigen::MatrixXd(goal), std::vector<int>{tau}).col(0);
}

namespace detail {

inline int capped(int tau, const PlannerConfig& cfg) { return cfg.tau_cap >= 0 ? std::min(tau, cfg.tau_cap) : tau; }

/// Candidate i depends only on the first i draws of `rng`, so a larger
/// candidate count always contains the smaller search as a prefix.
template <GoalConditionedModel Critic, GoalConditionedPolicy Actor>
Eigen::VectorXd plan_terminal_goal(const Critic& critic, const Actor& actor, const Eigen::VectorXd& state,
                                   const TaskReward& task, int tau, const PlannerConfig& cfg, const Box& goal_box,
                                   Rng& rng) {
  if (cfg.candidates < 1) throw std::invalid_argument("planner needs at least one candidate");
  const Eigen::Index dim = task.target.size();
  const Eigen::Index n = task.free_count() == 0 ? 1 : cfg.candidates;
  Eigen::MatrixXd goals(dim, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (task.fixed[j]) {
        goals(j, c) = task.target(j);
      } else {
        std::uniform_real_distribution<double> u(goal_box.lo(j), goal_box.hi(j));
        goals(j, c) = u(rng);
      }
    }
  }
  const Eigen::MatrixXd states = state.replicate(1, n);
  const std::vector<int> taus(static_cast<std::size_t>(n), tau);
  const Eigen::MatrixXd actions = actor.act(states, goals, taus);
  const Eigen::RowVectorXd scores = task.evaluate(critic.predict(states, actions, goals, taus));
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < n; ++c)
    if (scores(c) > scores(best)) best = c;
  return actions.col(best);
}

}  // namespace detail

/// Single effective step: pick the terminal goal whose predicted outcome
/// after T_remaining - 1 further steps scores best under the task reward.
template <GoalConditionedModel Critic, GoalConditionedPolicy Actor>
Eigen::VectorXd explicit_mpc(const Critic& critic, const Actor& actor, const Eigen::VectorXd& state,
                             const TaskReward& task, int t_remaining, const PlannerConfig& cfg, const Box& goal_box,
                             Rng& rng) {
  if (t_remaining < 1) throw std::invalid_argument("explicit_mpc: remaining horizon must be >= 1");
  return detail::plan_terminal_goal(critic, actor, state, task, detail::capped(t_remaining - 1, cfg), cfg, goal_box,
                                    rng);
}

/// Plans only the first K-step segment toward the best-scoring waypoint and
/// returns its first action; called again every step.
template <GoalConditionedModel Critic, GoalConditionedPolicy Actor>
Eigen::VectorXd skip_k_plan(const Critic& critic, const Actor& actor, const Eigen::VectorXd& state,
                            const TaskReward& task, int t_remaining, int k, const PlannerConfig& cfg,
                            const Box& goal_box, Rng& rng) {
  if (k < 1 || k > t_remaining)
    throw std::invalid_argument("skip_k_plan: K=" + std::to_string(k) + " outside [1, " + std::to_string(t_remaining) +
                                "]");
  return detail::plan_terminal_goal(critic, actor, state, task, detail::capped(k - 1, cfg), cfg, goal_box, rng);
}

}  // namespace tdm
