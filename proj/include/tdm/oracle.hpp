#pragma once

// Exact ground truth for the horizon-conditioned recursion on finite
// deterministic MDPs, plus a tabular learner and a one-hot neural learner
// whose tables can be compared against it.

#include <cstdint>
#include <vector>

#include "tdm/env.hpp"
#include "tdm/tdm.hpp"

namespace tdm {

/// Q[s][a][g][tau] for tau in 0..tau_max; goals range over all states.
class TdmTable {
 public:
  TdmTable() = default;
  TdmTable(int num_states, int num_actions, int tau_max);

  double& at(int s, int a, int g, int tau) { return data_[index(s, a, g, tau)]; }
  double at(int s, int a, int g, int tau) const { return data_[index(s, a, g, tau)]; }

  int num_states() const { return states_; }
  int num_actions() const { return actions_; }
  int tau_max() const { return tau_max_; }
  const std::vector<double>& data() const { return data_; }

  double max_over_actions(int s, int g, int tau) const;

 private:
  std::size_t index(int s, int a, int g, int tau) const;

  int states_ = 0;
  int actions_ = 0;
  int tau_max_ = -1;
  std::vector<double> data_;
};

/// Backward induction: layer 0 from distances, layer tau from the best
/// action of layer tau-1 at the deterministic next state.
TdmTable dp_solve(const TabularMdp& mdp, int tau_max);

/// One in-place TD update of a single cell against the current table.
void tabular_td_update(TdmTable& q, const TabularMdp& mdp, int s, int a, int g, int tau, double alpha);

struct TabularLearningConfig {
  int episodes = 5000;
  int episode_length = 20;
  int updates_per_step = 8;  // relabeled replay updates after every step
  double alpha = 0.5;
  double epsilon = 0.3;
};

/// Epsilon-greedy data collection toward a random goal per episode into a
/// replay of distinct transitions; every replayed transition is relabeled
/// with a uniform goal and tau.
TdmTable tabular_tdm_qlearning(const TabularMdp& mdp, int tau_max, const TabularLearningConfig& cfg, Rng& rng);

struct TableComparison {
  double max_abs = 0.0;
  int argmax_mismatches = 0;
};

/// Greedy sets are compared with tie tolerance `tie_tol`; two cells match
/// when their argmax sets intersect.
TableComparison compare_tables(const TdmTable& a, const TdmTable& b, double tie_tol = 1e-9);

struct NeuralTabularConfig {
  int steps = 200000;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double polyak = 0.99;
  std::vector<int> hidden = {64, 64};
};

/// Feature encoding for the one-hot path: states and actions are one-hot,
/// goals are embedding coordinates.
Eigen::MatrixXd one_hot(const std::vector<int>& ids, int n);

/// Trains a critic on one-hot states/actions with uniformly sampled cells and
/// a discrete max over actions in the targets.
TdmCritic train_tabular_critic(const TabularMdp& mdp, int tau_max, const NeuralTabularConfig& cfg,
                               std::uint64_t seed);

/// The table of q values induced by a one-hot critic.
TdmTable critic_table(const TdmCritic& critic, const TabularMdp& mdp, int tau_max);

/// Planner adapter: a table viewed as a goal-conditioned model over one-hot
/// states and actions, predicting the embedding reached under the greedy
/// policy. Goals are embedding coordinates of states.
class TabularTdmModel {
 public:
  TabularTdmModel(const TabularMdp& mdp, const TdmTable& table) : mdp_(&mdp), table_(&table) {}

  Eigen::MatrixXd predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions, const Eigen::MatrixXd& goals,
                          const std::vector<int>& taus) const;
  Eigen::MatrixXd act(const Eigen::MatrixXd& states, const Eigen::MatrixXd& goals, const std::vector<int>& taus) const;

  int goal_index(const Eigen::VectorXd& goal) const;

 private:
  const TabularMdp* mdp_;
  const TdmTable* table_;
};

}  // namespace tdm
