#pragma once

// Temporal difference models: a goal- and horizon-conditioned critic
// Q(s, a, g, tau) = -scale * ||f(s, a, g, tau) - g||_1 trained with
// relabeled Bellman targets, plus a deterministic actor.

#include <Eigen/Core>

#include <string>
#include <vector>

#include "tdm/env.hpp"
#include "tdm/nn.hpp"
#include "tdm/replay.hpp"

namespace tdm {

using Mlp = nn::Mlp<double>;
using Adam = nn::AdamState<double>;
using Target = nn::TargetCopy<double>;

enum class SupervisionMode { kScalar, kVectorized };

std::string to_string(SupervisionMode mode);
SupervisionMode parse_supervision_mode(const std::string& name);

/// f maps [s; a; g; tau] to a goal-space vector; tau enters as a raw integer.
struct TdmCritic {
  Mlp f;
  int state_dim = 0;
  int action_dim = 0;
  int goal_dim = 0;
  double distance_scale = 1.0;

  Eigen::MatrixXd input(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions, const Eigen::MatrixXd& goals,
                        const std::vector<int>& taus) const;
  /// f outputs, (goal_dim x N).
  Eigen::MatrixXd predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions, const Eigen::MatrixXd& goals,
                          const std::vector<int>& taus) const;
  /// Scalar q per column.
  Eigen::RowVectorXd q(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions, const Eigen::MatrixXd& goals,
                       const std::vector<int>& taus) const;
};

/// Deterministic policy on [s; g; tau] with tanh output rescaled to the
/// action box.
struct TdmActor {
  Mlp net;
  Box bounds;
  int state_dim = 0;
  int goal_dim = 0;

  Eigen::MatrixXd input(const Eigen::MatrixXd& states, const Eigen::MatrixXd& goals, const std::vector<int>& taus) const;
  Eigen::MatrixXd act(const Eigen::MatrixXd& states, const Eigen::MatrixXd& goals, const std::vector<int>& taus) const;
  Eigen::VectorXd act(const Eigen::VectorXd& state, const Eigen::VectorXd& goal, int tau) const;
};

TdmCritic make_critic(int state_dim, int action_dim, int goal_dim, const std::vector<int>& hidden, Rng& rng,
                      double distance_scale = 1.0);
TdmActor make_actor(int state_dim, int goal_dim, const Box& action_bounds, const std::vector<int>& hidden, Rng& rng);

struct TdmValue {
  double q = 0.0;
  Eigen::VectorXd per_dim;
};

TdmValue tdm_value(const TdmCritic& critic, const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                   const Eigen::VectorXd& goal, int tau);

/// Both target forms are always filled; under l1 they agree:
/// scalar(j) == -per_dim.col(j).sum() * scale.
struct BellmanTargets {
  Eigen::RowVectorXd scalar;
  Eigen::MatrixXd per_dim;  // unscaled per-dimension distances
};

/// tau == 0 rows use the distance from goal_map(s') to the goal; other rows
/// bootstrap from the target critic at (s', target_actor(s', g, tau-1), g, tau-1).
BellmanTargets bellman_targets(const TdmCritic& target_critic, const TdmActor& target_actor, const RelabeledBatch& batch);

struct LossAndGrad {
  double value = 0.0;
  Mlp grad;
  double mean_q = 0.0;
};

/// Mean squared error of the critic against fixed targets and its parameter gradient.
LossAndGrad critic_loss_and_grad(const TdmCritic& critic, const RelabeledBatch& batch, const BellmanTargets& targets,
                                 SupervisionMode mode);

/// Mean q over the batch with actions from the actor, and the gradient of
/// that mean with respect to the actor parameters (ascent direction).
LossAndGrad actor_objective_and_grad(const TdmActor& actor, const TdmCritic& critic, const RelabeledBatch& batch);

struct CriticStep {
  double loss = 0.0;
  double mean_q = 0.0;
};

/// One Adam step on the critic; returns the pre-step loss.
CriticStep critic_update(TdmCritic& critic, const RelabeledBatch& batch, const BellmanTargets& targets, Adam& opt,
                         SupervisionMode mode, double learning_rate);

/// One Adam ascent step for the actor; returns the pre-step objective.
double actor_update(TdmActor& actor, const TdmCritic& critic, const RelabeledBatch& batch, Adam& opt,
                    double learning_rate);

}  // namespace tdm
