#include "tdm/control.hpp"

#include "tdm/errors.hpp"

namespace tdm {

TaskReward TaskReward::goal_reaching(const Eigen::VectorXd& goal) {
  return {goal, std::vector<bool>(static_cast<std::size_t>(goal.size()), true)};
}

TaskReward TaskReward::feature_target(const Eigen::VectorXd& goal, const std::vector<int>& fixed_components) {
  TaskReward r{goal, std::vector<bool>(static_cast<std::size_t>(goal.size()), false)};
  for (int j : fixed_components) {
    if (j < 0 || j >= goal.size()) throw ShapeError("feature target component " + std::to_string(j) + " out of range");
    r.fixed[j] = true;
  }
  return r;
}

int TaskReward::free_count() const {
  int n = 0;
  for (bool f : fixed) n += f ? 0 : 1;
  return n;
}

double TaskReward::operator()(const Eigen::VectorXd& goal_space) const {
  if (goal_space.size() != target.size()) throw ShapeError(shape_message("task reward input", target.size(), goal_space.size()));
  double r = 0.0;
  for (Eigen::Index j = 0; j < target.size(); ++j)
    if (fixed[j]) r -= std::abs(goal_space(j) - target(j));
  return r;
}

Eigen::RowVectorXd TaskReward::evaluate(const Eigen::MatrixXd& goal_space) const {
  if (goal_space.rows() != target.size()) throw ShapeError(shape_message("task reward input", target.size(), goal_space.rows()));
  Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(goal_space.cols());
  for (Eigen::Index j = 0; j < target.size(); ++j)
    if (fixed[j]) r.array() -= (goal_space.row(j).array() - target(j)).abs();
  return r;
}

TaskReward task_for(const EnvSpec& spec, const Eigen::VectorXd& goal) {
  return TaskReward::feature_target(goal, spec.task_components);
}

std::string to_string(PolicyMode mode) {
  switch (mode) {
    case PolicyMode::kDirect: return "direct";
    case PolicyMode::kMpc: return "mpc";
    case PolicyMode::kSkipK: return "skipK";
  }
  return "direct";
}

PolicyMode parse_policy_mode(const std::string& name) {
  if (name == "direct") return PolicyMode::kDirect;
  if (name == "mpc") return PolicyMode::kMpc;
  if (name == "skipK" || name == "skip") return PolicyMode::kSkipK;
  throw ConfigError("unknown policy '" + name + "' (expected direct|mpc|skipK)");
}

int planning_tau(int horizon, int t, int tau_max) { return std::max(0, std::min(horizon - t - 1, tau_max)); }

}  // namespace tdm
