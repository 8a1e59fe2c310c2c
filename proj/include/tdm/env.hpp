#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <istream>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace tdm {

using Rng = std::mt19937_64;

/// Independent generator seed for a named stream of one run (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Axis-aligned box [lo, hi].
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Eigen::Index dim() const { return lo.size(); }
  Eigen::VectorXd sample(Rng& rng) const;
  Eigen::VectorXd clip(const Eigen::VectorXd& x) const { return x.cwiseMax(lo).cwiseMin(hi); }
  Eigen::VectorXd center() const { return 0.5 * (lo + hi); }
  Eigen::VectorXd half_width() const { return 0.5 * (hi - lo); }
};

enum class EnvKind { kPointMass, kReacher2 };

/// Continuous, deterministic control task. Goals live in the image of
/// `goal_map`, which selects `goal_features` from the state.
struct EnvSpec {
  std::string name;
  EnvKind kind = EnvKind::kPointMass;
  int state_dim = 0;
  int action_dim = 0;
  Box action_bounds;
  int horizon = 50;
  std::vector<int> goal_features;
  Box goal_box;
  // Goal components that define task success; the rest are free for planners.
  std::vector<int> task_components;
  double dt = 0.1;
  double max_speed = 2.0;
  double link_length = 1.0;

  int goal_dim() const { return static_cast<int>(goal_features.size()); }
};

EnvSpec point_mass_spec(int horizon = 50);
EnvSpec reacher2_spec(int horizon = 50);
/// "pointmass" or "reacher2"; throws ConfigError otherwise.
EnvSpec make_env(const std::string& name, int horizon = 50);

std::pair<Eigen::VectorXd, Eigen::VectorXd> env_reset(const EnvSpec& spec, Rng& rng);
std::pair<Eigen::VectorXd, Eigen::VectorXd> env_reset(const EnvSpec& spec, std::uint64_t seed);

Eigen::VectorXd env_step(const EnvSpec& spec, const Eigen::VectorXd& state, const Eigen::VectorXd& action);

Eigen::VectorXd goal_map(const EnvSpec& spec, const Eigen::VectorXd& state);
/// Column-wise goal_map over a (state_dim x N) matrix.
Eigen::MatrixXd goal_map(const EnvSpec& spec, const Eigen::MatrixXd& states);

/// Euclidean distance between the task components of a goal-space point and
/// the target goal; this is the "final distance" reported in metrics.
double task_distance(const EnvSpec& spec, const Eigen::VectorXd& achieved_goal, const Eigen::VectorXd& goal);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double x);

/// Finite deterministic MDP with a coordinate embedding used for distances.
struct TabularMdp {
  std::string name;
  int num_states = 0;
  int num_actions = 0;
  std::vector<int> next;            // next[s * num_actions + a]
  Eigen::MatrixXd embedding;        // num_states x coordinate_dim
  std::vector<std::string> action_names;

  int coordinate_dim() const { return static_cast<int>(embedding.cols()); }
  /// l1 distance between the embeddings of two states.
  double distance(int s, int g) const { return (embedding.row(s) - embedding.row(g)).lpNorm<1>(); }
};

int tabular_step(const TabularMdp& mdp, int s, int a);

/// 1-D chain with actions left(0), right(1), stay(2); saturating at the ends.
TabularMdp make_chain(int n);
/// width x height grid, index = y * width + x; actions up(0, +y), down(1),
/// left(2), right(3), stay(4).
TabularMdp make_grid(int width, int height);
/// Builtin names: gridchain5 (alias chain5), grid3x3, grid9x9.
TabularMdp make_builtin_mdp(const std::string& name);
bool is_builtin_mdp(const std::string& name);

/// Text format: header "S A", then S*A lines "s a next". States are embedded
/// on a line at their index.
TabularMdp load_tabular_mdp(std::istream& is);
TabularMdp load_tabular_mdp_file(const std::string& path);

}  // namespace tdm
