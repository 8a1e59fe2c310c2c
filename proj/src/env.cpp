#include "tdm/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "tdm/errors.hpp"

namespace tdm {

Eigen::VectorXd Box::sample(Rng& rng) const {
  Eigen::VectorXd x(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    std::uniform_real_distribution<double> dist(lo(i), hi(i));
    x(i) = dist(rng);
  }
  return x;
}

double wrap_angle(double x) {
  constexpr double kPi = std::numbers::pi;
  double y = std::fmod(x + kPi, 2.0 * kPi);
  if (y < 0.0) y += 2.0 * kPi;
  y -= kPi;
  // fmod maps +pi to -pi; the interval is half-open on the left.
  return y == -kPi ? kPi : y;
}

namespace {

Eigen::Vector2d reacher_tip(double a1, double a2, double link) {
  return {link * (std::cos(a1) + std::cos(a1 + a2)), link * (std::sin(a1) + std::sin(a1 + a2))};
}

Eigen::VectorXd reacher_state(double a1, double a2, double link) {
  Eigen::VectorXd s(4);
  s << a1, a2, reacher_tip(a1, a2, link);
  return s;
}

void check_state(const EnvSpec& spec, const Eigen::VectorXd& state) {
  if (state.size() != spec.state_dim) throw ShapeError(shape_message(spec.name + " state", spec.state_dim, state.size()));
}

}  // namespace

EnvSpec point_mass_spec(int horizon) {
  EnvSpec spec;
  spec.name = "pointmass";
  spec.kind = EnvKind::kPointMass;
  spec.state_dim = 4;  // px, py, vx, vy
  spec.action_dim = 2;
  spec.action_bounds = {Eigen::VectorXd::Constant(2, -1.0), Eigen::VectorXd::Constant(2, 1.0)};
  spec.horizon = horizon;
  spec.goal_features = {0, 1};
  spec.goal_box = {Eigen::VectorXd::Constant(2, -1.0), Eigen::VectorXd::Constant(2, 1.0)};
  spec.task_components = {0, 1};
  return spec;
}

EnvSpec reacher2_spec(int horizon) {
  constexpr double kPi = std::numbers::pi;
  EnvSpec spec;
  spec.name = "reacher2";
  spec.kind = EnvKind::kReacher2;
  spec.state_dim = 4;  // joint angles, tip x/y
  spec.action_dim = 2;
  spec.action_bounds = {Eigen::VectorXd::Constant(2, -kPi), Eigen::VectorXd::Constant(2, kPi)};
  spec.horizon = horizon;
  spec.goal_features = {0, 1, 2, 3};
  Eigen::VectorXd lo(4), hi(4);
  lo << -kPi, -kPi, -2.0, -2.0;
  hi << kPi, kPi, 2.0, 2.0;
  spec.goal_box = {lo, hi};
  spec.task_components = {2, 3};
  return spec;
}

EnvSpec make_env(const std::string& name, int horizon) {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (name == "pointmass") return point_mass_spec(horizon);
  if (name == "reacher2") return reacher2_spec(horizon);
  throw ConfigError("unknown continuous environment '" + name + "'");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> env_reset(const EnvSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case EnvKind::kPointMass: {
      Eigen::VectorXd s = Eigen::VectorXd::Zero(4);
      return {s, spec.goal_box.sample(rng)};
    }
    case EnvKind::kReacher2: {
      // Goals are configurations drawn from the joint-angle part of the goal
      // box, so every goal tip is reachable.
      Eigen::VectorXd s = reacher_state(0.0, 0.0, spec.link_length);
      std::uniform_real_distribution<double> a1(spec.goal_box.lo(0), spec.goal_box.hi(0));
      std::uniform_real_distribution<double> a2(spec.goal_box.lo(1), spec.goal_box.hi(1));
      const double g1 = a1(rng);
      const double g2 = a2(rng);
      return {s, goal_map(spec, reacher_state(g1, g2, spec.link_length))};
    }
  }
  throw std::logic_error("unhandled environment kind");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> env_reset(const EnvSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return env_reset(spec, rng);
}

Eigen::VectorXd env_step(const EnvSpec& spec, const Eigen::VectorXd& state, const Eigen::VectorXd& action) {
  check_state(spec, state);
  if (action.size() != spec.action_dim) throw ShapeError(shape_message(spec.name + " action", spec.action_dim, action.size()));
  if (!action.allFinite()) throw NumericError(spec.name + ": non-finite action");
  const Eigen::VectorXd a = spec.action_bounds.clip(action);
  switch (spec.kind) {
    case EnvKind::kPointMass: {
      Eigen::VectorXd next(4);
      next.head<2>() = state.head<2>() + spec.dt * state.tail<2>();
      next.tail<2>() = (state.tail<2>() + spec.dt * a).cwiseMax(-spec.max_speed).cwiseMin(spec.max_speed);
      return next;
    }
    case EnvKind::kReacher2: {
      const double a1 = wrap_angle(state(0) + spec.dt * a(0));
      const double a2 = wrap_angle(state(1) + spec.dt * a(1));
      return reacher_state(a1, a2, spec.link_length);
    }
  }
  throw std::logic_error("unhandled environment kind");
}

Eigen::VectorXd goal_map(const EnvSpec& spec, const Eigen::VectorXd& state) {
  check_state(spec, state);
  Eigen::VectorXd g(spec.goal_dim());
  for (int j = 0; j < spec.goal_dim(); ++j) g(j) = state(spec.goal_features[j]);
  return g;
}

Eigen::MatrixXd goal_map(const EnvSpec& spec, const Eigen::MatrixXd& states) {
  if (states.rows() != spec.state_dim) throw ShapeError(shape_message(spec.name + " states", spec.state_dim, states.rows()));
  Eigen::MatrixXd g(spec.goal_dim(), states.cols());
  for (int j = 0; j < spec.goal_dim(); ++j) g.row(j) = states.row(spec.goal_features[j]);
  return g;
}

double task_distance(const EnvSpec& spec, const Eigen::VectorXd& achieved_goal, const Eigen::VectorXd& goal) {
  double sq = 0.0;
  for (int j : spec.task_components) {
    const double d = achieved_goal(j) - goal(j);
    sq += d * d;
  }
  return std::sqrt(sq);
}

int tabular_step(const TabularMdp& mdp, int s, int a) {
  if (s < 0 || s >= mdp.num_states) throw std::out_of_range("tabular_step: state " + std::to_string(s) + " out of range");
  if (a < 0 || a >= mdp.num_actions) throw std::out_of_range("tabular_step: action " + std::to_string(a) + " out of range");
  return mdp.next[static_cast<std::size_t>(s) * mdp.num_actions + a];
}

TabularMdp make_chain(int n) {
  if (n < 1) throw std::invalid_argument("chain needs at least one state");
  TabularMdp mdp;
  mdp.name = "chain" + std::to_string(n);
  mdp.num_states = n;
  mdp.num_actions = 3;
  mdp.action_names = {"left", "right", "stay"};
  mdp.next.resize(static_cast<std::size_t>(n) * 3);
  mdp.embedding.resize(n, 1);
  for (int s = 0; s < n; ++s) {
    mdp.next[s * 3 + 0] = std::max(s - 1, 0);
    mdp.next[s * 3 + 1] = std::min(s + 1, n - 1);
    mdp.next[s * 3 + 2] = s;
    mdp.embedding(s, 0) = s;
  }
  return mdp;
}

TabularMdp make_grid(int width, int height) {
  if (width < 1 || height < 1) throw std::invalid_argument("grid needs positive extents");
  TabularMdp mdp;
  mdp.name = "grid" + std::to_string(width) + "x" + std::to_string(height);
  mdp.num_states = width * height;
  mdp.num_actions = 5;
  mdp.action_names = {"up", "down", "left", "right", "stay"};
  mdp.next.resize(static_cast<std::size_t>(mdp.num_states) * 5);
  mdp.embedding.resize(mdp.num_states, 2);
  const int dx[5] = {0, 0, -1, 1, 0};
  const int dy[5] = {1, -1, 0, 0, 0};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int s = y * width + x;
      mdp.embedding(s, 0) = x;
      mdp.embedding(s, 1) = y;
      for (int a = 0; a < 5; ++a) {
        const int nx = std::clamp(x + dx[a], 0, width - 1);
        const int ny = std::clamp(y + dy[a], 0, height - 1);
        mdp.next[s * 5 + a] = ny * width + nx;
      }
    }
  }
  return mdp;
}

bool is_builtin_mdp(const std::string& name) {
  return name == "gridchain5" || name == "chain5" || name == "grid3x3" || name == "grid9x9";
}

TabularMdp make_builtin_mdp(const std::string& name) {
  if (name == "gridchain5" || name == "chain5") {
    auto mdp = make_chain(5);
    mdp.name = "gridchain5";
    return mdp;
  }
  if (name == "grid3x3") return make_grid(3, 3);
  if (name == "grid9x9") return make_grid(9, 9);
  throw ConfigError("unknown builtin mdp '" + name + "'");
}

TabularMdp load_tabular_mdp(std::istream& is) {
  TabularMdp mdp;
  mdp.name = "file";
  if (!(is >> mdp.num_states >> mdp.num_actions) || mdp.num_states < 1 || mdp.num_actions < 1)
    throw std::runtime_error("mdp file: bad header, expected 'S A'");
  const std::size_t cells = static_cast<std::size_t>(mdp.num_states) * mdp.num_actions;
  mdp.next.assign(cells, -1);
  for (std::size_t i = 0; i < cells; ++i) {
    int s = 0, a = 0, n = 0;
    if (!(is >> s >> a >> n)) throw std::runtime_error("mdp file: expected " + std::to_string(cells) + " transition lines");
    if (s < 0 || s >= mdp.num_states || a < 0 || a >= mdp.num_actions || n < 0 || n >= mdp.num_states)
      throw std::runtime_error("mdp file: transition index out of range on line " + std::to_string(i + 2));
    mdp.next[static_cast<std::size_t>(s) * mdp.num_actions + a] = n;
  }
  for (std::size_t i = 0; i < cells; ++i)
    if (mdp.next[i] < 0) throw std::runtime_error("mdp file: missing transition for cell " + std::to_string(i));
  mdp.embedding.resize(mdp.num_states, 1);
  for (int s = 0; s < mdp.num_states; ++s) mdp.embedding(s, 0) = s;
  for (int a = 0; a < mdp.num_actions; ++a) mdp.action_names.push_back("a" + std::to_string(a));
  return mdp;
}

TabularMdp load_tabular_mdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mdp file '" + path + "'");
  auto mdp = load_tabular_mdp(in);
  mdp.name = path;
  return mdp;
}

}  // namespace tdm
