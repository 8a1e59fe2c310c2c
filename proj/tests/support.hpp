#pragma once

// Shared test helpers: central finite differences over network parameters
// and small random fixtures.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "tdm/nn.hpp"
#include "tdm/replay.hpp"
#include "tdm/tdm.hpp"

namespace tdm::testing {

inline constexpr double kFdStep = 1e-5;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Central difference of `f` with respect to the scalar `x`, restoring x.
inline double central_difference(const std::function<double()>& f, double& x, double h = kFdStep) {
  const double x0 = x;
  x = x0 + h;
  const double fp = f();
  x = x0 - h;
  const double fm = f();
  x = x0;
  return (fp - fm) / (2.0 * h);
}

/// Largest relative error between `grad` and finite differences of `f`
/// over every parameter of `net` (which `f` must read).
inline double max_param_error(Mlp& net, const Mlp& grad, const std::function<double()>& f) {
  double worst = 0.0;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto& l = net.layers[k];
    for (Eigen::Index i = 0; i < l.weight.size(); ++i)
      worst = std::max(worst, relative_error(grad.layers[k].weight.data()[i],
                                             central_difference(f, l.weight.data()[i])));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i)
      worst = std::max(worst, relative_error(grad.layers[k].bias(i), central_difference(f, l.bias(i))));
  }
  return worst;
}

/// Smallest |pre-activation| over the rectifier layers for `input`. Central
/// differences are only an oracle when no unit sits within a step of its kink.
inline double relu_margin(const Mlp& net, const Eigen::MatrixXd& input) {
  double margin = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd x = input;
  for (const auto& l : net.layers) {
    Eigen::MatrixXd z = l.weight * x;
    z.colwise() += l.bias;
    if (l.activation == nn::Activation::kRelu) {
      margin = std::min(margin, z.cwiseAbs().minCoeff());
      z = z.cwiseMax(0.0);
    } else if (l.activation == nn::Activation::kTanh) {
      z = z.array().tanh().matrix();
    }
    x = std::move(z);
  }
  return margin;
}

inline constexpr double kKinkMargin = 1e-3;

inline Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo = -1.0,
                                      double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = d(rng);
  return m;
}

/// A synthetic relabeled batch with random entries and taus in [0, tau_max].
inline RelabeledBatch random_batch(int state_dim, int action_dim, int goal_dim, Eigen::Index m, int tau_max,
                                   Rng& rng) {
  RelabeledBatch b;
  b.states = uniform_matrix(state_dim, m, rng);
  b.actions = uniform_matrix(action_dim, m, rng);
  b.next_states = uniform_matrix(state_dim, m, rng);
  b.goals = uniform_matrix(goal_dim, m, rng);
  b.achieved = uniform_matrix(goal_dim, m, rng);
  std::uniform_int_distribution<int> tau(0, tau_max);
  for (Eigen::Index j = 0; j < m; ++j) {
    b.taus.push_back(tau(rng));
    b.base_index.push_back(static_cast<std::size_t>(j));
    b.goal_source_step.push_back(-1);
  }
  return b;
}

}  // namespace tdm::testing
