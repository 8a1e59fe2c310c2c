#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "tdm/env.hpp"

namespace tdm {

/// One environment step. Goals and horizons are never stored; they are
/// attached when a batch is sampled.
struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
  Eigen::VectorXd next_state;
  std::int64_t trajectory = 0;
  int step = 0;
};

enum class RelabelStrategy { kFutureOnTrajectory, kUniformFromBuffer, kUniformFromGoalBox };

std::string to_string(RelabelStrategy strategy);
RelabelStrategy parse_relabel_strategy(const std::string& name);

/// Column j of every matrix is row j of the batch.
struct RelabeledBatch {
  Eigen::MatrixXd states;
  Eigen::MatrixXd actions;
  Eigen::MatrixXd next_states;
  Eigen::MatrixXd goals;     // relabeled goals, goal space
  Eigen::MatrixXd achieved;  // goal_map(next_state)
  std::vector<int> taus;
  std::vector<std::size_t> base_index;  // logical buffer index of the base transition
  std::vector<int> goal_source_step;    // trajectory step of the goal state, -1 if not from the trajectory

  Eigen::Index size() const { return states.cols(); }
};

/// Ring buffer of transitions. Logical index 0 is the oldest stored entry.
class ReplayBuffer {
 public:
  ReplayBuffer(int state_dim, int action_dim, std::size_t capacity);

  void store(const Transition& t);
  Transition at(std::size_t logical) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }
  int state_dim() const { return static_cast<int>(states_.rows()); }
  int action_dim() const { return static_cast<int>(actions_.rows()); }

  /// M rows: base transitions uniform over the buffer, tau uniform on
  /// {0..tau_max}, goal per `strategy`. `future_window` > 0 limits the
  /// future-on-trajectory offset to that many states.
  RelabeledBatch sample_relabeled(std::size_t batch_size, RelabelStrategy strategy, int tau_max, const EnvSpec& spec,
                                  Rng& rng, int future_window = 0) const;

  /// Uniformly sampled plain transitions (no relabeling).
  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;
  void gather(const std::vector<std::size_t>& logical, Eigen::MatrixXd& states, Eigen::MatrixXd& actions,
              Eigen::MatrixXd& next_states) const;

  void dump_csv(std::ostream& os) const;

 private:
  std::size_t physical(std::size_t logical) const { return (start_ + logical) % capacity_; }

  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t start_ = 0;
  Eigen::MatrixXd states_;
  Eigen::MatrixXd actions_;
  Eigen::MatrixXd next_states_;
  std::vector<std::int64_t> trajectory_;
  std::vector<int> step_;
};

}  // namespace tdm
