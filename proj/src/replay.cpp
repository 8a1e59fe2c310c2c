#include "tdm/replay.hpp"

#include "tdm/errors.hpp"

namespace tdm {

std::string to_string(RelabelStrategy strategy) {
  switch (strategy) {
    case RelabelStrategy::kFutureOnTrajectory: return "future";
    case RelabelStrategy::kUniformFromBuffer: return "buffer";
    case RelabelStrategy::kUniformFromGoalBox: return "goal_box";
  }
  return "future";
}

RelabelStrategy parse_relabel_strategy(const std::string& name) {
  if (name == "future") return RelabelStrategy::kFutureOnTrajectory;
  if (name == "buffer") return RelabelStrategy::kUniformFromBuffer;
  if (name == "goal_box") return RelabelStrategy::kUniformFromGoalBox;
  throw ConfigError("unknown relabel strategy '" + name + "' (expected future|buffer|goal_box)");
}

ReplayBuffer::ReplayBuffer(int state_dim, int action_dim, std::size_t capacity)
    : capacity_(capacity),
      states_(state_dim, static_cast<Eigen::Index>(capacity)),
      actions_(action_dim, static_cast<Eigen::Index>(capacity)),
      next_states_(state_dim, static_cast<Eigen::Index>(capacity)),
      trajectory_(capacity),
      step_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::store(const Transition& t) {
  if (t.state.size() != states_.rows()) throw ShapeError(shape_message("replay state", states_.rows(), t.state.size()));
  if (t.next_state.size() != states_.rows())
    throw ShapeError(shape_message("replay next state", states_.rows(), t.next_state.size()));
  if (t.action.size() != actions_.rows()) throw ShapeError(shape_message("replay action", actions_.rows(), t.action.size()));
  if (!t.state.allFinite() || !t.action.allFinite() || !t.next_state.allFinite())
    throw NumericError("replay: refusing to store a non-finite transition");

  std::size_t slot;
  if (size_ < capacity_) {
    slot = physical(size_);
    ++size_;
  } else {
    slot = start_;
    start_ = (start_ + 1) % capacity_;
  }
  const auto c = static_cast<Eigen::Index>(slot);
  states_.col(c) = t.state;
  actions_.col(c) = t.action;
  next_states_.col(c) = t.next_state;
  trajectory_[slot] = t.trajectory;
  step_[slot] = t.step;
}

Transition ReplayBuffer::at(std::size_t logical) const {
  if (logical >= size_) throw std::out_of_range("replay index out of range");
  const std::size_t p = physical(logical);
  const auto c = static_cast<Eigen::Index>(p);
  return {states_.col(c), actions_.col(c), next_states_.col(c), trajectory_[p], step_[p]};
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

void ReplayBuffer::gather(const std::vector<std::size_t>& logical, Eigen::MatrixXd& states, Eigen::MatrixXd& actions,
                          Eigen::MatrixXd& next_states) const {
  const auto n = static_cast<Eigen::Index>(logical.size());
  states.resize(states_.rows(), n);
  actions.resize(actions_.rows(), n);
  next_states.resize(states_.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto c = static_cast<Eigen::Index>(physical(logical[j]));
    states.col(j) = states_.col(c);
    actions.col(j) = actions_.col(c);
    next_states.col(j) = next_states_.col(c);
  }
}

RelabeledBatch ReplayBuffer::sample_relabeled(std::size_t batch_size, RelabelStrategy strategy, int tau_max,
                                              const EnvSpec& spec, Rng& rng, int future_window) const {
  if (size_ == 0) throw std::logic_error("cannot sample from an empty replay buffer");
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  if (tau_max < 0) throw std::invalid_argument("tau_max must be >= 0");

  RelabeledBatch batch;
  batch.base_index = sample_indices(batch_size, rng);
  gather(batch.base_index, batch.states, batch.actions, batch.next_states);
  batch.achieved = goal_map(spec, batch.next_states);

  const auto m = static_cast<Eigen::Index>(batch_size);
  batch.goals.resize(spec.goal_dim(), m);
  batch.taus.resize(batch_size);
  batch.goal_source_step.assign(batch_size, -1);

  std::uniform_int_distribution<int> tau_dist(0, tau_max);
  std::uniform_int_distribution<std::size_t> any(0, size_ - 1);
  for (Eigen::Index j = 0; j < m; ++j) {
    batch.taus[j] = tau_dist(rng);
    switch (strategy) {
      case RelabelStrategy::kFutureOnTrajectory: {
        // States strictly after s_t on the same trajectory are the next
        // states of transitions i, i+1, ... up to the last stored step.
        const std::size_t i = batch.base_index[j];
        const std::int64_t traj = trajectory_[physical(i)];
        std::size_t later = 0;
        while (i + later + 1 < size_ && trajectory_[physical(i + later + 1)] == traj) ++later;
        if (future_window > 0) later = std::min<std::size_t>(later, static_cast<std::size_t>(future_window - 1));
        std::uniform_int_distribution<std::size_t> offset(0, later);
        const std::size_t k = offset(rng);
        const std::size_t p = physical(i + k);
        batch.goals.col(j) = goal_map(spec, Eigen::VectorXd(next_states_.col(static_cast<Eigen::Index>(p))));
        batch.goal_source_step[j] = step_[p] + 1;
        break;
      }
      case RelabelStrategy::kUniformFromBuffer: {
        const std::size_t p = physical(any(rng));
        batch.goals.col(j) = goal_map(spec, Eigen::VectorXd(next_states_.col(static_cast<Eigen::Index>(p))));
        break;
      }
      case RelabelStrategy::kUniformFromGoalBox:
        batch.goals.col(j) = spec.goal_box.sample(rng);
        break;
    }
  }
  return batch;
}

void ReplayBuffer::dump_csv(std::ostream& os) const {
  os << "index,trajectory,step";
  for (Eigen::Index i = 0; i < states_.rows(); ++i) os << ",s" << i;
  for (Eigen::Index i = 0; i < actions_.rows(); ++i) os << ",a" << i;
  for (Eigen::Index i = 0; i < states_.rows(); ++i) os << ",next_s" << i;
  os << '\n';
  const auto old = os.precision(17);
  for (std::size_t l = 0; l < size_; ++l) {
    const std::size_t p = physical(l);
    const auto c = static_cast<Eigen::Index>(p);
    os << l << ',' << trajectory_[p] << ',' << step_[p];
    for (Eigen::Index i = 0; i < states_.rows(); ++i) os << ',' << states_(i, c);
    for (Eigen::Index i = 0; i < actions_.rows(); ++i) os << ',' << actions_(i, c);
    for (Eigen::Index i = 0; i < states_.rows(); ++i) os << ',' << next_states_(i, c);
    os << '\n';
  }
  os.precision(old);
}

}  // namespace tdm
