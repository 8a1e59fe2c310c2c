#include "tdm/learner.hpp"

#include <algorithm>
#include <iomanip>

namespace tdm {

void write_episode_header(std::ostream& os) {
  os << "episode,env_steps,final_distance,reached,mean_critic_loss,mean_q\n";
}

void write_episode_row(std::ostream& os, const EpisodeLogRow& row) {
  os << row.episode << ',' << row.env_steps << ',' << std::setprecision(9) << row.final_distance << ','
     << (row.reached ? 1 : 0) << ',' << row.mean_critic_loss << ',' << row.mean_q << '\n';
  os.flush();
}

std::vector<EpisodeLogRow> run_training(const EnvSpec& spec, Learner& learner, const TrainingBudget& budget,
                                        Rng& env_rng, Rng& act_rng, const StepHook& hook, std::ostream* log) {
  std::vector<EpisodeLogRow> rows;
  std::int64_t env_steps = 0;
  bool stop = false;
  for (int episode = 0; !stop; ++episode) {
    if (budget.episodes >= 0 && episode >= budget.episodes) break;
    if (budget.env_steps >= 0 && env_steps >= budget.env_steps) break;
    auto [state, goal] = env_reset(spec, env_rng);
    for (int t = 0; t < spec.horizon; ++t) {
      if (budget.env_steps >= 0 && env_steps >= budget.env_steps) break;
      const Eigen::VectorXd action = learner.act(state, goal, t, true, act_rng);
      Eigen::VectorXd next = env_step(spec, state, action);
      learner.observe({state, spec.action_bounds.clip(action), next, episode, t}, goal);
      ++env_steps;
      state = std::move(next);
      if (hook && !hook(env_steps)) {
        stop = true;
        break;
      }
    }
    const EpisodeStats stats = learner.finish_episode();
    EpisodeLogRow row;
    row.episode = episode;
    row.env_steps = env_steps;
    row.final_distance = task_distance(spec, goal_map(spec, state), goal);
    row.reached = row.final_distance < kReachThreshold;
    row.mean_critic_loss = stats.mean_critic_loss;
    row.mean_q = stats.mean_q;
    if (log) write_episode_row(*log, row);
    rows.push_back(row);
  }
  return rows;
}

std::vector<EvalEpisode> evaluate(const EnvSpec& spec, const Learner& learner, int episodes, std::uint64_t seed) {
  Rng env_rng(seed);
  Rng act_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<EvalEpisode> out;
  out.reserve(static_cast<std::size_t>(std::max(episodes, 0)));
  for (int e = 0; e < episodes; ++e) {
    auto [state, goal] = env_reset(spec, env_rng);
    EvalEpisode ep;
    for (int t = 0; t < spec.horizon; ++t) {
      state = env_step(spec, state, learner.act(state, goal, t, false, act_rng));
      if (ep.steps_to_reach < 0 && task_distance(spec, goal_map(spec, state), goal) < kReachThreshold)
        ep.steps_to_reach = t + 1;
    }
    ep.final_distance = task_distance(spec, goal_map(spec, state), goal);
    ep.reached = ep.final_distance < kReachThreshold;
    out.push_back(ep);
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace tdm
