#include "tdm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "tdm/errors.hpp"

namespace fs = std::filesystem;

namespace tdm {

namespace {

enum Stream : std::uint64_t { kEnv = 3, kAct = 4, kEval = 5 };

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(10);
  return out;
}

}  // namespace

std::unique_ptr<Learner> make_learner(const ExperimentConfig& cfg, const EnvSpec& spec, std::uint64_t seed) {
  switch (cfg.algo) {
    case Algo::kTdm: return std::make_unique<TdmLearner>(spec, cfg.tdm, seed);
    case Algo::kDdpg: return std::make_unique<DdpgLearner>(spec, cfg.tdm, cfg.ddpg, seed);
    case Algo::kModelBasedMpc: return std::make_unique<ModelBasedLearner>(spec, cfg.tdm, cfg.model_based, seed);
  }
  throw ConfigError("unknown algo");
}

void write_eval_csv(std::ostream& os, const std::vector<EvalPoint>& curve) {
  os << "env_steps,eval_steps,median_final_distance,mean_final_distance,reached_fraction\n";
  for (const auto& p : curve)
    os << p.env_steps << ',' << p.eval_steps << ',' << p.median << ',' << p.mean << ',' << p.reached_fraction << '\n';
}

int tabular_tau_max(const ExperimentConfig& cfg, const TabularMdp& mdp) {
  return cfg.tdm.tau_max >= 0 ? cfg.tdm.tau_max : mdp.num_states - 1;
}

namespace {

SeedResult run_tabular_seed(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir) {
  SeedResult result;
  result.seed = seed;
  result.tabular = true;
  const TabularMdp mdp = make_builtin_mdp(cfg.env);
  const int tau_max = tabular_tau_max(cfg, mdp);
  NeuralTabularConfig ncfg;
  ncfg.steps = cfg.tabular_steps;
  ncfg.batch_size = cfg.tdm.batch_size;
  ncfg.learning_rate = cfg.tdm.critic_lr;
  ncfg.hidden = cfg.tdm.hidden;
  const TdmCritic critic = train_tabular_critic(mdp, tau_max, ncfg, seed);
  result.oracle = compare_tables(critic_table(critic, mdp, tau_max), dp_solve(mdp, tau_max));
  if (!dir.empty()) {
    fs::create_directories(dir);
    auto out = open_out(dir / "oracle.csv");
    out << "tau_max,gradient_steps,max_abs,argmax_mismatches\n"
        << tau_max << ',' << ncfg.steps << ',' << result.oracle.max_abs << ',' << result.oracle.argmax_mismatches
        << '\n';
  }
  return result;
}

}  // namespace

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir) {
  if (cfg.is_tabular()) return run_tabular_seed(cfg, seed, dir);
  SeedResult result;
  result.seed = seed;
  std::ofstream train_log, eval_log;
  if (!dir.empty()) {
    fs::create_directories(dir);
    train_log = open_out(dir / "train_log.csv");
    write_episode_header(train_log);
    eval_log = open_out(dir / "eval.csv");
    write_eval_csv(eval_log, {});
    eval_log.flush();
  }
  try {
    const EnvSpec spec = make_env(cfg.env, cfg.horizon);
    auto learner = make_learner(cfg, spec, seed);
    Rng env_rng(derive_seed(seed, kEnv));
    Rng act_rng(derive_seed(seed, kAct));
    const std::uint64_t eval_seed = derive_seed(seed, kEval);
    std::int64_t eval_steps = 0;

    auto hook = [&](std::int64_t env_steps) {
      if (env_steps % cfg.eval_cadence != 0) return true;
      const auto episodes = evaluate(spec, *learner, cfg.eval_episodes, eval_seed);
      eval_steps += static_cast<std::int64_t>(episodes.size()) * spec.horizon;
      std::vector<double> d;
      int reached = 0;
      for (const auto& e : episodes) {
        d.push_back(e.final_distance);
        reached += e.reached ? 1 : 0;
      }
      EvalPoint p;
      p.env_steps = env_steps;
      p.eval_steps = eval_steps;
      p.median = median(d);
      double sum = 0.0;
      for (double x : d) sum += x;
      p.mean = sum / static_cast<double>(d.size());
      p.reached_fraction = static_cast<double>(reached) / static_cast<double>(d.size());
      result.curve.push_back(p);
      if (eval_log.is_open()) {
        eval_log << p.env_steps << ',' << p.eval_steps << ',' << p.median << ',' << p.mean << ','
                 << p.reached_fraction << '\n';
        eval_log.flush();
      }
      return !(cfg.stop_at_distance > 0.0 && p.median < cfg.stop_at_distance);
    };

    const auto rows = run_training(spec, *learner, {-1, cfg.env_steps}, env_rng, act_rng, hook,
                                   train_log.is_open() ? &train_log : nullptr);
    if (!dir.empty() && cfg.algo == Algo::kTdm) {
      const auto& tdm_learner = dynamic_cast<const TdmLearner&>(*learner);
      save_checkpoint(dir / "checkpoint", {cfg, seed, static_cast<int>(rows.size()), tdm_learner.critic(),
                                           tdm_learner.actor()});
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    result.failed = true;
    result.error = e.what();
    if (!dir.empty()) {
      std::ofstream err(dir / "FAILED");
      err << e.what() << '\n';
    }
  }
  return result;
}

std::vector<AggregateRow> aggregate(const std::vector<SeedResult>& seeds) {
  std::set<std::int64_t> steps;
  for (const auto& s : seeds)
    for (const auto& p : s.curve) steps.insert(p.env_steps);
  std::vector<AggregateRow> rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::int64_t step : steps) {
    AggregateRow row;
    row.env_steps = step;
    std::vector<double> present;
    for (const auto& s : seeds) {
      double v = nan;
      for (const auto& p : s.curve) {
        if (p.env_steps == step) v = p.median;
      }
      if (std::isnan(v) && !s.failed && !s.curve.empty() && s.curve.back().env_steps < step) v = s.curve.back().median;
      row.per_seed.push_back(v);
      if (!std::isnan(v)) present.push_back(v);
    }
    if (present.empty()) {
      row.median = row.mean = row.std = nan;
    } else {
      row.median = median(present);
      double sum = 0.0;
      for (double x : present) sum += x;
      row.mean = sum / static_cast<double>(present.size());
      double ss = 0.0;
      for (double x : present) ss += (x - row.mean) * (x - row.mean);
      row.std = std::sqrt(ss / static_cast<double>(present.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_aggregate_csv(std::ostream& os, const std::vector<std::uint64_t>& seeds,
                         const std::vector<AggregateRow>& rows, const std::vector<SeedResult>& results) {
  os << "env_steps";
  for (auto s : seeds) os << ",seed_" << s;
  os << ",median,mean,std,failed_seeds\n";
  int failed = 0;
  for (const auto& r : results) failed += r.failed ? 1 : 0;
  for (const auto& row : rows) {
    os << row.env_steps;
    for (double v : row.per_seed) {
      os << ',';
      if (std::isnan(v)) os << "nan";
      else os << v;
    }
    os << ',' << row.median << ',' << row.mean << ',' << row.std << ',' << failed << '\n';
  }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path root(cfg.output_dir);
  fs::create_directories(root);
  {
    auto out = open_out(root / "config.txt");
    out << cfg.to_text();
  }
  ExperimentResult result;
  result.seeds.resize(cfg.seeds.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>(cfg.seeds.size(), cfg.workers > 0 ? static_cast<std::size_t>(cfg.workers) : hw);
  std::atomic<std::size_t> next{0};
  std::exception_ptr config_error;
  std::atomic<bool> had_config_error{false};
  auto work = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      try {
        const std::uint64_t seed = cfg.seeds[i];
        result.seeds[i] = run_seed(cfg, seed, root / ("seed_" + std::to_string(seed)));
      } catch (...) {
        if (!had_config_error.exchange(true)) config_error = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (config_error) std::rethrow_exception(config_error);
  result.aggregate = aggregate(result.seeds);
  auto out = open_out(root / "aggregate.csv");
  write_aggregate_csv(out, cfg.seeds, result.aggregate, result.seeds);
  return result;
}

std::int64_t steps_to_threshold(const std::vector<EvalPoint>& curve, double threshold) {
  for (const auto& p : curve)
    if (p.median < threshold) return p.env_steps;
  return -1;
}

std::int64_t steps_to_threshold(const std::vector<AggregateRow>& rows, double threshold) {
  for (const auto& r : rows)
    if (r.median < threshold) return r.env_steps;
  return -1;
}

bool is_sweep_key(const std::string& key) {
  return key == "supervision_mode" || key == "tau_max" || key == "updates_per_step";
}

AblationResult run_ablation(const ExperimentConfig& base, const std::string& key,
                            const std::vector<std::string>& values) {
  if (!is_sweep_key(key))
    throw ConfigError("sweep key must be one of supervision_mode, tau_max, updates_per_step (got '" + key + "')");
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) {
    ExperimentConfig c = base;
    c.set(key, v);
    c.output_dir = (fs::path(base.output_dir) / (key + "_" + v)).string();
    c.validate();
    configs.push_back(std::move(c));
  }
  AblationResult result{key, values, {}};
  for (const auto& c : configs) result.runs.push_back(run_experiment(c));

  auto out = open_out(fs::path(base.output_dir) / ("ablation_" + key + ".csv"));
  out << "sweep_value,seed,env_steps,final_distance\n";
  for (std::size_t i = 0; i < values.size(); ++i)
    for (const auto& s : result.runs[i].seeds)
      for (const auto& p : s.curve) out << values[i] << ',' << s.seed << ',' << p.env_steps << ',' << p.median << '\n';
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void write_net(const fs::path& path, const Mlp& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  nn::write_mlp(out, net);
}

Mlp read_net(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return nn::read_mlp<double>(in);
}

}  // namespace

void save_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "config.txt");
    out << ckpt.config.to_text();
  }
  {
    auto out = open_out(dir / "manifest.txt");
    out << "env = " << ckpt.config.env << '\n'
        << "config_hash = " << ckpt.config.hash() << '\n'
        << "seed = " << ckpt.seed << '\n'
        << "episodes = " << ckpt.episodes << '\n';
  }
  write_net(dir / "critic.bin", ckpt.critic.f);
  write_net(dir / "actor.bin", ckpt.actor.net);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  Checkpoint ckpt;
  ckpt.config = load_config((dir / "config.txt").string());
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw ConfigError("checkpoint has no manifest: " + dir.string());
  std::string line;
  std::uint64_t hash = 0;
  bool have_hash = false;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(' ') + 1);
    value.erase(0, value.find_first_not_of(' '));
    if (key == "config_hash") {
      hash = std::stoull(value);
      have_hash = true;
    } else if (key == "seed") {
      ckpt.seed = std::stoull(value);
    } else if (key == "episodes") {
      ckpt.episodes = std::stoi(value);
    } else if (key == "env" && value != ckpt.config.env) {
      throw ConfigError("checkpoint manifest env does not match its config");
    }
  }
  if (!have_hash || hash != ckpt.config.hash()) throw ConfigError("checkpoint config hash mismatch");

  const EnvSpec spec = make_env(ckpt.config.env, ckpt.config.horizon);
  ckpt.critic = TdmCritic{read_net(dir / "critic.bin"), spec.state_dim, spec.action_dim, spec.goal_dim(),
                          ckpt.config.tdm.reward_scale};
  ckpt.actor = TdmActor{read_net(dir / "actor.bin"), spec.action_bounds, spec.state_dim, spec.goal_dim()};
  if (ckpt.critic.f.in_dim() != spec.state_dim + spec.action_dim + spec.goal_dim() + 1 ||
      ckpt.critic.f.out_dim() != spec.goal_dim())
    throw ShapeError("checkpoint critic does not fit the environment");
  if (ckpt.actor.net.in_dim() != spec.state_dim + spec.goal_dim() + 1 || ckpt.actor.net.out_dim() != spec.action_dim)
    throw ShapeError("checkpoint actor does not fit the environment");
  return ckpt;
}

}  // namespace tdm
