// Command-line front end: train, eval, ablate, oracle-check.
//
// Exit codes: 0 success, 1 tolerance not met (oracle-check), 2 config
// error, 3 numeric-health abort.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "tdm/errors.hpp"
#include "tdm/harness.hpp"
#include "tdm/oracle.hpp"

namespace {

using namespace tdm;

constexpr int kExitTolerance = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

ExperimentConfig build_config(const std::string& path, const std::vector<std::string>& overrides,
                              const std::string& seed_override, const std::string& output) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!seed_override.empty()) cfg.set("seeds", seed_override);
  if (!output.empty()) cfg.output_dir = output;
  cfg.validate();
  return cfg;
}

int numeric_status(const ExperimentResult& r) {
  for (const auto& s : r.seeds)
    if (s.failed) {
      std::cerr << "seed " << s.seed << " failed: " << s.error << '\n';
      return kExitNumeric;
    }
  return 0;
}

void print_summary(const ExperimentConfig& cfg, const ExperimentResult& r) {
  if (cfg.is_tabular()) {
    for (const auto& s : r.seeds)
      std::cout << "seed " << s.seed << ": max_abs " << s.oracle.max_abs << ", argmax mismatches "
                << s.oracle.argmax_mismatches << '\n';
    return;
  }
  for (const auto& s : r.seeds) {
    std::cout << "seed " << s.seed << ": ";
    if (s.curve.empty()) std::cout << "no evaluations\n";
    else std::cout << "final median " << s.curve.back().median << " at " << s.curve.back().env_steps << " steps\n";
  }
  const auto hit = steps_to_threshold(r.aggregate, kReachThreshold);
  std::cout << "aggregate median below " << kReachThreshold << ": "
            << (hit < 0 ? std::string("never") : std::to_string(hit) + " env steps") << '\n'
            << "outputs in " << cfg.output_dir << '\n';
}

// ---------------------------------------------------------------------------
// oracle-check

TabularMdp resolve_mdp(const std::string& name) {
  return is_builtin_mdp(name) ? make_builtin_mdp(name) : load_tabular_mdp_file(name);
}

struct OracleRow {
  std::string check;
  std::string value;
  std::string tolerance;
  bool pass;
};

void print_table(const std::vector<OracleRow>& rows) {
  std::size_t w0 = 5, w1 = 5, w2 = 9;
  for (const auto& r : rows) {
    w0 = std::max(w0, r.check.size());
    w1 = std::max(w1, r.value.size());
    w2 = std::max(w2, r.tolerance.size());
  }
  auto line = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d) {
    std::cout << std::left << std::setw(static_cast<int>(w0)) << a << "  " << std::setw(static_cast<int>(w1)) << b
              << "  " << std::setw(static_cast<int>(w2)) << c << "  " << d << '\n';
  };
  line("check", "value", "tolerance", "result");
  for (const auto& r : rows) line(r.check, r.value, r.tolerance, r.pass ? "pass" : "FAIL");
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

std::vector<OracleRow> dp_self_check(const TabularMdp& mdp, const TdmTable& q) {
  double max_positive = 0.0, base_err = 0.0;
  int monotone_violations = 0;
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions; ++a) {
      const int next = tabular_step(mdp, s, a);
      for (int g = 0; g < mdp.num_states; ++g)
        for (int tau = 0; tau <= q.tau_max(); ++tau) {
          max_positive = std::max(max_positive, q.at(s, a, g, tau));
          if (tau == 0) base_err = std::max(base_err, std::abs(q.at(s, a, g, 0) + mdp.distance(next, g)));
          if (tau < q.tau_max() && q.at(s, a, g, tau + 1) < q.at(s, a, g, tau)) ++monotone_violations;
        }
    }
  return {{"max entry", num(max_positive), "<= 0", max_positive <= 0.0},
          {"tau=0 layer error", num(base_err), "== 0", base_err == 0.0},
          {"monotone-in-tau violations", std::to_string(monotone_violations), "== 0", monotone_violations == 0}};
}

int oracle_check(const std::string& mdp_name, int tau_max, const std::string& mode, int steps, int episodes,
                 std::uint64_t seed) {
  if (tau_max < 0) throw ConfigError("--tau-max must be >= 0");
  const TabularMdp mdp = resolve_mdp(mdp_name);
  const TdmTable exact = dp_solve(mdp, tau_max);
  std::vector<OracleRow> rows;
  std::cout << "mdp " << mdp.name << ": " << mdp.num_states << " states, " << mdp.num_actions
            << " actions, tau_max " << tau_max << ", mode " << mode << "\n\n";
  if (mode == "dp") {
    rows = dp_self_check(mdp, exact);
  } else if (mode == "tabular") {
    Rng rng(seed);
    TabularLearningConfig cfg;
    cfg.episodes = episodes;
    const TableComparison c = compare_tables(tabular_tdm_qlearning(mdp, tau_max, cfg, rng), exact);
    rows = {{"max abs error", num(c.max_abs), "< 1e-06", c.max_abs < 1e-6},
            {"argmax mismatches", std::to_string(c.argmax_mismatches), "== 0", c.argmax_mismatches == 0}};
  } else if (mode == "neural") {
    NeuralTabularConfig cfg;
    cfg.steps = steps;
    const TdmCritic critic = train_tabular_critic(mdp, tau_max, cfg, seed);
    const TableComparison c = compare_tables(critic_table(critic, mdp, tau_max), exact);
    rows = {{"max abs error", num(c.max_abs), "< 0.05", c.max_abs < 0.05},
            {"argmax mismatches", std::to_string(c.argmax_mismatches), "(info)", true}};
  } else {
    throw ConfigError("--mode must be dp, tabular or neural");
  }
  print_table(rows);
  for (const auto& r : rows)
    if (!r.pass) return kExitTolerance;
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int eval_checkpoint(const std::string& dir, int episodes, std::uint64_t seed, const std::string& policy,
                    int candidates, int k, const std::string& output) {
  const Checkpoint ckpt = load_checkpoint(dir);
  const EnvSpec spec = make_env(ckpt.config.env, ckpt.config.horizon);
  TdmLearner learner(spec, ckpt.config.tdm, ckpt.critic, ckpt.actor, ckpt.seed);
  PlannerConfig planner = ckpt.config.tdm.planner;
  if (candidates > 0) planner.candidates = candidates;
  if (k > 0) planner.k = k;
  learner.set_policy(policy.empty() ? ckpt.config.tdm.policy : parse_policy_mode(policy), planner);

  std::ofstream file;
  if (!output.empty()) {
    file.open(output, std::ios::binary);
    if (!file) throw ConfigError("cannot write " + output);
  }
  std::ostream& os = output.empty() ? std::cout : file;
  os << std::setprecision(10) << "episode,final_distance,reached,steps_to_reach\n";
  const auto results = evaluate(spec, learner, episodes, seed);
  std::vector<double> d;
  for (std::size_t i = 0; i < results.size(); ++i) {
    os << i << ',' << results[i].final_distance << ',' << (results[i].reached ? 1 : 0) << ','
       << results[i].steps_to_reach << '\n';
    d.push_back(results[i].final_distance);
  }
  std::cerr << "median final distance " << median(d) << " over " << results.size() << " episodes\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal difference model laboratory"};
  app.require_subcommand(1);

  std::string config_path, seed_override, output;
  std::vector<std::string> overrides;

  auto* train = app.add_subcommand("train", "Run a seeded experiment from a config file");
  train->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  train->add_option("--seed-override", seed_override, "Comma-separated seed list");
  train->add_option("--set", overrides, "Override a config key (key=value), repeatable");
  train->add_option("--output", output, "Output directory");

  std::string checkpoint, policy, eval_output;
  int episodes = 10, candidates = 0, k = 0;
  std::uint64_t eval_seed = 12345;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved TDM checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  eval->add_option("--episodes", episodes, "Evaluation episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "Seed for goals and planner sampling");
  eval->add_option("--policy", policy, "direct | mpc | skipK");
  eval->add_option("--candidates", candidates, "Planner candidate count");
  eval->add_option("--K", k, "Skip length for skipK");
  eval->add_option("--output", eval_output, "Per-episode CSV (default stdout)");

  std::string sweep, values;
  auto* ablate = app.add_subcommand("ablate", "Sweep one key over a list of values");
  ablate->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  ablate->add_option("--sweep", sweep, "supervision_mode | tau_max | updates_per_step")->required();
  ablate->add_option("--values", values, "Comma-separated values")->required();
  ablate->add_option("--set", overrides, "Override a config key (key=value), repeatable");
  ablate->add_option("--output", output, "Output directory");

  std::string mdp_name, mode = "dp";
  int tau_max = 8, steps = 200000, tab_episodes = 5000;
  std::uint64_t oracle_seed = 0;
  auto* oracle = app.add_subcommand("oracle-check", "Compare learned tables with exact dynamic programming");
  oracle->add_option("--mdp", mdp_name, "Builtin name (gridchain5, grid3x3, grid9x9) or MDP file")->required();
  oracle->add_option("--tau-max", tau_max, "Largest horizon");
  oracle->add_option("--mode", mode, "dp | tabular | neural");
  oracle->add_option("--steps", steps, "Gradient steps for neural mode");
  oracle->add_option("--episodes", tab_episodes, "Episodes for tabular mode");
  oracle->add_option("--seed", oracle_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      const ExperimentConfig cfg = build_config(config_path, overrides, seed_override, output);
      const ExperimentResult r = run_experiment(cfg);
      print_summary(cfg, r);
      return numeric_status(r);
    }
    if (*eval) return eval_checkpoint(checkpoint, episodes, eval_seed, policy, candidates, k, eval_output);
    if (*ablate) {
      const ExperimentConfig cfg = build_config(config_path, overrides, "", output);
      const auto list = split(values, ',');
      const AblationResult r = run_ablation(cfg, sweep, list);
      int status = 0;
      for (std::size_t i = 0; i < list.size(); ++i) {
        const auto hit = steps_to_threshold(r.runs[i].aggregate, kReachThreshold);
        std::cout << sweep << " = " << list[i] << ": steps to " << kReachThreshold << " = "
                  << (hit < 0 ? std::string("never") : std::to_string(hit)) << '\n';
        status = std::max(status, numeric_status(r.runs[i]));
      }
      return status;
    }
    if (*oracle) return oracle_check(mdp_name, tau_max, mode, steps, tab_episodes, oracle_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
