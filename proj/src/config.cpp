#include "tdm/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "tdm/errors.hpp"

namespace tdm {

std::string to_string(Algo algo) {
  switch (algo) {
    case Algo::kTdm: return "tdm";
    case Algo::kDdpg: return "ddpg";
    case Algo::kModelBasedMpc: return "mbmpc";
  }
  return "?";
}

Algo parse_algo(const std::string& name) {
  if (name == "tdm") return Algo::kTdm;
  if (name == "ddpg") return Algo::kDdpg;
  if (name == "mbmpc") return Algo::kModelBasedMpc;
  throw ConfigError("unknown algo '" + name + "' (expected tdm, ddpg or mbmpc)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

template <typename Int>
std::vector<Int> parse_list(const std::string& key, const std::string& v) {
  std::vector<Int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int<Int>(key, trim(item)));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
  return os.str();
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto add = [&](std::string key, auto set, auto get) { f.push_back({std::move(key), set, get}); };
#define TDM_INT_FIELD(name, member, type)                                                      \
  add(                                                                                         \
      name, [](ExperimentConfig& c, const std::string& v) { c.member = parse_int<type>(name, v); }, \
      [](const ExperimentConfig& c) { return std::to_string(c.member); })
#define TDM_REAL_FIELD(name, member)                                                              \
  add(                                                                                            \
      name, [](ExperimentConfig& c, const std::string& v) { c.member = parse_double(name, v); }, \
      [](const ExperimentConfig& c) { return fmt(c.member); })

    add("env", [](ExperimentConfig& c, const std::string& v) { c.env = v; },
        [](const ExperimentConfig& c) { return c.env; });
    add("algo", [](ExperimentConfig& c, const std::string& v) { c.algo = parse_algo(v); },
        [](const ExperimentConfig& c) { return to_string(c.algo); });
    TDM_INT_FIELD("horizon", horizon, int);
    TDM_INT_FIELD("batch_size", tdm.batch_size, int);
    TDM_INT_FIELD("updates_per_step", tdm.updates_per_step, int);
    TDM_REAL_FIELD("polyak", tdm.polyak);
    TDM_REAL_FIELD("exploration_noise", tdm.exploration_noise);
    TDM_INT_FIELD("tau_max", tdm.tau_max, int);
    TDM_REAL_FIELD("critic_lr", tdm.critic_lr);
    TDM_REAL_FIELD("actor_lr", tdm.actor_lr);
    add("supervision_mode",
        [](ExperimentConfig& c, const std::string& v) { c.tdm.supervision = parse_supervision_mode(v); },
        [](const ExperimentConfig& c) { return to_string(c.tdm.supervision); });
    add("relabel", [](ExperimentConfig& c, const std::string& v) { c.tdm.relabel = parse_relabel_strategy(v); },
        [](const ExperimentConfig& c) { return to_string(c.tdm.relabel); });
    TDM_INT_FIELD("future_window", tdm.future_window, int);
    add("hidden", [](ExperimentConfig& c, const std::string& v) { c.tdm.hidden = parse_list<int>("hidden", v); },
        [](const ExperimentConfig& c) { return join(c.tdm.hidden); });
    TDM_INT_FIELD("buffer_capacity", tdm.buffer_capacity, std::size_t);
    TDM_REAL_FIELD("reward_scale", tdm.reward_scale);
    add("policy", [](ExperimentConfig& c, const std::string& v) { c.tdm.policy = parse_policy_mode(v); },
        [](const ExperimentConfig& c) { return to_string(c.tdm.policy); });
    TDM_INT_FIELD("candidates", tdm.planner.candidates, int);
    TDM_INT_FIELD("K", tdm.planner.k, int);
    TDM_REAL_FIELD("gamma", ddpg.gamma);
    TDM_INT_FIELD("mpc_horizon", model_based.shooting.horizon, int);
    TDM_INT_FIELD("mpc_sequences", model_based.shooting.sequences, int);
    TDM_INT_FIELD("warmup_rollouts", model_based.warmup_rollouts, int);
    TDM_REAL_FIELD("model_lr", model_based.learning_rate);
    add("seeds", [](ExperimentConfig& c, const std::string& v) { c.seeds = parse_list<std::uint64_t>("seeds", v); },
        [](const ExperimentConfig& c) { return join(c.seeds); });
    TDM_INT_FIELD("env_steps", env_steps, std::int64_t);
    TDM_INT_FIELD("eval_cadence", eval_cadence, std::int64_t);
    TDM_INT_FIELD("eval_episodes", eval_episodes, int);
    TDM_REAL_FIELD("stop_at_distance", stop_at_distance);
    TDM_INT_FIELD("tabular_steps", tabular_steps, int);
    TDM_INT_FIELD("workers", workers, int);
    add("output_dir", [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
        [](const ExperimentConfig& c) { return c.output_dir; });
#undef TDM_INT_FIELD
#undef TDM_REAL_FIELD
    return f;
  }();
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

bool ExperimentConfig::is_tabular() const { return is_builtin_mdp(env); }

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seed list must be nonempty");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (env_steps < 0) throw ConfigError("env_steps must be >= 0");
  if (eval_cadence < 1) throw ConfigError("eval_cadence must be >= 1");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (stop_at_distance < 0.0) throw ConfigError("stop_at_distance must be >= 0");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (output_dir.empty()) throw ConfigError("output_dir must be nonempty");
  if (!(ddpg.gamma >= 0.0 && ddpg.gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (model_based.shooting.horizon < 1 || model_based.shooting.sequences < 1)
    throw ConfigError("mpc_horizon and mpc_sequences must be >= 1");
  if (model_based.warmup_rollouts < 1) throw ConfigError("warmup_rollouts must be >= 1");
  if (!(model_based.learning_rate > 0.0)) throw ConfigError("model_lr must be positive");
  tdm.validate();
  if (tabular_steps < 0) throw ConfigError("tabular_steps must be >= 0");
  if (is_tabular()) return;
  make_env(env, horizon);
  if (tdm.tau_max >= horizon) throw ConfigError("tau_max must be < horizon");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  for (const auto& f : fields()) os << f.key << " = " << f.get(*this) << '\n';
  return os.str();
}

std::uint64_t ExperimentConfig::hash() const {
  // FNV-1a over the canonical text of every key that can change results.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& f : fields()) {
    if (f.key == "output_dir" || f.key == "workers") continue;
    for (unsigned char c : f.key + '=' + f.get(*this) + '\n') {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

}  // namespace tdm
