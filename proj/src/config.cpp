#include "enav/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "enav/rng.hpp"

namespace enav {

namespace {

enum class Kind { Int, U64, Double, Bool, String, DoubleList };

struct Field {
  const char* key;
  Kind kind;
  void* target;
  double lo = 0.0;
  double hi = 0.0;
  bool bounded = false;
};

std::vector<Field> fields(RunConfig& c) {
  auto f = [](const char* key, Kind kind, void* target) {
    return Field{key, kind, target};
  };
  auto fr = [](const char* key, Kind kind, void* target, double lo, double hi) {
    return Field{key, kind, target, lo, hi, true};
  };
  return {
      f("run.seed", Kind::U64, &c.run_seed),
      f("run.out", Kind::String, &c.run_out),
      fr("run.workers", Kind::Int, &c.run_workers, 1, 256),
      fr("env.width", Kind::Int, &c.env_width, 5, 256),
      fr("env.height", Kind::Int, &c.env_height, 5, 256),
      fr("env.rooms_min", Kind::Int, &c.env_rooms_min, 1, 64),
      fr("env.rooms_max", Kind::Int, &c.env_rooms_max, 1, 64),
      fr("env.object_density", Kind::Double, &c.env_object_density, 0.0, 1.0),
      fr("env.categories", Kind::Int, &c.env_categories, 1, 64),
      fr("env.landmark_fraction", Kind::Double, &c.env_landmark_fraction, 0.0, 1.0),
      fr("env.view_deep", Kind::Int, &c.env_view_deep, 1, 64),
      fr("env.view_wide", Kind::Int, &c.env_view_wide, 1, 63),
      fr("env.success_radius", Kind::Int, &c.env_success_radius, 0, 256),
      fr("env.max_steps_train", Kind::Int, &c.env_max_steps_train, 1, 100000),
      fr("env.max_steps_eval", Kind::Int, &c.env_max_steps_eval, 1, 100000),
      fr("map.pool_grid", Kind::Int, &c.map_pool_grid, 1, 64),
      fr("map.pool_span", Kind::Int, &c.map_pool_span, 2, 128),
      fr("map.max_landmarks", Kind::Int, &c.map_max_landmarks, 0, 64),
      fr("policy.state_width", Kind::Int, &c.policy_state_width, 4, 4096),
      fr("policy.token_embed", Kind::Int, &c.policy_token_embed, 2, 1024),
      fr("policy.obs_embed", Kind::Int, &c.policy_obs_embed, 2, 2048),
      fr("policy.cell_embed", Kind::Int, &c.policy_cell_embed, 1, 256),
      fr("policy.window", Kind::Int, &c.policy_window, 1, 32),
      fr("policy.max_trace_len", Kind::Int, &c.policy_max_trace_len, 0, 64),
      f("gate.strategy", Kind::String, &c.gate_strategy),
      fr("gate.tau", Kind::Double, &c.gate_tau, 0.0, 1.0),
      fr("gate.ntw", Kind::Int, &c.gate_ntw, 0, 10000),
      fr("data.steps", Kind::Int, &c.data_steps, 1, 100000000),
      fr("data.top_fraction", Kind::Double, &c.data_top_fraction, 0.0, 1.0),
      fr("data.annotator_noise", Kind::Double, &c.data_annotator_noise, 0.0, 1.0),
      fr("data.annotator_attempts", Kind::Int, &c.data_annotator_attempts, 1, 1000),
      fr("sft.epochs", Kind::Int, &c.sft_epochs, 1, 10000),
      fr("sft.batch", Kind::Int, &c.sft_batch, 1, 1000000),
      fr("sft.lr", Kind::Double, &c.sft_lr, 1e-12, 10.0),
      fr("sft.bootstrap_epochs", Kind::Int, &c.sft_bootstrap_epochs, 1, 10000),
      fr("rl.gamma", Kind::Double, &c.rl_gamma, 0.0, 1.0),
      fr("rl.lambda", Kind::Double, &c.rl_lambda, 0.0, 1.0),
      fr("rl.clip_eps", Kind::Double, &c.rl_clip_eps, 1e-6, 10.0),
      fr("rl.beta", Kind::Double, &c.rl_beta, 0.0, 100.0),
      fr("rl.lr", Kind::Double, &c.rl_lr, 0.0, 10.0),
      fr("rl.critic_lr", Kind::Double, &c.rl_critic_lr, 0.0, 10.0),
      fr("rl.value_coef", Kind::Double, &c.rl_value_coef, 0.0, 100.0),
      fr("rl.rollout_episodes", Kind::Int, &c.rl_rollout_episodes, 1, 100000),
      fr("rl.minibatch", Kind::Int, &c.rl_minibatch, 1, 1000000),
      fr("rl.epochs", Kind::Int, &c.rl_epochs, 1, 1000),
      fr("rl.updates", Kind::Int, &c.rl_updates, 1, 100000),
      f("rl.adv_norm", Kind::Bool, &c.rl_adv_norm),
      fr("rl.temperature", Kind::Double, &c.rl_temperature, 0.0, 100.0),
      fr("eval.tasks", Kind::Int, &c.eval_tasks, 1, 1000000),
      fr("eval.temperature", Kind::Double, &c.eval_temperature, 0.0, 100.0),
      fr("eval.pass_k_samples", Kind::Int, &c.eval_pass_k_samples, 1, 10000),
      fr("eval.pass_k_temperature", Kind::Double, &c.eval_pass_k_temperature, 0.0, 100.0),
      fr("eval.difficulty_b1", Kind::Int, &c.eval_difficulty_b1, 1, 100000),
      fr("eval.difficulty_b2", Kind::Int, &c.eval_difficulty_b2, 1, 100000),
      fr("sweep.episodes", Kind::Int, &c.sweep_episodes, 1, 1000000),
      f("sweep.qvalue_taus", Kind::DoubleList, &c.sweep_qvalue_taus),
      f("sweep.ntw_values", Kind::DoubleList, &c.sweep_ntw_values),
      f("sweep.robust_p_drop", Kind::DoubleList, &c.sweep_robust_p_drop),
      f("sweep.robust_p_mislabel", Kind::DoubleList, &c.sweep_robust_p_mislabel),
  };
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

double parse_double_or_throw(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (...) {
    throw ConfigError(where + ": not a number: '" + v + "'");
  }
}

void apply_value(const Field& f, const std::string& value, const std::string& where) {
  switch (f.kind) {
    case Kind::Int: {
      const double d = parse_double_or_throw(value, where);
      if (d != std::floor(d)) throw ConfigError(where + ": expected an integer");
      if (f.bounded && (d < f.lo || d > f.hi)) {
        throw ConfigError(where + ": value " + value + " outside [" +
                          std::to_string(static_cast<long>(f.lo)) + ", " +
                          std::to_string(static_cast<long>(f.hi)) + "] for " + f.key);
      }
      *static_cast<int*>(f.target) = static_cast<int>(d);
      break;
    }
    case Kind::U64: {
      try {
        *static_cast<uint64_t*>(f.target) = std::stoull(value);
      } catch (...) {
        throw ConfigError(where + ": not an unsigned integer: '" + value + "'");
      }
      break;
    }
    case Kind::Double: {
      const double d = parse_double_or_throw(value, where);
      if (f.bounded && (d < f.lo || d > f.hi)) {
        throw ConfigError(where + ": value " + value + " outside [" +
                          std::to_string(f.lo) + ", " + std::to_string(f.hi) +
                          "] for " + f.key);
      }
      *static_cast<double*>(f.target) = d;
      break;
    }
    case Kind::Bool: {
      if (value == "true" || value == "1") {
        *static_cast<bool*>(f.target) = true;
      } else if (value == "false" || value == "0") {
        *static_cast<bool*>(f.target) = false;
      } else {
        throw ConfigError(where + ": expected true/false for " + std::string(f.key));
      }
      break;
    }
    case Kind::String: {
      *static_cast<std::string*>(f.target) = value;
      break;
    }
    case Kind::DoubleList: {
      std::vector<double> out;
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_double_or_throw(item, where));
      }
      if (out.empty()) throw ConfigError(where + ": empty list for " + std::string(f.key));
      *static_cast<std::vector<double>*>(f.target) = std::move(out);
      break;
    }
  }
}

void cross_validate(const RunConfig& c) {
  if (c.env_rooms_max < c.env_rooms_min) {
    throw ConfigError("env.rooms_max must be >= env.rooms_min");
  }
  if (c.env_view_wide % 2 == 0) {
    throw ConfigError("env.view_wide must be odd");
  }
  if (c.map_pool_span % c.map_pool_grid != 0) {
    throw ConfigError("map.pool_span must be a multiple of map.pool_grid");
  }
  if (!strategy_from_name(c.gate_strategy)) {
    throw ConfigError("gate.strategy must be one of nothink|dense|everyk|hybrid");
  }
  if (c.eval_difficulty_b2 < c.eval_difficulty_b1) {
    throw ConfigError("eval.difficulty_b2 must be >= eval.difficulty_b1");
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  auto table = fields(cfg);

  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");

    bool found = false;
    for (const auto& f : table) {
      if (key == f.key) {
        apply_value(f, value, where);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError(where + ": unknown key '" + key + "'");
  }
  cross_validate(cfg);
  return cfg;
}

RunConfig validate_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string serialize_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  auto table = fields(copy);
  std::string out;
  char buf[64];
  for (const auto& f : table) {
    out += f.key;
    out += " = ";
    switch (f.kind) {
      case Kind::Int:
        out += std::to_string(*static_cast<int*>(f.target));
        break;
      case Kind::U64:
        out += std::to_string(*static_cast<uint64_t*>(f.target));
        break;
      case Kind::Double:
        std::snprintf(buf, sizeof(buf), "%.17g", *static_cast<double*>(f.target));
        out += buf;
        break;
      case Kind::Bool:
        out += *static_cast<bool*>(f.target) ? "true" : "false";
        break;
      case Kind::String:
        out += *static_cast<std::string*>(f.target);
        break;
      case Kind::DoubleList: {
        const auto& v = *static_cast<std::vector<double>*>(f.target);
        for (size_t i = 0; i < v.size(); ++i) {
          std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
          if (i) out += ", ";
          out += buf;
        }
        break;
      }
    }
    out += "\n";
  }
  return out;
}

uint64_t config_hash(const RunConfig& cfg) { return fnv1a(serialize_config(cfg)); }

TaskSetup RunConfig::to_task_setup() const {
  TaskSetup s;
  s.gen.width = env_width;
  s.gen.height = env_height;
  s.gen.rooms_min = env_rooms_min;
  s.gen.rooms_max = env_rooms_max;
  s.gen.object_density = env_object_density;
  s.gen.categories = env_categories;
  s.gen.landmark_fraction = env_landmark_fraction;
  s.env_train.view_deep = env_view_deep;
  s.env_train.view_wide = env_view_wide;
  s.env_train.success_radius = env_success_radius;
  s.env_train.max_steps = env_max_steps_train;
  s.env_eval = s.env_train;
  s.env_eval.max_steps = env_max_steps_eval;
  s.feats.pool_grid = map_pool_grid;
  s.feats.pool_span = map_pool_span;
  s.feats.max_landmarks = map_max_landmarks;
  s.gate = to_gate_config();
  s.window = policy_window;
  s.master_seed = run_seed;
  s.workers = run_workers;
  return s;
}

GateConfig RunConfig::to_gate_config() const {
  GateConfig g;
  g.strategy = *strategy_from_name(gate_strategy);
  g.tau = gate_tau;
  g.ntw = gate_ntw;
  g.max_trace_len = policy_max_trace_len;
  return g;
}

PolicyConfig RunConfig::to_policy_config() const {
  return make_policy_config(to_task_setup(), policy_state_width, policy_token_embed,
                            policy_obs_embed, policy_cell_embed);
}

PPOConfig RunConfig::to_ppo_config() const {
  PPOConfig p;
  p.gamma = rl_gamma;
  p.lambda = rl_lambda;
  p.clip_eps = rl_clip_eps;
  p.beta = rl_beta;
  p.lr = rl_lr;
  p.critic_lr = rl_critic_lr;
  p.value_coef = rl_value_coef;
  p.rollout_episodes = rl_rollout_episodes;
  p.minibatch = rl_minibatch;
  p.epochs = rl_epochs;
  p.updates = rl_updates;
  p.adv_norm = rl_adv_norm;
  p.rollout_temperature = rl_temperature;
  return p;
}

}  // namespace enav
