#pragma once

#include <string>

#include "enav/trainer.hpp"

namespace enav {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat experiment configuration. File format: `section.key = value` lines,
// `#` comments, unknown keys rejected with line numbers. Lists are
// comma-separated scalars.
struct RunConfig {
  uint64_t run_seed = 1;
  std::string run_out = "runs";
  int run_workers = 1;

  int env_width = 16;
  int env_height = 16;
  int env_rooms_min = 3;
  int env_rooms_max = 6;
  double env_object_density = 0.06;
  int env_categories = 12;
  double env_landmark_fraction = 0.5;
  int env_view_deep = 7;
  int env_view_wide = 5;
  int env_success_radius = 4;
  int env_max_steps_train = 300;
  int env_max_steps_eval = 600;

  int map_pool_grid = 8;
  int map_pool_span = 16;
  int map_max_landmarks = 4;

  int policy_state_width = 128;
  int policy_token_embed = 32;
  int policy_obs_embed = 48;
  int policy_cell_embed = 8;
  int policy_window = 4;
  int policy_max_trace_len = 8;

  std::string gate_strategy = "hybrid";
  double gate_tau = 0.6;
  int gate_ntw = 5;

  int data_steps = 50000;
  double data_top_fraction = 0.2;
  double data_annotator_noise = 0.1;
  int data_annotator_attempts = 8;

  int sft_epochs = 1;
  int sft_batch = 256;
  double sft_lr = 2e-3;
  int sft_bootstrap_epochs = 1;

  double rl_gamma = 0.99;
  double rl_lambda = 0.95;
  double rl_clip_eps = 0.2;
  double rl_beta = 0.1;
  double rl_lr = 1e-4;
  double rl_critic_lr = 1e-3;
  double rl_value_coef = 0.5;
  int rl_rollout_episodes = 48;
  int rl_minibatch = 384;
  int rl_epochs = 2;
  int rl_updates = 10;
  bool rl_adv_norm = true;
  double rl_temperature = 1.0;

  int eval_tasks = 200;
  double eval_temperature = 0.2;
  int eval_pass_k_samples = 16;
  double eval_pass_k_temperature = 0.2;
  int eval_difficulty_b1 = 10;
  int eval_difficulty_b2 = 25;

  int sweep_episodes = 50;
  std::vector<double> sweep_qvalue_taus = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> sweep_ntw_values = {0, 1, 3, 5, 9};
  std::vector<double> sweep_robust_p_drop = {0.0, 0.3};
  std::vector<double> sweep_robust_p_mislabel = {0.0, 0.1};

  TaskSetup to_task_setup() const;
  PolicyConfig to_policy_config() const;
  PPOConfig to_ppo_config() const;
  GateConfig to_gate_config() const;
};

// Parses and validates, applying defaults for unset keys. Throws ConfigError
// with a line-precise message on unknown keys or out-of-range values.
RunConfig parse_config_text(const std::string& text);
RunConfig validate_config(const std::string& path);

// Resolved form; parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& cfg);

uint64_t config_hash(const RunConfig& cfg);

}  // namespace enav
