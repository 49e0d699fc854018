#pragma once

#include <iosfwd>

#include "enav/gate.hpp"

namespace enav {

// Everything that parametrizes one experiment: world generation, episode
// options, featurization, gating defaults, seeds. House streams for training
// and held-out evaluation are derived from the master seed with distinct
// tags.
struct TaskSetup {
  GenParams gen;
  EnvOptions env_train;
  EnvOptions env_eval;
  FeatureConfig feats;
  GateConfig gate;
  int window = 4;
  uint64_t master_seed = 1;
  int workers = 1;
};

inline TaskSetup default_task_setup() {
  TaskSetup s;
  s.env_train.max_steps = 300;
  s.env_eval.max_steps = 600;
  return s;
}

uint64_t train_house_seed(const TaskSetup& setup, uint64_t index);
uint64_t eval_house_seed(const TaskSetup& setup, uint64_t index);

PolicyConfig make_policy_config(const TaskSetup& setup, int state_width = 128,
                                int token_embed = 32, int obs_embed = 48,
                                int cell_embed = 8);

// Privileged annotations captured at collection time; the reasoning
// annotator runs from these without touching the simulator again.
struct ExpertPriv {
  bool target_visible = false;
  int geodesic = 0;
  int dir_token = 0;       // direction of the expert plan's first move
  int frontier_token = 0;  // nearest-frontier direction at this step
  int expert_action = 0;
};

struct ExpertSample {
  PolicyContext ctx;
  std::vector<int> target_tokens;
  double source_entropy = -1.0;  // filled by entropy_filter
  uint64_t house_seed = 0;
  int step_idx = 0;
  int sample_id = 0;
  ExpertPriv priv;
};

struct DatasetMeta {
  uint64_t house_seed_base = 0;
  int n_steps = 0;
  double top_fraction = 0.0;
  double annotator_noise = 0.0;
  int annotator_attempts = 0;
  int discarded = 0;
};

struct HybridDataset {
  std::vector<ExpertSample> nrd;  // no-reasoning subset
  std::vector<ExpertSample> rd;   // reasoning subset
  DatasetMeta meta;
};

// Collects exactly n_steps no-think samples from privileged expert rollouts
// on the training house stream. Houses that fail to generate or are
// unsolvable are skipped with a log line.
HybridDataset collect_expert_dataset(const TaskSetup& setup, int n_steps,
                                     std::ostream* log = nullptr);

// Scores every nrd sample's no-think action entropy under the given net,
// fills source_entropy, and returns the indices of the top `top_fraction`
// by entropy (ties broken by sample id).
std::vector<size_t> entropy_filter(HybridDataset& ds, const PolicyNet& net,
                                   double top_fraction = 0.2);

// Stochastic expert annotator with thought bootstrapping: draws noisy traces
// until the implied action matches the expert action, at most max_attempts
// times, then applies the implied-action consistency filter. Returns the
// number of discarded samples.
int annotate_reasoning(HybridDataset& ds, std::span<const size_t> selected,
                       double annotator_noise, int max_attempts, uint64_t seed);

// The exact reasoning trace the deterministic annotator would emit (before
// noise) for one sample.
std::vector<int> true_trace(const ExpertSample& sample);

struct SftResult {
  std::vector<double> epoch_losses;  // mean per-sample NLL
};

// Token-level NLL on the mixed dataset, Adam, minibatch updates; both modes
// interleave through a shuffled index stream.
SftResult hsft_train(PolicyNet& net, const HybridDataset& ds, int epochs = 1,
                     int batch = 256, double lr = 2e-3, uint64_t seed = 0);

struct Transition {
  PolicyContext ctx;
  std::vector<int> tokens;
  std::vector<double> old_logprobs;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
  bool think = false;  // I_Tk
  double advantage = 0.0;
  double ret = 0.0;
  int episode = 0;
};

struct RolloutBuffer {
  std::vector<Transition> transitions;
  int episodes = 0;
  int successes = 0;
  long tokens = 0;
  double success_rate() const {
    return episodes > 0 ? static_cast<double>(successes) / episodes : 0.0;
  }
};

// Stage 1 rolls out in no-think mode, stage 2 with the hybrid strategy.
// Values come from the critic when one is given, else from the actor's own
// value head.
RolloutBuffer collect_rollouts(const PolicyNet& net, const TaskSetup& setup,
                               int stage, int n_episodes, double temperature,
                               uint64_t house_index_base, uint64_t seed,
                               const PolicyNet* critic = nullptr);

void compute_gae(RolloutBuffer& buffer, double gamma, double lambda,
                 bool normalize);

struct PPOConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.2;
  double beta = 0.1;  // stage-2 KL weight; stage 1 forces 0
  double lr = 1e-4;
  double critic_lr = 1e-3;
  double value_coef = 0.5;
  int rollout_episodes = 48;
  int minibatch = 384;
  int epochs = 2;
  int updates = 10;
  bool adv_norm = true;
  double rollout_temperature = 1.0;
};

struct AdamState {
  std::vector<double> m, v;
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(std::vector<double>& params, std::span<const double> grad,
               AdamState& state, double lr);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double mean_kl = 0.0;
  int skipped_minibatches = 0;
};

struct MinibatchLoss {
  double policy = 0.0;  // negative mean clipped surrogate
  double value = 0.0;   // mean 0.5 (v - R)^2, unweighted
  double kl = 0.0;      // mean per-position KL to ref
  long policy_tokens = 0;
  long kl_positions = 0;
  long seqs = 0;
  bool finite = true;

  double total(const PPOConfig& cfg) const {
    return policy + cfg.beta * kl + cfg.value_coef * value;
  }
};

// Loss and (optionally) gradient of the Eq.-4 objective over one minibatch
// of buffer indices; the exact function ppo_update optimizes, exposed so
// tests can check its gradient against finite differences.
MinibatchLoss ppo_minibatch_gradient(const PolicyNet& net, const PolicyNet* ref,
                                     const RolloutBuffer& buffer,
                                     std::span<const size_t> indices,
                                     const PPOConfig& cfg, int stage,
                                     std::vector<double>* grad);

// One PPO update over the buffer. Stage 1: clipped surrogate on every
// sequence, no KL. Stage 2: clipped surrogate on think sequences only, exact
// per-position KL to ref on no-think sequences, value regression everywhere.
// With a separate critic the actor sees no value gradient; the critic's
// value head regresses to returns under its own optimizer state.
UpdateStats ppo_update(PolicyNet& net, const PolicyNet* ref, const RolloutBuffer& buffer,
                       const PPOConfig& cfg, int stage, AdamState& adam,
                       uint64_t seed, PolicyNet* critic = nullptr,
                       AdamState* critic_adam = nullptr);

struct UpdateRecord {
  int stage = 0;
  int update_idx = 0;
  double rollout_sr = 0.0;
  double mean_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double mean_kl = 0.0;
  double tokens_per_step = 0.0;
};

std::string update_record_json(const UpdateRecord& r);

struct StageResult {
  PolicyNet best_net;
  PolicyNet final_critic;
  int best_update = 0;
  double best_sr = 0.0;
  std::vector<UpdateRecord> records;
};

// Runs cfg.updates PPO updates, checkpointing the pre-update net each time
// (stage{N}_update{i}.ckpt) and returning the checkpoint with the highest
// rollout success rate (also written as stage{N}_best.ckpt). checkpoint_dir
// may be empty to skip persistence. The critic starts as a copy of the
// incoming net unless critic_init is given.
StageResult train_stage(PolicyNet net, const PolicyNet* ref, int stage,
                        const PPOConfig& cfg, const TaskSetup& setup,
                        const std::string& checkpoint_dir,
                        uint64_t house_index_base, std::ostream* log = nullptr,
                        const PolicyNet* critic_init = nullptr);

struct TwoStageResult {
  PolicyNet stage1_best;
  PolicyNet stage2_best;
  std::vector<UpdateRecord> records;
};

TwoStageResult train_two_stage(const PolicyNet& init_net, const PPOConfig& cfg,
                               const TaskSetup& setup,
                               const std::string& checkpoint_dir,
                               std::ostream* log = nullptr);

// Dataset persistence: line-delimited JSON samples plus a sidecar manifest
// carrying counts, seeds, filter settings and a content hash.
std::string sample_to_json(const ExpertSample& s);
ExpertSample sample_from_json(const std::string& line, const PolicyConfig& cfg);
void save_dataset(const HybridDataset& ds, const std::string& dir);
HybridDataset load_dataset(const std::string& dir, const PolicyConfig& cfg);

}  // namespace enav
