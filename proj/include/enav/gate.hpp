#pragma once

#include <functional>
#include <optional>

#include "enav/policy.hpp"
#include "enav/semantic_map.hpp"

namespace enav {

enum class Strategy : uint8_t { NoThink = 0, DenseThink = 1, EveryK = 2, Hybrid = 3 };

const char* strategy_name(Strategy s);
std::optional<Strategy> strategy_from_name(std::string_view name);

struct GateConfig {
  Strategy strategy = Strategy::Hybrid;
  double tau = 0.6;  // normalized-entropy threshold
  int ntw = 5;       // no-thinking window K
  int max_trace_len = 8;
};

struct GateState {
  int steps_since_think = 0;
};

// Counter starts at K so thinking is permitted on step 0; it resets to 0
// only when a think-mode output is actually emitted (a window-blocked
// high-entropy step does not reset it).
GateState init_gate_state(const GateConfig& cfg);

// Sentinel for prelim_entropy_norm on steps that produced no preliminary
// no-think pass (dense-think and EveryK think steps).
inline constexpr double kNoPrelimEntropy = -1.0;

struct StepDecision {
  PolicyOutput output;  // the executed output
  double prelim_entropy_norm = kNoPrelimEntropy;
  bool thought = false;
  int tokens_generated = 0;  // discarded preliminary tokens included
};

// One gated decision. ctx.mode is overwritten per strategy. Sampling for the
// preliminary no-think pass and for the think pass uses seeds derived from
// step_seed with distinct phase tags, so strategies that share seeds draw
// identical samples for identical contexts.
StepDecision decide_and_act(const PolicyNet& net, PolicyContext& ctx,
                            const GateConfig& cfg, GateState& gs,
                            double temperature, uint64_t step_seed);

// Builds PolicyContexts while an episode unfolds: short-term windows plus
// the annotated-map features.
class ContextBuilder {
 public:
  ContextBuilder(const GridHouse& house, const FeatureConfig& feats, int window);

  void on_reset(const AgentPose& pose, const Observation& obs);
  void on_step(NavAction action, const AgentPose& pose, const Observation& obs);
  // Map features come from override_map when given (noisy-map evaluation).
  PolicyContext context(Mode mode, const AnnotatedMap* override_map = nullptr) const;
  const AnnotatedMap& map() const { return map_; }

 private:
  FeatureConfig feats_;
  int window_;
  int instruction_;
  AnnotatedMap map_;
  std::vector<Observation> obs_window_;
  std::vector<int> action_window_;
};

struct StepLog {
  int clock = 0;
  AgentPose pose_before;
  int action = 0;
  double reward = 0.0;
  bool done = false;
  bool success = false;
  int geodesic = 0;
  double prelim_entropy_norm = kNoPrelimEntropy;
  bool thought = false;
  int tokens = 0;
};

struct EpisodeRecord {
  uint64_t task_seed = 0;
  Strategy strategy = Strategy::NoThink;
  bool success = false;
  int steps = 0;
  int shortest = 0;  // oracle episode length w_i
  long tokens_generated = 0;
  int thought_steps = 0;
  std::vector<StepLog> step_logs;
  std::optional<AnnotatedMap> final_map;
};

std::string step_log_json(const StepLog& log);

struct CorruptionParams {
  double p_drop = 0.0;
  double p_mislabel = 0.0;
};

struct EpisodeOptions {
  EnvOptions env;
  GateConfig gate;
  double temperature = 0.0;
  std::optional<CorruptionParams> corruption;
  bool keep_map = false;
};

EpisodeRecord run_episode(const PolicyNet& net, const GridHouse& house,
                          const EpisodeOptions& opts, uint64_t episode_seed,
                          const FeatureConfig& feats = {},
                          std::shared_ptr<const NavOracle> oracle = nullptr);

// Privileged shortest-path rollout used by the expert pipeline and as a
// simulator fixture.
EpisodeRecord run_expert_episode(const GridHouse& house, const EnvOptions& env,
                                 std::shared_ptr<const NavOracle> oracle = nullptr);

struct TokenAccounting {
  double tokens_per_episode = 0.0;
  double tokens_per_step = 0.0;
  double thinking_ratio = 0.0;
};

TokenAccounting token_accounting(const EpisodeRecord& record);

}  // namespace enav
