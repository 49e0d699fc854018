#include "enav/gate.hpp"

#include "enav/rng.hpp"
#include "json.hpp"

namespace enav {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::NoThink: return "nothink";
    case Strategy::DenseThink: return "dense";
    case Strategy::EveryK: return "everyk";
    case Strategy::Hybrid: return "hybrid";
  }
  return "?";
}

std::optional<Strategy> strategy_from_name(std::string_view name) {
  if (name == "nothink") return Strategy::NoThink;
  if (name == "dense") return Strategy::DenseThink;
  if (name == "everyk") return Strategy::EveryK;
  if (name == "hybrid") return Strategy::Hybrid;
  return std::nullopt;
}

GateState init_gate_state(const GateConfig& cfg) { return {cfg.ntw}; }

StepDecision decide_and_act(const PolicyNet& net, PolicyContext& ctx,
                            const GateConfig& cfg, GateState& gs,
                            double temperature, uint64_t step_seed) {
  const uint64_t prelim_seed = derive_seed(step_seed, "prelim");
  const uint64_t think_seed = derive_seed(step_seed, "think");

  StepDecision d;
  switch (cfg.strategy) {
    case Strategy::NoThink: {
      ctx.mode = Mode::NoThink;
      d.output = act_nothink(net, ctx, temperature, prelim_seed);
      d.prelim_entropy_norm = d.output.entropy_norm;
      d.thought = false;
      d.tokens_generated = 1;
      break;
    }
    case Strategy::DenseThink: {
      ctx.mode = Mode::Think;
      d.output = act_think(net, ctx, cfg.max_trace_len, temperature, think_seed);
      d.prelim_entropy_norm = kNoPrelimEntropy;
      d.thought = true;
      d.tokens_generated = static_cast<int>(d.output.tokens.size());
      break;
    }
    case Strategy::EveryK: {
      if (gs.steps_since_think >= cfg.ntw) {
        ctx.mode = Mode::Think;
        d.output = act_think(net, ctx, cfg.max_trace_len, temperature, think_seed);
        d.prelim_entropy_norm = kNoPrelimEntropy;
        d.thought = true;
        d.tokens_generated = static_cast<int>(d.output.tokens.size());
      } else {
        ctx.mode = Mode::NoThink;
        d.output = act_nothink(net, ctx, temperature, prelim_seed);
        d.prelim_entropy_norm = d.output.entropy_norm;
        d.thought = false;
        d.tokens_generated = 1;
      }
      break;
    }
    case Strategy::Hybrid: {
      ctx.mode = Mode::NoThink;
      PolicyOutput prelim = act_nothink(net, ctx, temperature, prelim_seed);
      d.prelim_entropy_norm = prelim.entropy_norm;
      if (prelim.entropy_norm >= cfg.tau && gs.steps_since_think >= cfg.ntw) {
        ctx.mode = Mode::Think;
        d.output = act_think(net, ctx, cfg.max_trace_len, temperature, think_seed);
        d.thought = true;
        d.tokens_generated = 1 + static_cast<int>(d.output.tokens.size());
      } else {
        d.output = std::move(prelim);
        d.thought = false;
        d.tokens_generated = 1;
      }
      break;
    }
  }
  gs.steps_since_think = d.thought ? 0 : gs.steps_since_think + 1;
  return d;
}

ContextBuilder::ContextBuilder(const GridHouse& house, const FeatureConfig& feats,
                               int window)
    : feats_(feats),
      window_(window),
      instruction_(house.target_category),
      map_(make_map(house.width, house.height, house.target_category)) {}

void ContextBuilder::on_reset(const AgentPose& pose, const Observation& obs) {
  obs_window_.clear();
  action_window_.clear();
  update_map(map_, pose, obs);
  obs_window_.push_back(obs);
}

void ContextBuilder::on_step(NavAction action, const AgentPose& pose,
                             const Observation& obs) {
  update_map(map_, pose, obs);
  obs_window_.push_back(obs);
  if (static_cast<int>(obs_window_.size()) > window_) {
    obs_window_.erase(obs_window_.begin());
  }
  action_window_.push_back(static_cast<int>(action));
  if (static_cast<int>(action_window_.size()) > window_ - 1) {
    action_window_.erase(action_window_.begin());
  }
}

PolicyContext ContextBuilder::context(Mode mode, const AnnotatedMap* override_map) const {
  PolicyContext ctx;
  ctx.instruction = instruction_;
  ctx.obs_window = obs_window_;
  ctx.action_window = action_window_;
  ctx.map_feats = map_features(override_map ? *override_map : map_, feats_);
  ctx.mode = mode;
  return ctx;
}

std::string step_log_json(const StepLog& log) {
  nlohmann::json j;
  j["clock"] = log.clock;
  j["prelim_entropy_norm"] = log.prelim_entropy_norm;
  j["thought"] = log.thought;
  j["tokens"] = log.tokens;
  j["action"] = log.action;
  j["reward"] = log.reward;
  return j.dump();
}

EpisodeRecord run_episode(const PolicyNet& net, const GridHouse& house,
                          const EpisodeOptions& opts, uint64_t episode_seed,
                          const FeatureConfig& feats,
                          std::shared_ptr<const NavOracle> oracle) {
  EpisodeRecord rec;
  rec.task_seed = house.seed;
  rec.strategy = opts.gate.strategy;

  auto [state, obs] = reset(house, opts.env, std::move(oracle));
  rec.shortest = state.oracle->shortest_episode_length();

  ContextBuilder builder(house, feats, net.config().window);
  builder.on_reset(state.pose, obs);
  GateState gs = init_gate_state(opts.gate);

  while (!state.done) {
    const uint64_t step_seed = derive_seed(episode_seed, "step", static_cast<uint64_t>(state.clock));
    PolicyContext ctx;
    if (opts.corruption) {
      const AnnotatedMap noisy =
          corrupt_map(builder.map(), opts.corruption->p_drop,
                      opts.corruption->p_mislabel, derive_seed(step_seed, "corrupt"));
      ctx = builder.context(Mode::NoThink, &noisy);
    } else {
      ctx = builder.context(Mode::NoThink);
    }

    StepDecision decision = decide_and_act(net, ctx, opts.gate, gs,
                                           opts.temperature, step_seed);
    const AgentPose pose_before = state.pose;
    const StepOutcome out = step(state, decision.output.action);

    StepLog log;
    log.clock = out.clock - 1;
    log.pose_before = pose_before;
    log.action = static_cast<int>(decision.output.action);
    log.reward = out.reward;
    log.done = out.done;
    log.success = out.success;
    log.geodesic = out.geodesic_to_target;
    log.prelim_entropy_norm = decision.prelim_entropy_norm;
    log.thought = decision.thought;
    log.tokens = decision.tokens_generated;
    rec.step_logs.push_back(log);

    rec.tokens_generated += decision.tokens_generated;
    if (decision.thought) ++rec.thought_steps;

    if (!state.done) {
      builder.on_step(decision.output.action, state.pose, out.observation);
    }
  }

  rec.success = state.success;
  rec.steps = state.clock;
  if (opts.keep_map) rec.final_map = builder.map();
  return rec;
}

EpisodeRecord run_expert_episode(const GridHouse& house, const EnvOptions& env,
                                 std::shared_ptr<const NavOracle> oracle) {
  EpisodeRecord rec;
  rec.task_seed = house.seed;
  rec.strategy = Strategy::NoThink;

  auto [state, obs] = reset(house, env, std::move(oracle));
  rec.shortest = state.oracle->shortest_episode_length();

  while (!state.done) {
    const NavAction a = expert_action(state);
    const AgentPose pose_before = state.pose;
    const StepOutcome out = step(state, a);
    StepLog log;
    log.clock = out.clock - 1;
    log.pose_before = pose_before;
    log.action = static_cast<int>(a);
    log.reward = out.reward;
    log.done = out.done;
    log.success = out.success;
    log.geodesic = out.geodesic_to_target;
    log.tokens = 1;
    rec.step_logs.push_back(log);
    rec.tokens_generated += 1;
  }
  rec.success = state.success;
  rec.steps = state.clock;
  return rec;
}

TokenAccounting token_accounting(const EpisodeRecord& record) {
  TokenAccounting acc;
  if (record.steps <= 0) return acc;
  acc.tokens_per_episode = static_cast<double>(record.tokens_generated);
  acc.tokens_per_step = acc.tokens_per_episode / record.steps;
  acc.thinking_ratio = static_cast<double>(record.thought_steps) / record.steps;
  return acc;
}

}  // namespace enav
