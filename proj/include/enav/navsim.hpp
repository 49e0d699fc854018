#pragma once

#include <memory>
#include <optional>

#include "enav/grid.hpp"

namespace enav {

struct EnvOptions {
  int view_deep = 7;
  int view_wide = 5;
  int success_radius = 4;
  int max_steps = 300;

  bool operator==(const EnvOptions&) const = default;
};

struct ObsCell {
  enum Kind : uint8_t { Unknown = 0, Wall = 1, Free = 2, Object = 3 };
  Kind kind = Unknown;
  int16_t category = -1;
  bool landmark = false;

  bool operator==(const ObsCell&) const = default;
};

// Egocentric forward cone. Row r covers depth r+1 ahead of the agent, column
// c covers lateral offset c - wide/2 (negative = left). Cells behind the
// first Wall along a column ray are Unknown; objects do not block sight.
struct Observation {
  int deep = 0;
  int wide = 0;
  std::vector<ObsCell> cells;  // row-major, r * wide + c
  int target_category = -1;

  const ObsCell& at(int r, int c) const {
    return cells[static_cast<size_t>(r) * wide + c];
  }
  ObsCell& at(int r, int c) { return cells[static_cast<size_t>(r) * wide + c]; }
  bool contains_category(int category) const;

  bool operator==(const Observation&) const = default;
};

Observation observe(const GridHouse& house, const AgentPose& pose,
                    const EnvOptions& opts);

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  bool success = false;
  int geodesic_to_target = kInfDistance;
  int clock = 0;
};

// Reachability fields for one (house, options) pair: geodesic distance to the
// nearest target instance, success readiness per (cell, heading), and the
// action cost-to-go used by the scripted expert. The planner searches
// {move_ahead, rotate_left, rotate_right}; backward moves never appear on an
// expert plan.
class NavOracle {
 public:
  NavOracle(const GridHouse& house, const EnvOptions& opts);

  const GridHouse& house() const { return *house_; }
  const EnvOptions& options() const { return opts_; }

  int dist_to_target(int x, int y) const {
    return target_dist_[static_cast<size_t>(y) * house_->width + x];
  }
  // True when emitting `end` from this pose would satisfy the success rule.
  bool success_ready(const AgentPose& pose) const;
  // Actions remaining before `end` becomes available (0 when already ready);
  // kInfDistance when no plan exists.
  int cost_to_go(const AgentPose& pose) const;
  NavAction expert_action(const AgentPose& pose) const;
  // Minimal action count including the terminal `end`.
  int shortest_episode_length() const;

 private:
  size_t state_index(const AgentPose& pose) const;

  const GridHouse* house_;
  EnvOptions opts_;
  std::vector<int> target_dist_;
  std::vector<uint8_t> ready_;
  std::vector<int> ctg_;
};

struct EpisodeState {
  const GridHouse* house = nullptr;
  std::shared_ptr<const NavOracle> oracle;
  EnvOptions opts;
  AgentPose pose;
  int clock = 0;
  bool done = false;
  bool success = false;
  int dist_to_target = kInfDistance;
  int best_dist = kInfDistance;  // closest geodesic reached so far
};

std::pair<EpisodeState, Observation> reset(
    const GridHouse& house, const EnvOptions& opts = {},
    std::shared_ptr<const NavOracle> oracle = nullptr);

// Reward decomposes exactly as -0.01 + 10 * success + max(0, delta d), where
// delta d is the step's progress on the closest geodesic distance reached so
// far. Progress pays once: re-approaching after a retreat earns nothing
// until the previous best is beaten.
inline constexpr double kStepPenalty = -0.01;
inline constexpr double kSuccessReward = 10.0;

StepOutcome step(EpisodeState& state, NavAction action);

NavAction expert_action(const EpisodeState& state);
int shortest_episode_length(const GridHouse& house, const EnvOptions& opts = {});

// Line-delimited JSON step trace record.
std::string step_trace_json(int clock, const AgentPose& pose_before,
                            NavAction action, const StepOutcome& out);

}  // namespace enav
