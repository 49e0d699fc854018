#include "enav/navsim.hpp"

#include <algorithm>
#include <deque>

#include "json.hpp"

namespace enav {

bool Observation::contains_category(int category) const {
  for (const auto& c : cells) {
    if (c.kind == ObsCell::Object && c.category == category) return true;
  }
  return false;
}

Observation observe(const GridHouse& house, const AgentPose& pose,
                    const EnvOptions& opts) {
  Observation obs;
  obs.deep = opts.view_deep;
  obs.wide = opts.view_wide;
  obs.cells.assign(static_cast<size_t>(opts.view_deep) * opts.view_wide, ObsCell{});
  obs.target_category = house.target_category;

  int fx, fy, rx, ry;
  heading_delta(pose.heading, fx, fy);
  right_delta(pose.heading, rx, ry);

  const int half = opts.view_wide / 2;
  for (int c = 0; c < opts.view_wide; ++c) {
    const int lat = c - half;
    bool blocked = false;
    for (int r = 0; r < opts.view_deep; ++r) {
      if (blocked) break;
      const int depth = r + 1;
      const int x = pose.x + depth * fx + lat * rx;
      const int y = pose.y + depth * fy + lat * ry;
      ObsCell& cell = obs.at(r, c);
      if (!house.in_bounds(x, y)) {
        // Rays never re-enter the grid; cells beyond it stay Unknown.
        blocked = true;
        continue;
      }
      if (house.cell(x, y) == CellKind::Wall) {
        cell.kind = ObsCell::Wall;
        blocked = true;
        continue;
      }
      cell.kind = ObsCell::Free;
      for (const auto& o : house.objects) {
        if (o.x == x && o.y == y) {
          cell.kind = ObsCell::Object;
          cell.category = static_cast<int16_t>(o.category);
          cell.landmark = o.landmark;
          break;
        }
      }
    }
  }
  return obs;
}

NavOracle::NavOracle(const GridHouse& house, const EnvOptions& opts)
    : house_(&house), opts_(opts) {
  const auto targets = house.target_cells();
  target_dist_ = distance_field(house, targets);

  const size_t n_states = house.cells.size() * 4;
  ready_.assign(n_states, 0);
  for (int y = 0; y < house.height; ++y) {
    for (int x = 0; x < house.width; ++x) {
      if (!house.is_free(x, y)) continue;
      if (dist_to_target(x, y) > opts.success_radius) continue;
      for (int h = 0; h < 4; ++h) {
        AgentPose p{x, y, static_cast<Heading>(h)};
        const Observation obs = observe(house, p, opts);
        if (obs.contains_category(house.target_category)) {
          ready_[state_index(p)] = 1;
        }
      }
    }
  }

  // Backward BFS over {move_ahead, rotate_left, rotate_right} from all
  // success-ready states.
  ctg_.assign(n_states, kInfDistance);
  std::deque<size_t> q;
  for (size_t s = 0; s < n_states; ++s) {
    if (ready_[s]) {
      ctg_[s] = 0;
      q.push_back(s);
    }
  }
  while (!q.empty()) {
    const size_t s = q.front();
    q.pop_front();
    const int d = ctg_[s];
    const int h = static_cast<int>(s % 4);
    const int cell = static_cast<int>(s / 4);
    const int x = cell % house.width;
    const int y = cell / house.width;
    const Heading heading = static_cast<Heading>(h);

    auto relax = [&](const AgentPose& pred) {
      if (!house.is_free(pred.x, pred.y)) return;
      const size_t ps = state_index(pred);
      if (ctg_[ps] > d + 1) {
        ctg_[ps] = d + 1;
        q.push_back(ps);
      }
    };
    // Predecessor via move_ahead: one cell behind, same heading.
    int fx, fy;
    heading_delta(heading, fx, fy);
    relax({x - fx, y - fy, heading});
    // Predecessor via rotate_left held heading+right; via rotate_right, +left.
    relax({x, y, turn_right(heading)});
    relax({x, y, turn_left(heading)});
  }
}

size_t NavOracle::state_index(const AgentPose& pose) const {
  return (static_cast<size_t>(pose.y) * house_->width + pose.x) * 4 +
         static_cast<size_t>(pose.heading);
}

bool NavOracle::success_ready(const AgentPose& pose) const {
  return ready_[state_index(pose)] != 0;
}

int NavOracle::cost_to_go(const AgentPose& pose) const {
  return ctg_[state_index(pose)];
}

NavAction NavOracle::expert_action(const AgentPose& pose) const {
  if (success_ready(pose)) return NavAction::End;
  const int here = cost_to_go(pose);
  if (here >= kInfDistance) {
    throw std::runtime_error("expert_action: target unreachable");
  }
  // Greedy descent on cost-to-go; preference order breaks ties.
  int fx, fy;
  heading_delta(pose.heading, fx, fy);
  struct Cand {
    NavAction action;
    AgentPose next;
  };
  const Cand cands[3] = {
      {NavAction::MoveAhead, {pose.x + fx, pose.y + fy, pose.heading}},
      {NavAction::RotateLeft, {pose.x, pose.y, turn_left(pose.heading)}},
      {NavAction::RotateRight, {pose.x, pose.y, turn_right(pose.heading)}},
  };
  NavAction best = NavAction::RotateLeft;
  int best_cost = kInfDistance;
  for (const auto& c : cands) {
    if (c.action == NavAction::MoveAhead && !house_->is_free(c.next.x, c.next.y)) {
      continue;
    }
    const int cost = cost_to_go(c.next);
    if (cost < best_cost) {
      best_cost = cost;
      best = c.action;
    }
  }
  return best;
}

int NavOracle::shortest_episode_length() const {
  const int c = cost_to_go(house_->start_pose);
  if (c >= kInfDistance) return kInfDistance;
  return c + 1;  // terminal `end`
}

std::pair<EpisodeState, Observation> reset(const GridHouse& house,
                                           const EnvOptions& opts,
                                           std::shared_ptr<const NavOracle> oracle) {
  EpisodeState st;
  st.house = &house;
  st.oracle = oracle ? std::move(oracle) : std::make_shared<NavOracle>(house, opts);
  st.opts = opts;
  st.pose = house.start_pose;
  st.clock = 0;
  st.done = false;
  st.success = false;
  st.dist_to_target = st.oracle->dist_to_target(st.pose.x, st.pose.y);
  st.best_dist = st.dist_to_target;
  return {st, observe(house, st.pose, opts)};
}

StepOutcome step(EpisodeState& state, NavAction action) {
  if (state.done) throw std::logic_error("step: episode already done");

  const int best_prev = state.best_dist;
  bool success_now = false;

  switch (action) {
    case NavAction::MoveAhead:
    case NavAction::MoveBack: {
      int fx, fy;
      heading_delta(state.pose.heading, fx, fy);
      const int sign = action == NavAction::MoveAhead ? 1 : -1;
      const int nx = state.pose.x + sign * fx;
      const int ny = state.pose.y + sign * fy;
      if (state.house->is_free(nx, ny)) {
        state.pose.x = nx;
        state.pose.y = ny;
      }
      break;
    }
    case NavAction::RotateLeft:
      state.pose.heading = turn_left(state.pose.heading);
      break;
    case NavAction::RotateRight:
      state.pose.heading = turn_right(state.pose.heading);
      break;
    case NavAction::End:
      success_now = state.oracle->success_ready(state.pose);
      state.done = true;
      state.success = success_now;
      break;
  }

  ++state.clock;
  if (!state.done && state.clock >= state.opts.max_steps) state.done = true;

  const int d_now = state.oracle->dist_to_target(state.pose.x, state.pose.y);
  state.dist_to_target = d_now;
  state.best_dist = std::min(state.best_dist, d_now);

  StepOutcome out;
  out.reward = kStepPenalty + (success_now ? kSuccessReward : 0.0) +
               std::max(0, best_prev - d_now);
  out.done = state.done;
  out.success = state.success;
  out.geodesic_to_target = d_now;
  out.clock = state.clock;
  out.observation = observe(*state.house, state.pose, state.opts);
  return out;
}

NavAction expert_action(const EpisodeState& state) {
  if (state.done) throw std::logic_error("expert_action: episode already done");
  return state.oracle->expert_action(state.pose);
}

int shortest_episode_length(const GridHouse& house, const EnvOptions& opts) {
  return NavOracle(house, opts).shortest_episode_length();
}

std::string step_trace_json(int clock, const AgentPose& pose_before,
                            NavAction action, const StepOutcome& out) {
  nlohmann::json j;
  j["clock"] = clock;
  j["pose"] = {{"x", pose_before.x},
               {"y", pose_before.y},
               {"heading", static_cast<int>(pose_before.heading)}};
  j["action"] = static_cast<int>(action);
  j["reward"] = out.reward;
  j["done"] = out.done;
  j["success"] = out.success;
  j["geodesic"] = out.geodesic_to_target;
  return j.dump();
}

}  // namespace enav
