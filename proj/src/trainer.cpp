#include "enav/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "enav/rng.hpp"
#include "json.hpp"

namespace enav {

uint64_t train_house_seed(const TaskSetup& setup, uint64_t index) {
  return derive_seed(setup.master_seed, "train_house", index);
}

uint64_t eval_house_seed(const TaskSetup& setup, uint64_t index) {
  return derive_seed(setup.master_seed, "eval_house", index);
}

PolicyConfig make_policy_config(const TaskSetup& setup, int state_width,
                                int token_embed, int obs_embed, int cell_embed) {
  PolicyConfig cfg;
  cfg.state_width = state_width;
  cfg.token_embed_dim = token_embed;
  cfg.obs_embed_dim = obs_embed;
  cfg.cell_embed_dim = cell_embed;
  cfg.window = setup.window;
  cfg.max_trace_len = setup.gate.max_trace_len;
  cfg.categories = setup.gen.categories;
  cfg.view_deep = setup.env_train.view_deep;
  cfg.view_wide = setup.env_train.view_wide;
  cfg.map_feature_len = setup.feats.feature_length();
  return cfg;
}

namespace {

// Dominant-axis direction of (dx, dy) in the agent frame; ties go to the
// forward/backward axis.
int coarse_dir_token(Heading heading, int dx, int dy) {
  int fx, fy, rx, ry;
  heading_delta(heading, fx, fy);
  right_delta(heading, rx, ry);
  const int f = dx * fx + dy * fy;
  const int r = dx * rx + dy * ry;
  if (f == 0 && r == 0) return tok::kDirAhead;
  if (f >= std::abs(r)) return tok::kDirAhead;
  if (-f >= std::abs(r)) return tok::kDirBehind;
  return r > 0 ? tok::kDirRight : tok::kDirLeft;
}

int nearest_target_dir(const GridHouse& house, const AgentPose& pose) {
  int best_dx = 0, best_dy = 0;
  std::tuple<long, int, int> best{-1, 0, 0};
  for (const auto& [tx, ty] : house.target_cells()) {
    const int dx = tx - pose.x, dy = ty - pose.y;
    const long d2 = static_cast<long>(dx) * dx + static_cast<long>(dy) * dy;
    const std::tuple<long, int, int> key{d2, ty, tx};
    if (std::get<0>(best) < 0 || key < best) {
      best = key;
      best_dx = dx;
      best_dy = dy;
    }
  }
  return coarse_dir_token(pose.heading, best_dx, best_dy);
}

// Where the greedy expert plan goes, relative to the current heading: the
// direction of the first move, or of the pure rotation when readiness
// arrives before any move. Ties in the greedy tie-break guarantee the
// returned token always implies the expert's first action.
int plan_dir_token(const NavOracle& oracle, const AgentPose& pose) {
  AgentPose p = pose;
  int lefts = 0, rights = 0;
  for (int guard = 0; guard < 5; ++guard) {
    if (oracle.success_ready(p)) break;
    const NavAction a = oracle.expert_action(p);
    if (a == NavAction::MoveAhead) {
      int fx, fy;
      heading_delta(p.heading, fx, fy);
      return coarse_dir_token(pose.heading, p.x + fx - pose.x, p.y + fy - pose.y);
    }
    if (a == NavAction::RotateLeft) {
      ++lefts;
      p.heading = turn_left(p.heading);
    } else {
      ++rights;
      p.heading = turn_right(p.heading);
    }
  }
  if (lefts + rights >= 2) return tok::kDirBehind;
  if (lefts == 1) return tok::kDirLeft;
  if (rights == 1) return tok::kDirRight;
  return nearest_target_dir(oracle.house(), pose);  // ready at the start
}

int frontier_token(const AnnotatedMap& map, const AgentPose& pose) {
  int best_x = 0, best_y = 0;
  long best_d2 = -1;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const size_t idx = static_cast<size_t>(y) * map.width + x;
      if (!map.explored[idx] || map.occupancy[idx] != Occ::Free) continue;
      bool frontier = false;
      static const int dxs[4] = {1, -1, 0, 0};
      static const int dys[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4 && !frontier; ++k) {
        const int nx = x + dxs[k], ny = y + dys[k];
        if (nx < 0 || nx >= map.width || ny < 0 || ny >= map.height) continue;
        if (!map.explored[static_cast<size_t>(ny) * map.width + nx]) frontier = true;
      }
      if (!frontier) continue;
      const int dx = x - pose.x, dy = y - pose.y;
      const long d2 = static_cast<long>(dx) * dx + static_cast<long>(dy) * dy;
      if (best_d2 < 0 || d2 < best_d2) {
        best_d2 = d2;
        best_x = dx;
        best_y = dy;
      }
    }
  }
  if (best_d2 < 0) return tok::kFrontierNone;
  int fx, fy, rx, ry;
  heading_delta(pose.heading, fx, fy);
  right_delta(pose.heading, rx, ry);
  const int f = best_x * fx + best_y * fy;
  const int r = best_x * rx + best_y * ry;
  if (f >= std::abs(r)) return tok::kFrontierAhead;
  return r >= 0 ? tok::kFrontierRight : tok::kFrontierLeft;
}

}  // namespace

HybridDataset collect_expert_dataset(const TaskSetup& setup, int n_steps,
                                     std::ostream* log) {
  HybridDataset ds;
  ds.meta.house_seed_base = setup.master_seed;
  ds.meta.n_steps = n_steps;

  uint64_t house_index = 0;
  int sample_id = 0;
  while (static_cast<int>(ds.nrd.size()) < n_steps) {
    const uint64_t hseed = train_house_seed(setup, house_index++);
    GridHouse house;
    try {
      house = generate_house(hseed, setup.gen);
    } catch (const HouseGenerationError& e) {
      if (log) *log << "skip house " << hseed << ": " << e.what() << "\n";
      continue;
    }
    auto oracle = std::make_shared<NavOracle>(house, setup.env_train);
    if (oracle->shortest_episode_length() >= kInfDistance) {
      if (log) *log << "skip house " << hseed << ": unsolvable\n";
      continue;
    }

    auto [state, obs] = reset(house, setup.env_train, oracle);
    ContextBuilder builder(house, setup.feats, setup.window);
    builder.on_reset(state.pose, obs);

    int step_idx = 0;
    while (!state.done && static_cast<int>(ds.nrd.size()) < n_steps) {
      const NavAction a = expert_action(state);

      ExpertSample s;
      s.ctx = builder.context(Mode::NoThink);
      s.target_tokens = {static_cast<int>(a)};
      s.house_seed = hseed;
      s.step_idx = step_idx;
      s.sample_id = sample_id++;
      s.priv.target_visible =
          s.ctx.obs_window.back().contains_category(house.target_category);
      s.priv.geodesic = state.dist_to_target;
      s.priv.dir_token = plan_dir_token(*oracle, state.pose);
      s.priv.frontier_token = frontier_token(builder.map(), state.pose);
      s.priv.expert_action = static_cast<int>(a);
      ds.nrd.push_back(std::move(s));

      const StepOutcome out = step(state, a);
      if (!state.done) builder.on_step(a, state.pose, out.observation);
      ++step_idx;
    }
  }
  return ds;
}

std::vector<size_t> entropy_filter(HybridDataset& ds, const PolicyNet& net,
                                   double top_fraction) {
  if (ds.nrd.empty()) throw std::invalid_argument("entropy_filter: empty dataset");
  for (auto& s : ds.nrd) {
    PolicyContext ctx = s.ctx;
    ctx.mode = Mode::NoThink;
    const SeqScore score = forward_logprobs(net, ctx, s.target_tokens);
    std::vector<double> dist(score.dists[0].data(),
                             score.dists[0].data() + tok::kNumActions);
    s.source_entropy = action_entropy(dist).second;
  }
  std::vector<size_t> order(ds.nrd.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (ds.nrd[a].source_entropy != ds.nrd[b].source_entropy) {
      return ds.nrd[a].source_entropy > ds.nrd[b].source_entropy;
    }
    return ds.nrd[a].sample_id < ds.nrd[b].sample_id;
  });
  const size_t k = std::min(
      order.size(),
      static_cast<size_t>(std::llround(top_fraction * static_cast<double>(order.size()))));
  order.resize(k);
  ds.meta.top_fraction = top_fraction;
  return order;
}

std::vector<int> true_trace(const ExpertSample& s) {
  std::vector<int> trace(4);
  if (s.priv.expert_action == tok::kEnd) {
    // The annotator writes the conclusion to match the answer: terminal
    // samples always read visible-at-terminal-range.
    trace[0] = tok::kTgtVisible;
    trace[2] = tok::kDist0;
  } else {
    trace[0] = s.priv.target_visible ? tok::kTgtVisible : tok::kTgtHidden;
    trace[2] = tok::dist_bucket(s.priv.geodesic);
    if (trace[0] == tok::kTgtVisible && trace[2] == tok::kDist0) {
      trace[2] = tok::kDist1;  // cannot imply `end` on a non-terminal sample
    }
  }
  trace[1] = s.priv.dir_token;
  trace[3] = s.priv.frontier_token;
  return trace;
}

int annotate_reasoning(HybridDataset& ds, std::span<const size_t> selected,
                       double annotator_noise, int max_attempts, uint64_t seed) {
  int discarded = 0;
  for (const size_t idx : selected) {
    const ExpertSample& base = ds.nrd[idx];
    const std::vector<int> truth = true_trace(base);
    Rng rng(mix_seed(seed, static_cast<uint64_t>(base.sample_id)));

    bool accepted = false;
    std::vector<int> trace;
    for (int attempt = 0; attempt < max_attempts && !accepted; ++attempt) {
      trace = truth;
      for (auto& t : trace) {
        if (rng.next_bool(annotator_noise)) {
          const auto [first, count] = tok::family_of(t);
          t = first + static_cast<int>(rng.next_below(static_cast<uint32_t>(count)));
        }
      }
      accepted = tok::implied_action(trace) == base.priv.expert_action;
    }
    if (!accepted) {
      ++discarded;
      continue;
    }

    ExpertSample think = base;
    think.ctx.mode = Mode::Think;
    think.target_tokens = trace;
    think.target_tokens.push_back(tok::kEot);
    think.target_tokens.push_back(base.priv.expert_action);
    // Consistency filter: the final answer token must match the trace.
    if (tok::implied_action(trace) != think.target_tokens.back()) {
      ++discarded;
      continue;
    }
    ds.rd.push_back(std::move(think));
  }
  ds.meta.annotator_noise = annotator_noise;
  ds.meta.annotator_attempts = max_attempts;
  ds.meta.discarded = discarded;
  return discarded;
}

void adam_step(std::vector<double>& params, std::span<const double> grad,
               AdamState& st, double lr) {
  ++st.t;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
    const double mh = st.m[i] / bc1;
    const double vh = st.v[i] / bc2;
    params[i] -= lr * mh / (std::sqrt(vh) + st.eps);
  }
}

SftResult hsft_train(PolicyNet& net, const HybridDataset& ds, int epochs,
                     int batch, double lr, uint64_t seed) {
  const size_t n = ds.nrd.size() + ds.rd.size();
  if (n == 0) throw std::invalid_argument("hsft_train: empty dataset");

  auto sample_at = [&](size_t i) -> const ExpertSample& {
    return i < ds.nrd.size() ? ds.nrd[i] : ds.rd[i - ds.nrd.size()];
  };

  AdamState adam(net.param_count());
  std::vector<double> grad(net.param_count(), 0.0);
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;

  SftResult result;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(epoch)));
    for (size_t i = n; i > 1; --i) {
      const size_t j = rng.next_below(static_cast<uint32_t>(i));
      std::swap(order[i - 1], order[j]);
    }

    double epoch_nll = 0.0;
    for (size_t start = 0; start < n; start += static_cast<size_t>(batch)) {
      const size_t stop = std::min(n, start + static_cast<size_t>(batch));
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_nll = 0.0;
      for (size_t i = start; i < stop; ++i) {
        const ExpertSample& s = sample_at(order[i]);
        const SeqTape tape = policy_forward(net, s.ctx, s.target_tokens);
        std::vector<double> d_lp(tape.logprobs.size(), -inv_b);
        policy_backward(net, tape, d_lp, nullptr, 0.0, grad);
        for (double lp : tape.logprobs) batch_nll -= lp;
      }
      if (!std::isfinite(batch_nll)) {
        throw std::runtime_error("hsft_train: non-finite loss at batch starting " +
                                 std::to_string(start));
      }
      epoch_nll += batch_nll;
      adam_step(net.params(), grad, adam, lr);
      net.snap_to_f32();
    }
    result.epoch_losses.push_back(epoch_nll / static_cast<double>(n));
  }
  return result;
}

RolloutBuffer collect_rollouts(const PolicyNet& net, const TaskSetup& setup,
                               int stage, int n_episodes, double temperature,
                               uint64_t house_index_base, uint64_t seed,
                               const PolicyNet* critic) {
  GateConfig gate = setup.gate;
  gate.strategy = stage == 1 ? Strategy::NoThink : Strategy::Hybrid;

  RolloutBuffer buf;
  for (int e = 0; e < n_episodes; ++e) {
    const uint64_t hseed = train_house_seed(setup, house_index_base + static_cast<uint64_t>(e));
    GridHouse house;
    try {
      house = generate_house(hseed, setup.gen);
    } catch (const HouseGenerationError&) {
      continue;
    }
    auto oracle = std::make_shared<NavOracle>(house, setup.env_train);
    auto [state, obs] = reset(house, setup.env_train, oracle);
    ContextBuilder builder(house, setup.feats, net.config().window);
    builder.on_reset(state.pose, obs);
    GateState gs = init_gate_state(gate);
    const uint64_t episode_seed = derive_seed(seed, "episode", static_cast<uint64_t>(e));

    while (!state.done) {
      const uint64_t step_seed =
          derive_seed(episode_seed, "step", static_cast<uint64_t>(state.clock));
      PolicyContext ctx = builder.context(Mode::NoThink);
      StepDecision d = decide_and_act(net, ctx, gate, gs, temperature, step_seed);
      const StepOutcome out = step(state, d.output.action);

      Transition t;
      t.value = critic ? value_forward(*critic, ctx).value : d.output.value;
      t.ctx = std::move(ctx);
      t.tokens = d.output.tokens;
      t.old_logprobs = d.output.logprobs;
      t.reward = out.reward;
      t.done = out.done;
      t.think = d.thought;
      t.episode = buf.episodes;
      buf.transitions.push_back(std::move(t));
      buf.tokens += d.tokens_generated;

      if (!state.done) builder.on_step(d.output.action, state.pose, out.observation);
    }
    ++buf.episodes;
    if (state.success) ++buf.successes;
  }
  return buf;
}

void compute_gae(RolloutBuffer& buffer, double gamma, double lambda,
                 bool normalize) {
  auto& ts = buffer.transitions;
  size_t start = 0;
  while (start < ts.size()) {
    size_t stop = start;
    while (stop < ts.size() && !ts[stop].done) ++stop;
    // stop points at the terminal transition of this episode.
    double gae = 0.0;
    for (size_t i = stop + 1; i-- > start;) {
      const double next_value = i < stop ? ts[i + 1].value : 0.0;
      const double delta = ts[i].reward + gamma * next_value - ts[i].value;
      gae = delta + gamma * lambda * (i < stop ? gae : 0.0);
      ts[i].advantage = gae;
      ts[i].ret = gae + ts[i].value;
    }
    start = stop + 1;
  }

  if (normalize && !ts.empty()) {
    double mean = 0.0;
    for (const auto& t : ts) mean += t.advantage;
    mean /= static_cast<double>(ts.size());
    double var = 0.0;
    for (const auto& t : ts) var += (t.advantage - mean) * (t.advantage - mean);
    var /= static_cast<double>(ts.size());
    const double sd = std::sqrt(var);
    if (sd > 1e-8) {
      for (auto& t : ts) t.advantage = (t.advantage - mean) / sd;
    } else {
      for (auto& t : ts) t.advantage -= mean;
    }
  }
}

MinibatchLoss ppo_minibatch_gradient(const PolicyNet& net, const PolicyNet* ref,
                                     const RolloutBuffer& buffer,
                                     std::span<const size_t> indices,
                                     const PPOConfig& cfg, int stage,
                                     std::vector<double>* grad) {
  if (stage == 2 && cfg.beta > 0.0 && ref == nullptr) {
    throw std::invalid_argument("ppo update: stage 2 with beta > 0 needs a reference net");
  }
  MinibatchLoss out;
  for (const size_t k : indices) {
    const Transition& t = buffer.transitions[k];
    const bool counted = stage == 1 || t.think;
    if (counted) out.policy_tokens += static_cast<long>(t.tokens.size());
    if (stage == 2 && !t.think) out.kl_positions += static_cast<long>(t.tokens.size());
  }
  out.seqs = static_cast<long>(indices.size());
  if (out.seqs == 0) return out;

  for (const size_t k : indices) {
    const Transition& t = buffer.transitions[k];
    const SeqTape tape = policy_forward(net, t.ctx, t.tokens);
    const int n = tape.n_pos;
    std::vector<double> d_lp(static_cast<size_t>(n), 0.0);
    std::vector<Eigen::VectorXd> d_dist;
    const std::vector<Eigen::VectorXd>* d_dist_ptr = nullptr;

    const bool counted = stage == 1 || t.think;
    if (counted && out.policy_tokens > 0) {
      for (int l = 0; l < n; ++l) {
        const double ratio = std::exp(tape.logprobs[static_cast<size_t>(l)] -
                                      t.old_logprobs[static_cast<size_t>(l)]);
        const double adv = t.advantage;
        const double unclipped = ratio * adv;
        const double clipped =
            std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
        const double term = std::min(unclipped, clipped);
        out.policy -= term / static_cast<double>(out.policy_tokens);
        // Gradient flows only through the unclipped branch when selected.
        if (unclipped <= clipped) {
          d_lp[static_cast<size_t>(l)] += unclipped / static_cast<double>(out.policy_tokens);
        }
      }
    }

    if (stage == 2 && !t.think && cfg.beta > 0.0 && out.kl_positions > 0) {
      const SeqScore ref_score = forward_logprobs(*ref, t.ctx, t.tokens);
      d_dist.resize(static_cast<size_t>(n));
      for (int l = 0; l < n; ++l) {
        const auto p = tape.probs.col(l);
        const Eigen::VectorXd& q = ref_score.dists[static_cast<size_t>(l)];
        Eigen::VectorXd dd = Eigen::VectorXd::Zero(tok::kVocabSize);
        double kl = 0.0;
        for (int j = 0; j < tok::kVocabSize; ++j) {
          if (p[j] <= 0.0 || q[j] <= 0.0) continue;
          const double lp = std::log(p[j]), lq = std::log(q[j]);
          kl += p[j] * (lp - lq);
          dd[j] = cfg.beta / static_cast<double>(out.kl_positions) * (lp - lq + 1.0);
        }
        out.kl += kl / static_cast<double>(out.kl_positions);
        d_dist[static_cast<size_t>(l)] = std::move(dd);
      }
      d_dist_ptr = &d_dist;
    }

    const double verr = tape.value - t.ret;
    out.value += 0.5 * verr * verr / static_cast<double>(out.seqs);
    const double d_value = cfg.value_coef * verr / static_cast<double>(out.seqs);

    if (!std::isfinite(out.policy) || !std::isfinite(out.value) || !std::isfinite(out.kl)) {
      out.finite = false;
      return out;
    }
    if (grad) {
      // d_lp carries the maximize-direction derivative; the loss negates it.
      for (auto& v : d_lp) v = -v;
      policy_backward(net, tape, d_lp, d_dist_ptr, d_value, *grad);
    }
  }
  if (grad) {
    for (const double g : *grad) {
      if (!std::isfinite(g)) {
        out.finite = false;
        break;
      }
    }
  }
  return out;
}

UpdateStats ppo_update(PolicyNet& net, const PolicyNet* ref,
                       const RolloutBuffer& buffer, const PPOConfig& cfg,
                       int stage, AdamState& adam, uint64_t seed,
                       PolicyNet* critic, AdamState* critic_adam) {
  const auto& ts = buffer.transitions;
  UpdateStats stats;
  if (ts.empty()) return stats;
  if (critic && !critic_adam) {
    throw std::invalid_argument("ppo_update: critic needs its own optimizer state");
  }

  std::vector<size_t> order(ts.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  PPOConfig actor_cfg = cfg;
  if (critic) actor_cfg.value_coef = 0.0;  // no value gradient into the actor

  std::vector<double> grad(net.param_count(), 0.0);
  std::vector<double> critic_grad(critic ? critic->param_count() : 0, 0.0);
  double policy_loss_sum = 0.0, value_loss_sum = 0.0, kl_sum = 0.0;
  long policy_tok_total = 0, kl_pos_total = 0, seq_total = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = rng.next_below(static_cast<uint32_t>(i));
      std::swap(order[i - 1], order[j]);
    }

    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.minibatch)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.minibatch));
      std::fill(grad.begin(), grad.end(), 0.0);
      const std::span<const size_t> indices(order.data() + start, stop - start);
      const MinibatchLoss loss =
          ppo_minibatch_gradient(net, ref, buffer, indices, actor_cfg, stage, &grad);
      if (!loss.finite) {
        ++stats.skipped_minibatches;
        continue;
      }

      double mb_value = 0.0;
      if (critic) {
        std::fill(critic_grad.begin(), critic_grad.end(), 0.0);
        const double n_seq = static_cast<double>(indices.size());
        bool critic_bad = false;
        for (const size_t k : indices) {
          const Transition& t = ts[k];
          const SeqTape tape = value_forward(*critic, t.ctx);
          const double verr = tape.value - t.ret;
          mb_value += 0.5 * verr * verr / n_seq;
          policy_backward(*critic, tape, {}, nullptr, cfg.value_coef * verr / n_seq,
                          critic_grad);
        }
        for (const double g : critic_grad) {
          if (!std::isfinite(g)) {
            critic_bad = true;
            break;
          }
        }
        if (critic_bad || !std::isfinite(mb_value)) {
          ++stats.skipped_minibatches;
          continue;
        }
      } else {
        mb_value = loss.value;
      }

      adam_step(net.params(), grad, adam, cfg.lr);
      net.snap_to_f32();
      if (critic) {
        adam_step(critic->params(), critic_grad, *critic_adam, cfg.critic_lr);
        critic->snap_to_f32();
      }

      policy_loss_sum += loss.policy * static_cast<double>(loss.policy_tokens);
      value_loss_sum += mb_value * static_cast<double>(loss.seqs);
      kl_sum += loss.kl * static_cast<double>(loss.kl_positions);
      policy_tok_total += loss.policy_tokens;
      kl_pos_total += loss.kl_positions;
      seq_total += loss.seqs;
    }
  }

  stats.policy_loss = policy_tok_total > 0 ? policy_loss_sum / policy_tok_total : 0.0;
  stats.value_loss = seq_total > 0 ? value_loss_sum / seq_total : 0.0;
  stats.mean_kl = kl_pos_total > 0 ? kl_sum / kl_pos_total : 0.0;
  return stats;
}

std::string update_record_json(const UpdateRecord& r) {
  nlohmann::json j;
  j["stage"] = r.stage;
  j["update_idx"] = r.update_idx;
  j["rollout_sr"] = r.rollout_sr;
  j["mean_reward"] = r.mean_reward;
  j["policy_loss"] = r.policy_loss;
  j["value_loss"] = r.value_loss;
  j["mean_kl"] = r.mean_kl;
  j["tokens_per_step"] = r.tokens_per_step;
  return j.dump();
}

StageResult train_stage(PolicyNet net, const PolicyNet* ref, int stage,
                        const PPOConfig& cfg, const TaskSetup& setup,
                        const std::string& checkpoint_dir,
                        uint64_t house_index_base, std::ostream* log,
                        const PolicyNet* critic_init) {
  const std::string stage_tag = stage == 1 ? "stageI" : "stageII";
  PolicyNet critic = critic_init ? *critic_init : net;
  StageResult result{net, critic, 0, -1.0, {}};

  PPOConfig stage_cfg = cfg;
  if (stage == 1) stage_cfg.beta = 0.0;

  AdamState adam(net.param_count());
  AdamState critic_adam(critic.param_count());
  for (int u = 1; u <= cfg.updates; ++u) {
    const uint64_t rollout_seed =
        derive_seed(setup.master_seed, stage_tag + "_rollout", static_cast<uint64_t>(u));
    RolloutBuffer buf = collect_rollouts(
        net, setup, stage, cfg.rollout_episodes, cfg.rollout_temperature,
        house_index_base + static_cast<uint64_t>(u - 1) * cfg.rollout_episodes,
        rollout_seed, &critic);
    const double sr = buf.success_rate();

    if (!checkpoint_dir.empty()) {
      save_checkpoint(net, checkpoint_dir + "/" + stage_tag + "_update" +
                               std::to_string(u) + ".ckpt");
    }
    if (sr > result.best_sr) {
      result.best_sr = sr;
      result.best_update = u;
      result.best_net = net;
    }

    double reward_sum = 0.0;
    for (const auto& t : buf.transitions) reward_sum += t.reward;

    compute_gae(buf, cfg.gamma, cfg.lambda, cfg.adv_norm);
    const UpdateStats stats = ppo_update(
        net, ref, buf, stage_cfg, stage, adam,
        derive_seed(setup.master_seed, stage_tag + "_update", static_cast<uint64_t>(u)),
        &critic, &critic_adam);

    UpdateRecord rec;
    rec.stage = stage;
    rec.update_idx = u;
    rec.rollout_sr = sr;
    rec.mean_reward = buf.transitions.empty()
                          ? 0.0
                          : reward_sum / static_cast<double>(buf.transitions.size());
    rec.policy_loss = stats.policy_loss;
    rec.value_loss = stats.value_loss;
    rec.mean_kl = stats.mean_kl;
    rec.tokens_per_step =
        buf.transitions.empty()
            ? 0.0
            : static_cast<double>(buf.tokens) / static_cast<double>(buf.transitions.size());
    result.records.push_back(rec);
    if (log) *log << update_record_json(rec) << "\n";
  }

  if (!checkpoint_dir.empty()) {
    save_checkpoint(result.best_net, checkpoint_dir + "/" + stage_tag + "_best.ckpt");
  }
  result.final_critic = std::move(critic);
  return result;
}

TwoStageResult train_two_stage(const PolicyNet& init_net, const PPOConfig& cfg,
                               const TaskSetup& setup,
                               const std::string& checkpoint_dir,
                               std::ostream* log) {
  StageResult s1 = train_stage(init_net, nullptr, 1, cfg, setup, checkpoint_dir,
                               1u << 20, log);
  StageResult s2 = train_stage(s1.best_net, &s1.best_net, 2, cfg, setup,
                               checkpoint_dir, 2u << 20, log, &s1.final_critic);
  TwoStageResult out{std::move(s1.best_net), std::move(s2.best_net), {}};
  out.records = std::move(s1.records);
  out.records.insert(out.records.end(), s2.records.begin(), s2.records.end());
  return out;
}

namespace {

nlohmann::json obs_to_json(const Observation& obs) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : obs.cells) {
    cells.push_back({static_cast<int>(c.kind), c.category, c.landmark ? 1 : 0});
  }
  return {{"deep", obs.deep}, {"wide", obs.wide}, {"tc", obs.target_category},
          {"cells", cells}};
}

Observation obs_from_json(const nlohmann::json& j) {
  Observation obs;
  obs.deep = j.at("deep").get<int>();
  obs.wide = j.at("wide").get<int>();
  obs.target_category = j.at("tc").get<int>();
  for (const auto& c : j.at("cells")) {
    ObsCell cell;
    cell.kind = static_cast<ObsCell::Kind>(c[0].get<int>());
    cell.category = static_cast<int16_t>(c[1].get<int>());
    cell.landmark = c[2].get<int>() != 0;
    obs.cells.push_back(cell);
  }
  return obs;
}

}  // namespace

std::string sample_to_json(const ExpertSample& s) {
  nlohmann::json j;
  j["id"] = s.sample_id;
  j["house_seed"] = s.house_seed;
  j["step"] = s.step_idx;
  j["mode"] = static_cast<int>(s.ctx.mode);
  j["instruction"] = s.ctx.instruction;
  j["targets"] = s.target_tokens;
  j["entropy"] = s.source_entropy;
  j["actions"] = s.ctx.action_window;
  j["map_feats"] = s.ctx.map_feats;
  auto obs = nlohmann::json::array();
  for (const auto& o : s.ctx.obs_window) obs.push_back(obs_to_json(o));
  j["obs"] = obs;
  j["priv"] = {{"visible", s.priv.target_visible},
               {"geodesic", s.priv.geodesic},
               {"dir", s.priv.dir_token},
               {"frontier", s.priv.frontier_token},
               {"action", s.priv.expert_action}};
  return j.dump();
}

ExpertSample sample_from_json(const std::string& line, const PolicyConfig&) {
  const auto j = nlohmann::json::parse(line);
  ExpertSample s;
  s.sample_id = j.at("id").get<int>();
  s.house_seed = j.at("house_seed").get<uint64_t>();
  s.step_idx = j.at("step").get<int>();
  s.ctx.mode = static_cast<Mode>(j.at("mode").get<int>());
  s.ctx.instruction = j.at("instruction").get<int>();
  s.target_tokens = j.at("targets").get<std::vector<int>>();
  s.source_entropy = j.at("entropy").get<double>();
  s.ctx.action_window = j.at("actions").get<std::vector<int>>();
  s.ctx.map_feats = j.at("map_feats").get<std::vector<double>>();
  for (const auto& o : j.at("obs")) s.ctx.obs_window.push_back(obs_from_json(o));
  const auto& p = j.at("priv");
  s.priv.target_visible = p.at("visible").get<bool>();
  s.priv.geodesic = p.at("geodesic").get<int>();
  s.priv.dir_token = p.at("dir").get<int>();
  s.priv.frontier_token = p.at("frontier").get<int>();
  s.priv.expert_action = p.at("action").get<int>();
  return s;
}

void save_dataset(const HybridDataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  uint64_t content_hash = 0xCBF29CE484222325ULL;
  auto write_split = [&](const std::vector<ExpertSample>& split,
                         const std::string& name) {
    std::ofstream f(dir + "/" + name);
    if (!f) throw std::runtime_error("save_dataset: cannot open " + dir + "/" + name);
    for (const auto& s : split) {
      const std::string line = sample_to_json(s);
      content_hash = mix_seed(content_hash, fnv1a(line));
      f << line << "\n";
    }
  };
  write_split(ds.nrd, "nrd.jsonl");
  write_split(ds.rd, "rd.jsonl");

  nlohmann::json m;
  m["house_seed_base"] = ds.meta.house_seed_base;
  m["n_steps"] = ds.meta.n_steps;
  m["top_fraction"] = ds.meta.top_fraction;
  m["annotator_noise"] = ds.meta.annotator_noise;
  m["annotator_attempts"] = ds.meta.annotator_attempts;
  m["discarded"] = ds.meta.discarded;
  m["nrd_count"] = ds.nrd.size();
  m["rd_count"] = ds.rd.size();
  m["content_hash"] = content_hash;
  std::ofstream mf(dir + "/manifest.json");
  mf << m.dump(2) << "\n";
}

HybridDataset load_dataset(const std::string& dir, const PolicyConfig& cfg) {
  HybridDataset ds;
  auto read_split = [&](std::vector<ExpertSample>& split, const std::string& name) {
    std::ifstream f(dir + "/" + name);
    if (!f) throw std::runtime_error("load_dataset: cannot open " + dir + "/" + name);
    std::string line;
    while (std::getline(f, line)) {
      if (!line.empty()) split.push_back(sample_from_json(line, cfg));
    }
  };
  read_split(ds.nrd, "nrd.jsonl");
  read_split(ds.rd, "rd.jsonl");
  std::ifstream mf(dir + "/manifest.json");
  if (mf) {
    nlohmann::json m;
    mf >> m;
    ds.meta.house_seed_base = m.value("house_seed_base", 0ULL);
    ds.meta.n_steps = m.value("n_steps", 0);
    ds.meta.top_fraction = m.value("top_fraction", 0.0);
    ds.meta.annotator_noise = m.value("annotator_noise", 0.0);
    ds.meta.annotator_attempts = m.value("annotator_attempts", 0);
    ds.meta.discarded = m.value("discarded", 0);
  }
  return ds;
}

}  // namespace enav
