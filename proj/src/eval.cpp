#include "enav/eval.hpp"

#include <algorithm>
#include <cmath>

#include "enav/rng.hpp"
#include "json.hpp"

namespace enav {

double success_rate(std::span<const EpisodeRecord> records) {
  if (records.empty()) throw std::invalid_argument("success_rate: no records");
  double s = 0.0;
  for (const auto& r : records) s += r.success ? 1.0 : 0.0;
  return s / static_cast<double>(records.size());
}

double sel(std::span<const EpisodeRecord> records) {
  if (records.empty()) throw std::invalid_argument("sel: no records");
  double acc = 0.0;
  for (const auto& r : records) {
    if (!r.success) continue;
    acc += static_cast<double>(r.shortest) /
           static_cast<double>(std::max(r.shortest, r.steps));
  }
  return acc / static_cast<double>(records.size());
}

double discounted_return(std::span<const double> rewards, double gamma) {
  double q = 0.0;
  double g = 1.0;
  for (const double r : rewards) {
    q += g * r;
    g *= gamma;
  }
  return q;
}

std::vector<EpisodeRecord> evaluate(const PolicyNet& net, const TaskSetup& setup,
                                    const EvalOptions& opts) {
  std::vector<EpisodeRecord> records;
  records.reserve(static_cast<size_t>(opts.tasks));
  for (int i = 0; i < opts.tasks; ++i) {
    const uint64_t hseed = eval_house_seed(setup, static_cast<uint64_t>(i));
    GridHouse house;
    try {
      house = generate_house(hseed, setup.gen);
    } catch (const HouseGenerationError&) {
      continue;
    }
    EpisodeOptions ep;
    ep.env = setup.env_eval;
    ep.gate = opts.gate;
    ep.temperature = opts.temperature;
    ep.corruption = opts.corruption;
    const uint64_t episode_seed =
        derive_seed(mix_seed(setup.master_seed, opts.sample_tag), "eval_episode",
                    static_cast<uint64_t>(i));
    records.push_back(run_episode(net, house, ep, episode_seed, setup.feats));
  }
  return records;
}

SweepResult q_threshold_sweep(const PolicyNet& net, const TaskSetup& setup,
                              std::span<const double> thresholds,
                              int episodes_per_threshold, double gamma,
                              int ntw, double temperature) {
  SweepResult result;
  for (const double tau : thresholds) {
    EvalOptions opts;
    opts.gate = setup.gate;
    opts.gate.strategy = Strategy::Hybrid;
    opts.gate.tau = tau;
    opts.gate.ntw = ntw;
    opts.temperature = temperature;
    opts.tasks = episodes_per_threshold;
    const auto records = evaluate(net, setup, opts);

    double q_sum = 0.0, tps_sum = 0.0;
    for (const auto& r : records) {
      std::vector<double> rewards;
      rewards.reserve(r.step_logs.size());
      for (const auto& s : r.step_logs) rewards.push_back(s.reward);
      q_sum += discounted_return(rewards, gamma);
      tps_sum += token_accounting(r).tokens_per_step;
    }
    result.thresholds.push_back(tau);
    const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
    result.mean_q.push_back(q_sum / n);
    result.mean_tokens_per_step.push_back(tps_sum / n);
    result.episode_counts.push_back(static_cast<int>(records.size()));
  }
  return result;
}

double EntropyHistogram::fraction_at_least(double tau) const {
  if (total == 0) return 0.0;
  // Recoverable from bins only at bin boundaries; callers use tau = k/20.
  const int first_bin = static_cast<int>(std::ceil(tau * 20.0 - 1e-9));
  long count = 0;
  for (int b = std::max(0, first_bin); b < 20; ++b) count += bins[static_cast<size_t>(b)];
  return static_cast<double>(count) / static_cast<double>(total);
}

EntropyHistogram entropy_histogram(std::span<const double> entropies) {
  EntropyHistogram h;
  for (const double e : entropies) {
    const int bin = std::clamp(static_cast<int>(e * 20.0), 0, 19);
    ++h.bins[static_cast<size_t>(bin)];
    ++h.total;
  }
  return h;
}

std::vector<double> collect_nothink_entropies(const PolicyNet& net,
                                              const TaskSetup& setup, int tasks,
                                              double temperature) {
  EvalOptions opts;
  opts.gate = setup.gate;
  opts.gate.strategy = Strategy::NoThink;
  opts.temperature = temperature;
  opts.tasks = tasks;
  const auto records = evaluate(net, setup, opts);
  std::vector<double> out;
  for (const auto& r : records) {
    for (const auto& s : r.step_logs) {
      if (s.prelim_entropy_norm >= 0.0) out.push_back(s.prelim_entropy_norm);
    }
  }
  return out;
}

Image entropy_heatmap(const EpisodeRecord& record, const AnnotatedMap& map) {
  if (map.trajectory.empty()) {
    throw std::invalid_argument("entropy_heatmap: empty trajectory");
  }
  // First decision per waypoint; collision steps repeat the pose and keep
  // the first entropy.
  std::vector<double> overlay;
  overlay.reserve(map.trajectory.size());
  size_t w = 0;
  for (const auto& s : record.step_logs) {
    if (w >= map.trajectory.size()) break;
    if (s.pose_before == map.trajectory[w]) {
      overlay.push_back(std::max(0.0, s.prelim_entropy_norm));
      ++w;
    } else if (w > 0 && s.pose_before == map.trajectory[w - 1]) {
      continue;  // collision: same waypoint again
    } else {
      throw std::invalid_argument("entropy_heatmap: steps do not align with trajectory");
    }
  }
  if (overlay.size() != map.trajectory.size() - 1) {
    // The final pose carries no decision; anything else is a mismatch.
    if (overlay.size() == map.trajectory.size()) {
      overlay.pop_back();
    } else {
      throw std::invalid_argument("entropy_heatmap: overlay length mismatch");
    }
  }
  return render_map(map, &overlay);
}

std::array<StratumRow, 3> difficulty_stratify(std::span<const EpisodeRecord> records,
                                              int b1, int b2) {
  std::array<StratumRow, 3> rows{};
  std::array<double, 3> tr_sum{};
  for (const auto& r : records) {
    int bucket;
    if (r.shortest < b1) bucket = 0;
    else if (r.shortest <= b2) bucket = 1;
    else bucket = 2;
    auto& row = rows[static_cast<size_t>(bucket)];
    ++row.count;
    row.sr += r.success ? 1.0 : 0.0;
    tr_sum[static_cast<size_t>(bucket)] += token_accounting(r).thinking_ratio;
  }
  for (int b = 0; b < 3; ++b) {
    auto& row = rows[static_cast<size_t>(b)];
    if (row.count > 0) {
      row.sr /= row.count;
      row.mean_tr = tr_sum[static_cast<size_t>(b)] / row.count;
    }
  }
  return rows;
}

std::vector<double> pass_at_k(std::span<const std::pair<int, int>> task_counts,
                              std::span<const int> ks) {
  std::vector<double> curve;
  for (const int k : ks) {
    double acc = 0.0;
    for (const auto& [n, c] : task_counts) {
      if (k > n) throw std::invalid_argument("pass_at_k: k exceeds sample count");
      // 1 - C(n-c, k)/C(n, k) as a stable product.
      double miss = 1.0;
      for (int i = 0; i < k; ++i) {
        miss *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
        if (n - c - i <= 0) {
          miss = 0.0;
          break;
        }
      }
      acc += 1.0 - miss;
    }
    curve.push_back(task_counts.empty() ? 0.0 : acc / static_cast<double>(task_counts.size()));
  }
  return curve;
}

std::vector<RobustnessPoint> robustness_curve(
    const PolicyNet& net, const TaskSetup& setup,
    std::span<const CorruptionParams> grid, int tasks, double temperature) {
  std::vector<RobustnessPoint> points;
  for (const auto& cp : grid) {
    EvalOptions opts;
    opts.gate = setup.gate;
    opts.gate.strategy = Strategy::Hybrid;
    opts.temperature = temperature;
    opts.tasks = tasks;
    if (cp.p_drop > 0.0 || cp.p_mislabel > 0.0) opts.corruption = cp;
    const auto records = evaluate(net, setup, opts);
    RobustnessPoint pt;
    pt.p_drop = cp.p_drop;
    pt.p_mislabel = cp.p_mislabel;
    pt.sr = records.empty() ? 0.0 : success_rate(records);
    pt.sel_score = records.empty() ? 0.0 : sel(records);
    points.push_back(pt);
  }
  return points;
}

StrategyRow summarize_strategy(const std::string& name,
                               std::span<const EpisodeRecord> records) {
  StrategyRow row;
  row.name = name;
  row.episodes = static_cast<int>(records.size());
  if (records.empty()) return row;
  row.sr = success_rate(records);
  row.sel_score = sel(records);
  double te = 0.0, ts = 0.0, tr = 0.0;
  for (const auto& r : records) {
    const auto acc = token_accounting(r);
    te += acc.tokens_per_episode;
    ts += acc.tokens_per_step;
    tr += acc.thinking_ratio;
  }
  row.tokens_per_episode = te / row.episodes;
  row.tokens_per_step = ts / row.episodes;
  row.thinking_ratio = tr / row.episodes;
  return row;
}

std::string episode_record_json(const EpisodeRecord& rec) {
  nlohmann::json j;
  j["task_seed"] = rec.task_seed;
  j["strategy"] = strategy_name(rec.strategy);
  j["success"] = rec.success;
  j["steps"] = rec.steps;
  j["shortest"] = rec.shortest;
  j["tokens"] = rec.tokens_generated;
  j["thought_steps"] = rec.thought_steps;
  auto steps = nlohmann::json::array();
  for (const auto& s : rec.step_logs) {
    steps.push_back({{"clock", s.clock},
                     {"prelim_entropy_norm", s.prelim_entropy_norm},
                     {"thought", s.thought},
                     {"tokens", s.tokens},
                     {"action", s.action},
                     {"reward", s.reward}});
  }
  j["step_logs"] = steps;
  return j.dump();
}

}  // namespace enav
