#pragma once

#include "enav/trainer.hpp"

namespace enav {

double success_rate(std::span<const EpisodeRecord> records);

// SEL = (1/N) sum_i S_i * w_i / max(w_i, e_i).
double sel(std::span<const EpisodeRecord> records);

double discounted_return(std::span<const double> rewards, double gamma);

// Runs the given strategy/temperature over the held-out task stream.
struct EvalOptions {
  GateConfig gate;
  double temperature = 0.2;
  int tasks = 200;
  std::optional<CorruptionParams> corruption;
  uint64_t sample_tag = 0;  // distinguishes repeated samples of the same task
};

std::vector<EpisodeRecord> evaluate(const PolicyNet& net, const TaskSetup& setup,
                                    const EvalOptions& opts);

struct SweepResult {
  std::vector<double> thresholds;
  std::vector<double> mean_q;                // Monte-Carlo discounted return
  std::vector<double> mean_tokens_per_step;
  std::vector<int> episode_counts;
};

// Seed-paired hybrid evaluation across entropy thresholds (gamma-discounted
// return from episode start per Eq.-2-style Monte Carlo estimation).
SweepResult q_threshold_sweep(const PolicyNet& net, const TaskSetup& setup,
                              std::span<const double> thresholds,
                              int episodes_per_threshold, double gamma,
                              int ntw, double temperature);

struct EntropyHistogram {
  std::array<long, 20> bins{};  // normalized entropy, 20 bins over [0,1]
  long total = 0;

  double fraction_at_least(double tau) const;
};

EntropyHistogram entropy_histogram(std::span<const double> entropies);

// Prelim-entropy samples from no-think rollouts on held-out tasks.
std::vector<double> collect_nothink_entropies(const PolicyNet& net,
                                              const TaskSetup& setup, int tasks,
                                              double temperature);

// render_map with the per-step entropy overlay (first decision per waypoint;
// sentinel entropies clamp to 0).
Image entropy_heatmap(const EpisodeRecord& record, const AnnotatedMap& map);

struct StratumRow {
  int count = 0;
  double sr = 0.0;
  double mean_tr = 0.0;
};

// Buckets on w_i: [0, b1) easy, [b1, b2] medium, (b2, inf) hard.
std::array<StratumRow, 3> difficulty_stratify(std::span<const EpisodeRecord> records,
                                              int b1 = 10, int b2 = 25);

// Unbiased pass@k: per task 1 - C(n-c, k)/C(n, k), averaged over tasks.
std::vector<double> pass_at_k(std::span<const std::pair<int, int>> task_counts,
                              std::span<const int> ks);

struct RobustnessPoint {
  double p_drop = 0.0;
  double p_mislabel = 0.0;
  double sr = 0.0;
  double sel_score = 0.0;
};

std::vector<RobustnessPoint> robustness_curve(
    const PolicyNet& net, const TaskSetup& setup,
    std::span<const CorruptionParams> grid, int tasks, double temperature);

// Everything emit_report writes: Table-1-style strategy comparison, raw
// records, and deterministic SVG plots with embedded data tables.
struct StrategyRow {
  std::string name;
  double sr = 0.0;
  double sel_score = 0.0;
  double tokens_per_episode = 0.0;
  double tokens_per_step = 0.0;
  double thinking_ratio = 0.0;
  int episodes = 0;
};

StrategyRow summarize_strategy(const std::string& name,
                               std::span<const EpisodeRecord> records);

struct ReportInputs {
  std::vector<StrategyRow> strategies;
  std::vector<EpisodeRecord> records;
  std::optional<SweepResult> sweep;
  std::optional<EntropyHistogram> histogram;
  std::vector<std::pair<int, int>> pass_counts;  // (n, c) per task
  std::vector<int> pass_ks;
  std::array<StratumRow, 3> strata{};
  bool has_strata = false;
  std::vector<RobustnessPoint> robustness;
};

void emit_report(const ReportInputs& inputs, const std::string& out_dir);

std::string episode_record_json(const EpisodeRecord& rec);

}  // namespace enav
