#include "enav/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "enav/rng.hpp"
#include "enav/version.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace enav {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.write(content.data(), static_cast<long>(content.size()));
}

char hex_digit(uint64_t v) { return "0123456789abcdef"[v & 0xF]; }

std::string hex16(uint64_t v) {
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<size_t>(i)] = hex_digit(v);
    v >>= 4;
  }
  return s;
}

}  // namespace

std::string default_run_id(const RunConfig& cfg) {
  const auto now = std::chrono::system_clock::now();
  const auto secs =
      std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  return std::to_string(secs) + "-" + hex16(config_hash(cfg));
}

RunPaths prepare_run_dir(const RunConfig& cfg, const std::string& run_id) {
  RunPaths paths;
  paths.root = cfg.run_out + "/" + run_id;
  const std::string resolved = serialize_config(cfg);

  if (fs::exists(paths.config_file())) {
    if (read_file(paths.config_file()) != resolved) {
      throw std::runtime_error("run id collision: " + paths.root +
                               " holds a different resolved config");
    }
  }
  fs::create_directories(paths.root);
  fs::create_directories(paths.datasets());
  fs::create_directories(paths.checkpoints());
  fs::create_directories(paths.logs());
  fs::create_directories(paths.evals());
  fs::create_directories(paths.reports());

  write_file(paths.config_file(), resolved);
  nlohmann::json build;
  build["build_hash"] = kBuildHash;
  build["seed"] = cfg.run_seed;
  build["run_id"] = run_id;
  build["config_hash"] = hex16(config_hash(cfg));
  write_file(paths.build_file(), build.dump(2) + "\n");
  return paths;
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw MissingArtifactError(path);
}

void pipeline_gen_data(const RunConfig& cfg, const RunPaths& paths) {
  const TaskSetup setup = cfg.to_task_setup();
  std::ofstream log(paths.logs() + "/gen_data.log");

  HybridDataset ds = collect_expert_dataset(setup, cfg.data_steps, &log);

  // Bootstrap pass: fit a no-think net on nrd, score entropies, pick the top
  // fraction, then annotate reasoning traces for them.
  PolicyNet filter_net(cfg.to_policy_config(),
                       derive_seed(cfg.run_seed, "bootstrap_init"));
  HybridDataset nrd_only;
  nrd_only.nrd = ds.nrd;
  hsft_train(filter_net, nrd_only, cfg.sft_bootstrap_epochs, cfg.sft_batch,
             cfg.sft_lr, derive_seed(cfg.run_seed, "bootstrap_sft"));
  const auto selected = entropy_filter(ds, filter_net, cfg.data_top_fraction);
  const int discarded =
      annotate_reasoning(ds, selected, cfg.data_annotator_noise,
                         cfg.data_annotator_attempts,
                         derive_seed(cfg.run_seed, "annotator"));
  log << "selected " << selected.size() << " high-entropy samples, annotated "
      << ds.rd.size() << ", discarded " << discarded << "\n";

  save_dataset(ds, paths.datasets());
}

void pipeline_sft(const RunConfig& cfg, const RunPaths& paths) {
  require_file(paths.datasets() + "/nrd.jsonl");
  require_file(paths.datasets() + "/rd.jsonl");
  const HybridDataset ds = load_dataset(paths.datasets(), cfg.to_policy_config());

  PolicyNet net(cfg.to_policy_config(), derive_seed(cfg.run_seed, "hsft_init"));
  const SftResult result = hsft_train(net, ds, cfg.sft_epochs, cfg.sft_batch,
                                      cfg.sft_lr, derive_seed(cfg.run_seed, "hsft"));
  save_checkpoint(net, paths.hsft_ckpt());

  std::ofstream log(paths.logs() + "/sft.jsonl");
  for (size_t e = 0; e < result.epoch_losses.size(); ++e) {
    nlohmann::json j;
    j["epoch"] = e;
    j["loss"] = result.epoch_losses[e];
    log << j.dump() << "\n";
  }
}

void pipeline_rl(const RunConfig& cfg, const RunPaths& paths, int stage) {
  const TaskSetup setup = cfg.to_task_setup();
  const PPOConfig ppo = cfg.to_ppo_config();
  std::ofstream log(paths.logs() + "/train_log.jsonl", std::ios::app);

  if (stage == 1) {
    require_file(paths.hsft_ckpt());
    PolicyNet net = load_checkpoint(paths.hsft_ckpt());
    train_stage(std::move(net), nullptr, 1, ppo, setup, paths.checkpoints(),
                1u << 20, &log);
  } else if (stage == 2) {
    require_file(paths.stage_best_ckpt(1));
    PolicyNet ref = load_checkpoint(paths.stage_best_ckpt(1));
    train_stage(ref, &ref, 2, ppo, setup, paths.checkpoints(), 2u << 20, &log);
  } else {
    throw std::invalid_argument("rl: stage must be 1 or 2");
  }
}

namespace {

PolicyNet load_eval_net(const RunPaths& paths, const std::string& ckpt) {
  const std::string path = ckpt.empty() ? paths.stage_best_ckpt(2)
                                        : (ckpt[0] == '/' ? ckpt : paths.root + "/" + ckpt);
  require_file(path);
  return load_checkpoint(path);
}

}  // namespace

void pipeline_eval(const RunConfig& cfg, const RunPaths& paths, const EvalArgs& args) {
  const auto strategy = strategy_from_name(args.strategy);
  if (!strategy) {
    throw std::invalid_argument("eval: unknown strategy '" + args.strategy + "'");
  }
  const TaskSetup setup = cfg.to_task_setup();
  const PolicyNet net = load_eval_net(paths, args.ckpt);

  EvalOptions opts;
  opts.gate = cfg.to_gate_config();
  opts.gate.strategy = *strategy;
  if (args.tau >= 0.0) opts.gate.tau = args.tau;
  if (args.ntw >= 0) opts.gate.ntw = args.ntw;
  opts.temperature = cfg.eval_temperature;
  opts.tasks = cfg.eval_tasks;

  const auto records = evaluate(net, setup, opts);
  std::ofstream rec_file(paths.evals() + "/records_" + args.strategy + ".jsonl");
  std::ofstream step_file(paths.evals() + "/steps_" + args.strategy + ".jsonl");
  for (const auto& r : records) {
    rec_file << episode_record_full_json(r) << "\n";
    for (const auto& s : r.step_logs) step_file << step_log_json(s) << "\n";
  }

  const StrategyRow row = summarize_strategy(args.strategy, records);
  nlohmann::json j;
  j["strategy"] = row.name;
  j["sr"] = row.sr;
  j["sel"] = row.sel_score;
  j["tokens_per_episode"] = row.tokens_per_episode;
  j["tokens_per_step"] = row.tokens_per_step;
  j["thinking_ratio"] = row.thinking_ratio;
  j["episodes"] = row.episodes;
  write_file(paths.evals() + "/summary_" + args.strategy + ".json", j.dump(2) + "\n");
}

void pipeline_sweep(const RunConfig& cfg, const RunPaths& paths,
                    const std::string& kind) {
  const TaskSetup setup = cfg.to_task_setup();

  if (kind == "qvalue") {
    require_file(paths.hsft_ckpt());
    const PolicyNet net = load_checkpoint(paths.hsft_ckpt());
    const SweepResult sweep =
        q_threshold_sweep(net, setup, cfg.sweep_qvalue_taus, cfg.sweep_episodes,
                          cfg.rl_gamma, cfg.gate_ntw, cfg.eval_temperature);
    nlohmann::json j;
    j["thresholds"] = sweep.thresholds;
    j["mean_q"] = sweep.mean_q;
    j["mean_tokens_per_step"] = sweep.mean_tokens_per_step;
    j["episode_counts"] = sweep.episode_counts;
    write_file(paths.evals() + "/sweep_qvalue.json", j.dump(2) + "\n");
    return;
  }

  const PolicyNet net = load_eval_net(paths, "");
  if (kind == "tau") {
    nlohmann::json rows = nlohmann::json::array();
    for (const double tau : cfg.sweep_qvalue_taus) {
      EvalOptions opts;
      opts.gate = cfg.to_gate_config();
      opts.gate.strategy = Strategy::Hybrid;
      opts.gate.tau = tau;
      opts.temperature = cfg.eval_temperature;
      opts.tasks = cfg.sweep_episodes;
      const auto records = evaluate(net, setup, opts);
      const StrategyRow row = summarize_strategy("hybrid", records);
      rows.push_back({{"tau", tau},
                      {"sr", row.sr},
                      {"sel", row.sel_score},
                      {"tokens_per_step", row.tokens_per_step},
                      {"thinking_ratio", row.thinking_ratio}});
    }
    write_file(paths.evals() + "/sweep_tau.json", rows.dump(2) + "\n");
  } else if (kind == "ntw") {
    nlohmann::json rows = nlohmann::json::array();
    for (const double ntw : cfg.sweep_ntw_values) {
      EvalOptions opts;
      opts.gate = cfg.to_gate_config();
      opts.gate.strategy = Strategy::Hybrid;
      opts.gate.ntw = static_cast<int>(ntw);
      opts.temperature = cfg.eval_temperature;
      opts.tasks = cfg.sweep_episodes;
      const auto records = evaluate(net, setup, opts);
      const StrategyRow row = summarize_strategy("hybrid", records);
      rows.push_back({{"ntw", static_cast<int>(ntw)},
                      {"sr", row.sr},
                      {"sel", row.sel_score},
                      {"tokens_per_step", row.tokens_per_step},
                      {"thinking_ratio", row.thinking_ratio}});
    }
    write_file(paths.evals() + "/sweep_ntw.json", rows.dump(2) + "\n");
  } else if (kind == "robustness") {
    std::vector<CorruptionParams> grid;
    for (const double pd : cfg.sweep_robust_p_drop) {
      for (const double pm : cfg.sweep_robust_p_mislabel) {
        grid.push_back({pd, pm});
      }
    }
    const auto points = robustness_curve(net, setup, grid, cfg.sweep_episodes,
                                         cfg.eval_temperature);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& pt : points) {
      rows.push_back({{"p_drop", pt.p_drop},
                      {"p_mislabel", pt.p_mislabel},
                      {"sr", pt.sr},
                      {"sel", pt.sel_score}});
    }
    write_file(paths.evals() + "/sweep_robustness.json", rows.dump(2) + "\n");
  } else {
    throw std::invalid_argument("sweep: kind must be tau|ntw|qvalue|robustness");
  }
}

void pipeline_analyze(const RunConfig& cfg, const RunPaths& paths) {
  const TaskSetup setup = cfg.to_task_setup();

  // Entropy distribution of the hybrid-SFT net in no-think mode (falls back
  // to the stage-II net when only RL checkpoints exist).
  std::string ckpt = paths.hsft_ckpt();
  if (!fs::exists(ckpt)) ckpt = paths.stage_best_ckpt(2);
  require_file(ckpt);
  const PolicyNet net = load_checkpoint(ckpt);

  const auto entropies = collect_nothink_entropies(
      net, setup, std::min(cfg.eval_tasks, 50), cfg.eval_temperature);
  const EntropyHistogram hist = entropy_histogram(entropies);
  nlohmann::json j;
  j["bins"] = hist.bins;
  j["total"] = hist.total;
  j["fraction_ge_0.6"] = hist.fraction_at_least(0.6);
  write_file(paths.evals() + "/entropy_histogram.json", j.dump(2) + "\n");

  // One hybrid episode with the map kept, rendered as an entropy heatmap.
  GridHouse house = generate_house(eval_house_seed(setup, 0), setup.gen);
  EpisodeOptions ep;
  ep.env = setup.env_eval;
  ep.gate = cfg.to_gate_config();
  ep.gate.strategy = Strategy::Hybrid;
  ep.temperature = cfg.eval_temperature;
  ep.keep_map = true;
  const EpisodeRecord rec =
      run_episode(net, house, ep, derive_seed(setup.master_seed, "heatmap"), setup.feats);
  if (rec.final_map) {
    const Image img = entropy_heatmap(rec, *rec.final_map);
    img.save_ppm(paths.evals() + "/entropy_heatmap.ppm");
  }
}

void pipeline_report(const RunConfig& cfg, const RunPaths& paths) {
  ReportInputs inputs;

  for (const char* name : {"nothink", "dense", "everyk", "hybrid"}) {
    const std::string rec_path = paths.evals() + "/records_" + name + ".jsonl";
    if (!fs::exists(rec_path)) continue;
    std::ifstream f(rec_path);
    std::vector<EpisodeRecord> records;
    std::string line;
    while (std::getline(f, line)) {
      if (!line.empty()) records.push_back(episode_record_from_json(line));
    }
    inputs.strategies.push_back(summarize_strategy(name, records));
    if (std::string(name) == "hybrid") {
      inputs.strata = difficulty_stratify(records, cfg.eval_difficulty_b1,
                                          cfg.eval_difficulty_b2);
      inputs.has_strata = true;
    }
    for (auto& r : records) inputs.records.push_back(std::move(r));
  }

  const std::string sweep_path = paths.evals() + "/sweep_qvalue.json";
  if (fs::exists(sweep_path)) {
    const auto j = nlohmann::json::parse(read_file(sweep_path));
    SweepResult sweep;
    sweep.thresholds = j.at("thresholds").get<std::vector<double>>();
    sweep.mean_q = j.at("mean_q").get<std::vector<double>>();
    sweep.mean_tokens_per_step = j.at("mean_tokens_per_step").get<std::vector<double>>();
    sweep.episode_counts = j.at("episode_counts").get<std::vector<int>>();
    inputs.sweep = sweep;
  }

  const std::string hist_path = paths.evals() + "/entropy_histogram.json";
  if (fs::exists(hist_path)) {
    const auto j = nlohmann::json::parse(read_file(hist_path));
    EntropyHistogram hist;
    const auto bins = j.at("bins").get<std::vector<long>>();
    for (size_t i = 0; i < hist.bins.size() && i < bins.size(); ++i) {
      hist.bins[i] = bins[i];
    }
    hist.total = j.at("total").get<long>();
    inputs.histogram = hist;
  }

  const std::string robust_path = paths.evals() + "/sweep_robustness.json";
  if (fs::exists(robust_path)) {
    const auto j = nlohmann::json::parse(read_file(robust_path));
    for (const auto& row : j) {
      inputs.robustness.push_back({row.at("p_drop").get<double>(),
                                   row.at("p_mislabel").get<double>(),
                                   row.at("sr").get<double>(),
                                   row.at("sel").get<double>()});
    }
  }

  emit_report(inputs, paths.reports());
}

std::string episode_record_full_json(const EpisodeRecord& rec) {
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
                     {"x", s.pose_before.x},
                     {"y", s.pose_before.y},
                     {"heading", static_cast<int>(s.pose_before.heading)},
                     {"action", s.action},
                     {"reward", s.reward},
                     {"done", s.done},
                     {"success", s.success},
                     {"geodesic", s.geodesic},
                     {"prelim_entropy_norm", s.prelim_entropy_norm},
                     {"thought", s.thought},
                     {"tokens", s.tokens}});
  }
  j["step_logs"] = steps;
  return j.dump();
}

EpisodeRecord episode_record_from_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  EpisodeRecord rec;
  rec.task_seed = j.at("task_seed").get<uint64_t>();
  rec.strategy = *strategy_from_name(j.at("strategy").get<std::string>());
  rec.success = j.at("success").get<bool>();
  rec.steps = j.at("steps").get<int>();
  rec.shortest = j.at("shortest").get<int>();
  rec.tokens_generated = j.at("tokens").get<long>();
  rec.thought_steps = j.at("thought_steps").get<int>();
  for (const auto& s : j.at("step_logs")) {
    StepLog log;
    log.clock = s.at("clock").get<int>();
    log.pose_before = {s.at("x").get<int>(), s.at("y").get<int>(),
                       static_cast<Heading>(s.at("heading").get<int>())};
    log.action = s.at("action").get<int>();
    log.reward = s.at("reward").get<double>();
    log.done = s.at("done").get<bool>();
    log.success = s.at("success").get<bool>();
    log.geodesic = s.at("geodesic").get<int>();
    log.prelim_entropy_norm = s.at("prelim_entropy_norm").get<double>();
    log.thought = s.at("thought").get<bool>();
    log.tokens = s.at("tokens").get<int>();
    rec.step_logs.push_back(log);
  }
  return rec;
}

}  // namespace enav
