#include <iostream>

#include "CLI11.hpp"
#include "enav/pipeline.hpp"
#include "json.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  std::string run_id;
  long long seed = -1;
  int workers = -1;
};

enav::RunConfig resolve_config(const GlobalArgs& g) {
  enav::RunConfig cfg;
  if (!g.config_path.empty()) cfg = enav::validate_config(g.config_path);
  if (!g.out_dir.empty()) cfg.run_out = g.out_dir;
  if (g.seed >= 0) cfg.run_seed = static_cast<uint64_t>(g.seed);
  if (g.workers > 0) cfg.run_workers = g.workers;
  return cfg;
}

int run_with_error_record(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    std::cerr << err.dump() << std::endl;
    return 1;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"entropy-gated hybrid reasoning navigation"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "config file (key = value lines)");
  app.add_option("--out", g.out_dir, "output base directory (overrides run.out)");
  app.add_option("--run-id", g.run_id, "run directory name (default: timestamp-confighash)");
  app.add_option("--seed", g.seed, "master seed (overrides run.seed)");
  app.add_option("--workers", g.workers, "episode workers (overrides run.workers)");

  auto* gen = app.add_subcommand("gen-data", "collect the hybrid expert dataset");
  auto* sft = app.add_subcommand("sft", "hybrid supervised fine-tuning");
  auto* rl = app.add_subcommand("rl", "two-stage online RL");
  int stage = 1;
  rl->add_option("--stage", stage, "1 or 2")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a strategy on held-out tasks");
  enav::EvalArgs eval_args;
  ev->add_option("--strategy", eval_args.strategy, "nothink|dense|everyk|hybrid");
  ev->add_option("--tau", eval_args.tau, "entropy threshold override");
  ev->add_option("--ntw", eval_args.ntw, "no-thinking window override");
  ev->add_option("--ckpt", eval_args.ckpt, "checkpoint path (default stageII_best)");

  auto* sweep = app.add_subcommand("sweep", "parameter sweeps");
  std::string sweep_kind;
  sweep->add_option("kind", sweep_kind, "tau|ntw|qvalue|robustness")->required();

  auto* analyze = app.add_subcommand("analyze", "entropy histogram and heatmap");
  auto* report = app.add_subcommand("report", "aggregate CSV/SVG report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  return run_with_error_record([&] {
    const enav::RunConfig cfg = resolve_config(g);
    const std::string run_id = g.run_id.empty() ? enav::default_run_id(cfg) : g.run_id;
    const enav::RunPaths paths = enav::prepare_run_dir(cfg, run_id);

    if (gen->parsed()) enav::pipeline_gen_data(cfg, paths);
    if (sft->parsed()) enav::pipeline_sft(cfg, paths);
    if (rl->parsed()) enav::pipeline_rl(cfg, paths, stage);
    if (ev->parsed()) enav::pipeline_eval(cfg, paths, eval_args);
    if (sweep->parsed()) enav::pipeline_sweep(cfg, paths, sweep_kind);
    if (analyze->parsed()) enav::pipeline_analyze(cfg, paths);
    if (report->parsed()) enav::pipeline_report(cfg, paths);
  });
}

int main(int argc, char** argv) { return run_cli(argc, argv); }
