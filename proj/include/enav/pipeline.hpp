#pragma once

#include "enav/config.hpp"
#include "enav/eval.hpp"

namespace enav {

struct RunPaths {
  std::string root;

  std::string config_file() const { return root + "/config.resolved.txt"; }
  std::string build_file() const { return root + "/build.json"; }
  std::string datasets() const { return root + "/datasets"; }
  std::string checkpoints() const { return root + "/checkpoints"; }
  std::string logs() const { return root + "/logs"; }
  std::string evals() const { return root + "/eval"; }
  std::string reports() const { return root + "/report"; }

  std::string hsft_ckpt() const { return checkpoints() + "/hsft.ckpt"; }
  std::string stage_best_ckpt(int stage) const {
    return checkpoints() + (stage == 1 ? "/stageI_best.ckpt" : "/stageII_best.ckpt");
  }
};

std::string default_run_id(const RunConfig& cfg);

// Creates <out>/<run_id>/ and writes the resolved config plus build metadata.
// An existing run directory is reused only when its resolved config matches;
// a different config under the same run id is a collision and is rejected.
RunPaths prepare_run_dir(const RunConfig& cfg, const std::string& run_id);

struct MissingArtifactError : std::runtime_error {
  explicit MissingArtifactError(const std::string& path)
      : std::runtime_error("missing prerequisite artifact: " + path), path(path) {}
  std::string path;
};

void require_file(const std::string& path);

// Subcommand bodies. Each throws on failure; the CLI wrapper turns that into
// a nonzero exit code plus a machine-readable error record.
void pipeline_gen_data(const RunConfig& cfg, const RunPaths& paths);
void pipeline_sft(const RunConfig& cfg, const RunPaths& paths);
void pipeline_rl(const RunConfig& cfg, const RunPaths& paths, int stage);

struct EvalArgs {
  std::string strategy = "hybrid";
  double tau = -1.0;   // <0: take from config
  int ntw = -1;        // <0: take from config
  std::string ckpt;    // empty: stageII_best.ckpt
};

void pipeline_eval(const RunConfig& cfg, const RunPaths& paths, const EvalArgs& args);
void pipeline_sweep(const RunConfig& cfg, const RunPaths& paths, const std::string& kind);
void pipeline_analyze(const RunConfig& cfg, const RunPaths& paths);
void pipeline_report(const RunConfig& cfg, const RunPaths& paths);

std::string episode_record_full_json(const EpisodeRecord& rec);
EpisodeRecord episode_record_from_json(const std::string& line);

}  // namespace enav
