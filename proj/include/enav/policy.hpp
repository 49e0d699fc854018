#pragma once

#include <Eigen/Dense>
#include <array>
#include <span>
#include <string_view>

#include "enav/navsim.hpp"
#include "enav/vocab.hpp"

namespace enav {

enum class Mode : uint8_t { NoThink = 0, Think = 1 };

struct PolicyConfig {
  int state_width = 128;
  int token_embed_dim = 32;
  int obs_embed_dim = 48;
  int cell_embed_dim = 8;
  int window = 4;  // short-term memory w: last w observations, w-1 actions
  int max_trace_len = 8;
  int categories = 12;
  int view_deep = 7;
  int view_wide = 5;
  int map_feature_len = 209;

  int cell_classes() const { return 3 + categories; }
  int obs_cells() const { return view_deep * view_wide; }
  int obs_input() const { return obs_cells() * cell_embed_dim; }
  int action_slot() const { return kNumNavActions + 1; }  // +1 null padding class
  int ctx_input() const {
    return window * obs_embed_dim + (window - 1) * action_slot() + categories +
           map_feature_len;
  }
  bool operator==(const PolicyConfig&) const = default;
};

struct PolicyContext {
  int instruction = 0;
  std::vector<Observation> obs_window;  // oldest..newest, size() <= window
  std::vector<int> action_window;       // oldest..newest, size() <= window-1
  std::vector<double> map_feats;
  Mode mode = Mode::NoThink;
};

// Shared-trunk token policy: cell/token/mode embeddings, a tanh context
// encoder producing the state vector, a GRU token core, a token-logit head
// and a linear value head. Parameters live in one flat double array; values
// are kept exactly float32-representable so checkpoints round-trip
// bit-exactly.
class PolicyNet {
 public:
  struct TensorInfo {
    std::string name;
    int rows = 0;
    int cols = 0;
    size_t offset = 0;
  };

  PolicyNet(const PolicyConfig& cfg, uint64_t init_seed);

  const PolicyConfig& config() const { return cfg_; }
  size_t param_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }

  Eigen::Map<const Eigen::MatrixXd> tensor(std::string_view name) const;
  Eigen::Map<Eigen::MatrixXd> tensor(std::string_view name);

  // Rounds every parameter through float32; applied after each optimizer
  // step so in-memory values always match the checkpoint payload.
  void snap_to_f32();

 private:
  friend PolicyNet load_checkpoint(const std::string& path);
  PolicyConfig cfg_;
  std::vector<double> params_;
  std::vector<TensorInfo> tensors_;
};

struct PolicyOutput {
  Mode mode = Mode::NoThink;
  std::vector<int> tokens;
  NavAction action = NavAction::End;
  std::vector<double> logprobs;  // unit-temperature, one per emitted token
  std::array<double, tok::kNumActions> first_action_dist{};
  double entropy_raw = 0.0;
  double entropy_norm = 0.0;
  double value = 0.0;
};

// Shannon entropy of an action distribution, raw nats and normalized by
// ln(num actions). Throws if the input is not normalized to 1e-6.
std::pair<double, double> action_entropy(std::span<const double> dist);

Eigen::VectorXd encode_context(const PolicyNet& net, const PolicyContext& ctx);

// Single constrained action token. Temperature shapes the sampling draw
// only; recorded log-probabilities, first_action_dist and entropy always
// refer to the unit-temperature policy. Temperature 0 is argmax with
// lowest-id tie-break.
PolicyOutput act_nothink(const PolicyNet& net, const PolicyContext& ctx,
                         double temperature, uint64_t seed);

// Reasoning tokens until EOT (forced at max_trace_len), then one constrained
// action token. first_action_dist/entropy refer to the final action
// position.
PolicyOutput act_think(const PolicyNet& net, const PolicyContext& ctx,
                       int max_trace_len, double temperature, uint64_t seed);

// Teacher-forced activations for one (context, token sequence) pair; reused
// for re-scoring, loss gradients and the KL terms.
struct SeqTape {
  int n_pos = 0;
  std::vector<int> tokens;
  std::vector<uint32_t> masks;  // allowed-token bitmask per position
  int mode = 0;
  std::vector<int> cell_class;     // window * obs_cells ids, -1 for padding
  Eigen::MatrixXd obs_cellvec;     // obs_input x window
  std::vector<char> slot_present;  // window
  Eigen::MatrixXd obs_vec;         // obs_embed x window (post-tanh)
  Eigen::VectorXd x;               // ctx_input
  Eigen::VectorXd s0;              // state (post-tanh)
  double value = 0.0;
  Eigen::MatrixXd h;               // state x n_pos, h.col(0) == s0
  Eigen::MatrixXd gz, gr, ghat;    // state x (n_pos-1)
  Eigen::MatrixXd probs;           // vocab x n_pos, constrained distributions
  std::vector<double> logprobs;
};

SeqTape policy_forward(const PolicyNet& net, const PolicyContext& ctx,
                       std::span<const int> tokens);

// Context encoding and value head only (n_pos = 0); backward through it with
// policy_backward and a d_value upstream.
SeqTape value_forward(const PolicyNet& net, const PolicyContext& ctx);

// Accumulates dLoss/dparams into grad given upstream derivatives with
// respect to the per-token logprobs, optionally the full per-position
// distributions, and the value output. grad must be param_count() long.
void policy_backward(const PolicyNet& net, const SeqTape& tape,
                     std::span<const double> d_logprob,
                     const std::vector<Eigen::VectorXd>* d_dist, double d_value,
                     std::vector<double>& grad);

struct SeqScore {
  std::vector<double> logprobs;
  std::vector<Eigen::VectorXd> dists;
  double value = 0.0;
};

// Re-scores a sequence that act_nothink/act_think could have produced for
// this context; throws on tokens illegal for the mode.
SeqScore forward_logprobs(const PolicyNet& net, const PolicyContext& ctx,
                          std::span<const int> tokens);

// Checkpoint file: magic "ENAV0001", little-endian u32 header length, JSON
// header (tensor table, vocab, config, config hash), then float32 LE payload
// in header order.
void save_checkpoint(const PolicyNet& net, const std::string& path);
PolicyNet load_checkpoint(const std::string& path);

}  // namespace enav
