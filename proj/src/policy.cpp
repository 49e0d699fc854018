#include "enav/policy.hpp"

#include <cmath>

#include "enav/rng.hpp"

namespace enav {

namespace {

constexpr uint32_t kActionMask = (1u << tok::kNumActions) - 1;
constexpr uint32_t kTraceMask = ((1u << tok::kVocabSize) - 1) & ~kActionMask;  // reasoning + EOT
constexpr uint32_t kEotMask = 1u << tok::kEot;

inline bool allowed(uint32_t mask, int t) { return (mask >> t) & 1u; }

// Constrained unit-temperature softmax; disallowed entries get probability 0.
void masked_softmax(const Eigen::VectorXd& logits, uint32_t mask,
                    Eigen::VectorXd& probs) {
  probs.setZero(logits.size());
  double mx = -1e300;
  for (int i = 0; i < logits.size(); ++i) {
    if (allowed(mask, i)) mx = std::max(mx, logits[i]);
  }
  double sum = 0.0;
  for (int i = 0; i < logits.size(); ++i) {
    if (!allowed(mask, i)) continue;
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  probs /= sum;
}

int sample_masked(const Eigen::VectorXd& logits, uint32_t mask,
                  double temperature, Rng& rng) {
  if (temperature <= 0.0) {
    int best = -1;
    double best_v = -1e300;
    for (int i = 0; i < logits.size(); ++i) {
      if (allowed(mask, i) && logits[i] > best_v) {
        best_v = logits[i];
        best = i;
      }
    }
    return best;
  }
  Eigen::VectorXd probs;
  Eigen::VectorXd scaled = logits / temperature;
  masked_softmax(scaled, mask, probs);
  // Draw among allowed tokens only.
  const double u = rng.next_double();
  double cum = 0.0;
  int last = -1;
  for (int i = 0; i < probs.size(); ++i) {
    if (!allowed(mask, i)) continue;
    last = i;
    cum += probs[i];
    if (u < cum) return i;
  }
  return last;
}

int cell_class_id(const ObsCell& cell) {
  switch (cell.kind) {
    case ObsCell::Unknown: return 0;
    case ObsCell::Wall: return 1;
    case ObsCell::Free: return 2;
    case ObsCell::Object: return 3 + cell.category;
  }
  return 0;
}

}  // namespace

PolicyNet::PolicyNet(const PolicyConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  const int S = cfg.state_width;
  const int E = cfg.token_embed_dim;
  auto add = [&](std::string name, int rows, int cols) {
    TensorInfo t;
    t.name = std::move(name);
    t.rows = rows;
    t.cols = cols;
    t.offset = params_.size();
    params_.resize(params_.size() + static_cast<size_t>(rows) * cols, 0.0);
    tensors_.push_back(std::move(t));
  };
  add("cell_embed", cfg.cell_embed_dim, cfg.cell_classes());
  add("w_obs", cfg.obs_embed_dim, cfg.obs_input());
  add("b_obs", cfg.obs_embed_dim, 1);
  add("w_ctx", S, cfg.ctx_input());
  add("b_ctx", S, 1);
  add("mode_embed", S, 2);
  add("tok_embed", E, tok::kVocabSize);
  add("w_gru_z", S, E + S);
  add("w_gru_r", S, E + S);
  add("w_gru_h", S, E + S);
  add("b_gru_z", S, 1);
  add("b_gru_r", S, 1);
  add("b_gru_h", S, 1);
  add("w_out", tok::kVocabSize, S);
  add("b_out", tok::kVocabSize, 1);
  add("w_val", 1, S);
  add("b_val", 1, 1);

  Rng rng(init_seed);
  for (const auto& t : tensors_) {
    const bool bias = t.name[0] == 'b';
    double scale = 0.0;
    if (!bias) {
      if (t.name == "cell_embed" || t.name == "tok_embed") {
        scale = 0.3;
      } else if (t.name == "mode_embed") {
        scale = 0.1;
      } else {
        scale = 1.0 / std::sqrt(static_cast<double>(t.cols));
      }
    }
    for (size_t i = 0; i < static_cast<size_t>(t.rows) * t.cols; ++i) {
      params_[t.offset + i] = bias ? 0.0 : scale * rng.next_gauss();
    }
  }
  // Init contract: the two mode embeddings differ by a fixed offset so the
  // prompt flag is visible from the first forward pass.
  {
    auto me = tensor("mode_embed");
    me.col(0).array() -= 0.25;
    me.col(1).array() += 0.25;
  }
  snap_to_f32();
}

Eigen::Map<const Eigen::MatrixXd> PolicyNet::tensor(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) {
      return {params_.data() + t.offset, t.rows, t.cols};
    }
  }
  throw std::invalid_argument("PolicyNet: unknown tensor " + std::string(name));
}

Eigen::Map<Eigen::MatrixXd> PolicyNet::tensor(std::string_view name) {
  for (const auto& t : tensors_) {
    if (t.name == name) {
      return {params_.data() + t.offset, t.rows, t.cols};
    }
  }
  throw std::invalid_argument("PolicyNet: unknown tensor " + std::string(name));
}

void PolicyNet::snap_to_f32() {
  for (auto& p : params_) p = static_cast<double>(static_cast<float>(p));
}

std::pair<double, double> action_entropy(std::span<const double> dist) {
  double sum = 0.0;
  for (double p : dist) sum += p;
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("action_entropy: distribution not normalized");
  }
  double h = 0.0;
  for (double p : dist) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return {h, h / std::log(static_cast<double>(dist.size()))};
}

namespace {

// Grammar masks for a think-mode sequence of the given trace length: trace
// positions admit reasoning tokens and EOT (EOT alone once the cap is hit),
// the final position admits action tokens only.
std::vector<uint32_t> think_masks(int trace_len, int max_trace_len) {
  std::vector<uint32_t> masks;
  for (int i = 0; i < trace_len; ++i) {
    masks.push_back(i >= max_trace_len ? kEotMask : kTraceMask);
  }
  masks.push_back(trace_len >= max_trace_len ? kEotMask : kTraceMask);  // EOT position
  masks.push_back(kActionMask);
  return masks;
}

std::vector<uint32_t> masks_for_sequence(const PolicyConfig& cfg, Mode mode,
                                         std::span<const int> tokens) {
  if (mode == Mode::NoThink) {
    if (tokens.size() != 1 || !tok::is_action(tokens[0])) {
      throw std::invalid_argument("no-think sequence must be one action token");
    }
    return {kActionMask};
  }
  if (tokens.size() < 2) {
    throw std::invalid_argument("think sequence needs at least EOT and an action");
  }
  const int n = static_cast<int>(tokens.size());
  const int trace_len = n - 2;
  if (trace_len > cfg.max_trace_len) {
    throw std::invalid_argument("think trace exceeds max_trace_len");
  }
  for (int i = 0; i < trace_len; ++i) {
    if (!tok::is_reasoning(tokens[static_cast<size_t>(i)])) {
      throw std::invalid_argument("think trace token outside reasoning vocabulary");
    }
  }
  if (tokens[static_cast<size_t>(n - 2)] != tok::kEot) {
    throw std::invalid_argument("think trace must terminate with EOT");
  }
  if (!tok::is_action(tokens[static_cast<size_t>(n - 1)])) {
    throw std::invalid_argument("think sequence must end with an action token");
  }
  return think_masks(trace_len, cfg.max_trace_len);
}

struct CtxEncoding {
  std::vector<int> cell_class;
  Eigen::MatrixXd obs_cellvec;
  std::vector<char> slot_present;
  Eigen::MatrixXd obs_vec;
  Eigen::VectorXd x;
  Eigen::VectorXd s0;
  double value = 0.0;
};

void encode_ctx(const PolicyNet& net, const PolicyContext& ctx, CtxEncoding& e) {
  const PolicyConfig& cfg = net.config();
  if (static_cast<int>(ctx.obs_window.size()) > cfg.window) {
    throw std::invalid_argument("PolicyContext: obs window longer than w");
  }
  if (static_cast<int>(ctx.action_window.size()) > cfg.window - 1) {
    throw std::invalid_argument("PolicyContext: action window longer than w-1");
  }
  if (static_cast<int>(ctx.map_feats.size()) != cfg.map_feature_len) {
    throw std::invalid_argument("PolicyContext: map feature length mismatch");
  }

  const auto cell_embed = net.tensor("cell_embed");
  const auto w_obs = net.tensor("w_obs");
  const auto b_obs = net.tensor("b_obs");

  e.cell_class.assign(static_cast<size_t>(cfg.window) * cfg.obs_cells(), -1);
  e.obs_cellvec.setZero(cfg.obs_input(), cfg.window);
  e.slot_present.assign(static_cast<size_t>(cfg.window), 0);
  e.obs_vec.setZero(cfg.obs_embed_dim, cfg.window);

  const int n_obs = static_cast<int>(ctx.obs_window.size());
  for (int i = 0; i < n_obs; ++i) {
    const int slot = cfg.window - n_obs + i;  // newest in the last slot
    const Observation& obs = ctx.obs_window[static_cast<size_t>(i)];
    if (obs.deep != cfg.view_deep || obs.wide != cfg.view_wide) {
      throw std::invalid_argument("PolicyContext: observation shape mismatch");
    }
    e.slot_present[static_cast<size_t>(slot)] = 1;
    for (int c = 0; c < cfg.obs_cells(); ++c) {
      const int cls = cell_class_id(obs.cells[static_cast<size_t>(c)]);
      e.cell_class[static_cast<size_t>(slot) * cfg.obs_cells() + c] = cls;
      e.obs_cellvec.col(slot).segment(static_cast<long>(c) * cfg.cell_embed_dim,
                                      cfg.cell_embed_dim) = cell_embed.col(cls);
    }
    e.obs_vec.col(slot) =
        (w_obs * e.obs_cellvec.col(slot) + b_obs.col(0)).array().tanh();
  }

  e.x.setZero(cfg.ctx_input());
  for (int s = 0; s < cfg.window; ++s) {
    e.x.segment(static_cast<long>(s) * cfg.obs_embed_dim, cfg.obs_embed_dim) =
        e.obs_vec.col(s);
  }
  long off = static_cast<long>(cfg.window) * cfg.obs_embed_dim;
  const int n_act = static_cast<int>(ctx.action_window.size());
  for (int s = 0; s < cfg.window - 1; ++s) {
    const int slot_class =
        s < cfg.window - 1 - n_act
            ? kNumNavActions  // null padding
            : ctx.action_window[static_cast<size_t>(s - (cfg.window - 1 - n_act))];
    if (slot_class < 0 || slot_class > kNumNavActions) {
      throw std::invalid_argument("PolicyContext: action id outside range");
    }
    e.x[off + s * cfg.action_slot() + slot_class] = 1.0;
  }
  off += static_cast<long>(cfg.window - 1) * cfg.action_slot();
  if (ctx.instruction < 0 || ctx.instruction >= cfg.categories) {
    throw std::invalid_argument("PolicyContext: instruction outside category range");
  }
  e.x[off + ctx.instruction] = 1.0;
  off += cfg.categories;
  for (int i = 0; i < cfg.map_feature_len; ++i) {
    e.x[off + i] = ctx.map_feats[static_cast<size_t>(i)];
  }

  const auto w_ctx = net.tensor("w_ctx");
  const auto b_ctx = net.tensor("b_ctx");
  const auto mode_embed = net.tensor("mode_embed");
  e.s0 = (w_ctx * e.x + b_ctx.col(0) +
          mode_embed.col(static_cast<int>(ctx.mode)))
             .array()
             .tanh();
  const auto w_val = net.tensor("w_val");
  const auto b_val = net.tensor("b_val");
  e.value = (w_val * e.s0)(0, 0) + b_val(0, 0);
}

void gru_step(const PolicyNet& net, const Eigen::VectorXd& h, int token,
              Eigen::VectorXd& z, Eigen::VectorXd& r, Eigen::VectorXd& hat,
              Eigen::VectorXd& h_next) {
  const PolicyConfig& cfg = net.config();
  const auto tok_embed = net.tensor("tok_embed");
  const int E = cfg.token_embed_dim;
  const int S = cfg.state_width;
  Eigen::VectorXd eh(E + S);
  eh.head(E) = tok_embed.col(token);
  eh.tail(S) = h;
  z = (net.tensor("w_gru_z") * eh + net.tensor("b_gru_z").col(0)).unaryExpr(
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  r = (net.tensor("w_gru_r") * eh + net.tensor("b_gru_r").col(0)).unaryExpr(
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  Eigen::VectorXd eh2 = eh;
  eh2.tail(S) = r.cwiseProduct(h);
  hat = (net.tensor("w_gru_h") * eh2 + net.tensor("b_gru_h").col(0)).array().tanh();
  h_next = (Eigen::VectorXd::Ones(S) - z).cwiseProduct(h) + z.cwiseProduct(hat);
}

}  // namespace

Eigen::VectorXd encode_context(const PolicyNet& net, const PolicyContext& ctx) {
  CtxEncoding e;
  encode_ctx(net, ctx, e);
  return e.s0;
}

namespace {

// Shared incremental decoder for both acting modes.
PolicyOutput decode(const PolicyNet& net, const PolicyContext& ctx, Mode mode,
                    int max_trace_len, double temperature, uint64_t seed) {
  CtxEncoding e;
  PolicyContext local = ctx;
  local.mode = mode;
  encode_ctx(net, local, e);

  const auto w_out = net.tensor("w_out");
  const auto b_out = net.tensor("b_out");
  Rng rng(seed);

  PolicyOutput out;
  out.mode = mode;
  out.value = e.value;

  Eigen::VectorXd h = e.s0;
  Eigen::VectorXd logits, probs, z, r, hat, h_next;

  auto emit = [&](uint32_t mask) {
    logits = w_out * h + b_out.col(0);
    masked_softmax(logits, mask, probs);
    const int token = sample_masked(logits, mask, temperature, rng);
    out.tokens.push_back(token);
    out.logprobs.push_back(std::log(probs[token]));
    return token;
  };

  if (mode == Mode::NoThink) {
    const int token = emit(kActionMask);
    for (int a = 0; a < tok::kNumActions; ++a) out.first_action_dist[a] = probs[a];
    out.action = static_cast<NavAction>(token);
  } else {
    int trace_len = 0;
    while (true) {
      const uint32_t mask = trace_len >= max_trace_len ? kEotMask : kTraceMask;
      const int token = emit(mask);
      gru_step(net, h, token, z, r, hat, h_next);
      h = h_next;
      if (token == tok::kEot) break;
      ++trace_len;
    }
    const int token = emit(kActionMask);
    for (int a = 0; a < tok::kNumActions; ++a) out.first_action_dist[a] = probs[a];
    out.action = static_cast<NavAction>(token);
  }

  auto [raw, norm] = action_entropy(out.first_action_dist);
  out.entropy_raw = raw;
  out.entropy_norm = norm;
  return out;
}

}  // namespace

PolicyOutput act_nothink(const PolicyNet& net, const PolicyContext& ctx,
                         double temperature, uint64_t seed) {
  return decode(net, ctx, Mode::NoThink, 0, temperature, seed);
}

PolicyOutput act_think(const PolicyNet& net, const PolicyContext& ctx,
                       int max_trace_len, double temperature, uint64_t seed) {
  return decode(net, ctx, Mode::Think, max_trace_len, temperature, seed);
}

SeqTape policy_forward(const PolicyNet& net, const PolicyContext& ctx,
                       std::span<const int> tokens) {
  const PolicyConfig& cfg = net.config();
  const auto masks = masks_for_sequence(cfg, ctx.mode, tokens);

  SeqTape tape;
  tape.n_pos = static_cast<int>(tokens.size());
  tape.tokens.assign(tokens.begin(), tokens.end());
  tape.masks = masks;
  tape.mode = static_cast<int>(ctx.mode);

  CtxEncoding e;
  encode_ctx(net, ctx, e);
  tape.cell_class = std::move(e.cell_class);
  tape.obs_cellvec = std::move(e.obs_cellvec);
  tape.slot_present = std::move(e.slot_present);
  tape.obs_vec = std::move(e.obs_vec);
  tape.x = std::move(e.x);
  tape.s0 = std::move(e.s0);
  tape.value = e.value;

  const int S = cfg.state_width;
  const int n = tape.n_pos;
  tape.h.setZero(S, n);
  tape.h.col(0) = tape.s0;
  tape.gz.setZero(S, std::max(0, n - 1));
  tape.gr.setZero(S, std::max(0, n - 1));
  tape.ghat.setZero(S, std::max(0, n - 1));
  tape.probs.setZero(tok::kVocabSize, n);
  tape.logprobs.resize(static_cast<size_t>(n));

  const auto w_out = net.tensor("w_out");
  const auto b_out = net.tensor("b_out");
  Eigen::VectorXd logits, probs, z, r, hat, h_next;
  for (int l = 0; l < n; ++l) {
    logits = w_out * tape.h.col(l) + b_out.col(0);
    masked_softmax(logits, masks[static_cast<size_t>(l)], probs);
    tape.probs.col(l) = probs;
    const int y = tape.tokens[static_cast<size_t>(l)];
    if (probs[y] <= 0.0) {
      throw std::invalid_argument("policy_forward: token disallowed at position " +
                                  std::to_string(l));
    }
    tape.logprobs[static_cast<size_t>(l)] = std::log(probs[y]);
    if (l + 1 < n) {
      gru_step(net, tape.h.col(l), y, z, r, hat, h_next);
      tape.gz.col(l) = z;
      tape.gr.col(l) = r;
      tape.ghat.col(l) = hat;
      tape.h.col(l + 1) = h_next;
    }
  }
  return tape;
}

void policy_backward(const PolicyNet& net, const SeqTape& tape,
                     std::span<const double> d_logprob,
                     const std::vector<Eigen::VectorXd>* d_dist, double d_value,
                     std::vector<double>& grad) {
  const PolicyConfig& cfg = net.config();
  if (grad.size() != net.param_count()) {
    throw std::invalid_argument("policy_backward: grad buffer size mismatch");
  }
  if (static_cast<int>(d_logprob.size()) != tape.n_pos) {
    throw std::invalid_argument("policy_backward: d_logprob size mismatch");
  }

  auto view = [&](std::string_view name) -> Eigen::Map<Eigen::MatrixXd> {
    for (const auto& t : net.tensors()) {
      if (t.name == name) return {grad.data() + t.offset, t.rows, t.cols};
    }
    throw std::invalid_argument("policy_backward: unknown tensor");
  };
  auto g_cell_embed = view("cell_embed");
  auto g_w_obs = view("w_obs");
  auto g_b_obs = view("b_obs");
  auto g_w_ctx = view("w_ctx");
  auto g_b_ctx = view("b_ctx");
  auto g_mode = view("mode_embed");
  auto g_tok = view("tok_embed");
  auto g_wz = view("w_gru_z");
  auto g_wr = view("w_gru_r");
  auto g_wh = view("w_gru_h");
  auto g_bz = view("b_gru_z");
  auto g_br = view("b_gru_r");
  auto g_bh = view("b_gru_h");
  auto g_w_out = view("w_out");
  auto g_b_out = view("b_out");
  auto g_w_val = view("w_val");
  auto g_b_val = view("b_val");

  const auto w_out = net.tensor("w_out");
  const auto w_val = net.tensor("w_val");
  const auto tok_embed = net.tensor("tok_embed");
  const auto wz = net.tensor("w_gru_z");
  const auto wr = net.tensor("w_gru_r");
  const auto wh = net.tensor("w_gru_h");
  const auto w_ctx = net.tensor("w_ctx");
  const auto w_obs = net.tensor("w_obs");

  const int S = cfg.state_width;
  const int E = cfg.token_embed_dim;
  const int n = tape.n_pos;

  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(S, n);
  Eigen::VectorXd dlogits(tok::kVocabSize);

  for (int l = n - 1; l >= 0; --l) {
    const auto p = tape.probs.col(l);
    dlogits.setZero();
    const double dlp = d_logprob[static_cast<size_t>(l)];
    if (dlp != 0.0) {
      dlogits = -dlp * p;
      dlogits[tape.tokens[static_cast<size_t>(l)]] += dlp;
    }
    if (d_dist && (*d_dist)[static_cast<size_t>(l)].size() != 0) {
      const Eigen::VectorXd& dd = (*d_dist)[static_cast<size_t>(l)];
      const double inner = dd.dot(p);
      dlogits.array() += p.array() * (dd.array() - inner);
    }
    if ((dlogits.array() != 0.0).any()) {
      g_w_out.noalias() += dlogits * tape.h.col(l).transpose();
      g_b_out.col(0) += dlogits;
      dh.col(l).noalias() += w_out.transpose() * dlogits;
    }

    if (l > 0) {
      // Backward through h_l = (1-z) h_{l-1} + z hat.
      const auto z = tape.gz.col(l - 1);
      const auto r = tape.gr.col(l - 1);
      const auto hat = tape.ghat.col(l - 1);
      const auto h_prev = tape.h.col(l - 1);
      const int y = tape.tokens[static_cast<size_t>(l - 1)];

      const Eigen::VectorXd dhl = dh.col(l);
      Eigen::VectorXd dz = dhl.cwiseProduct(hat - h_prev);
      Eigen::VectorXd dhat = dhl.cwiseProduct(z);
      Eigen::VectorXd dh_prev = dhl.cwiseProduct(Eigen::VectorXd::Ones(S) - z);

      Eigen::VectorXd eh(E + S);
      eh.head(E) = tok_embed.col(y);
      eh.tail(S) = h_prev;
      Eigen::VectorXd eh2 = eh;
      eh2.tail(S) = r.cwiseProduct(h_prev);

      Eigen::VectorXd de = Eigen::VectorXd::Zero(E);

      Eigen::VectorXd dhat_pre =
          dhat.cwiseProduct(Eigen::VectorXd::Ones(S) - hat.cwiseProduct(hat));
      g_wh.noalias() += dhat_pre * eh2.transpose();
      g_bh.col(0) += dhat_pre;
      Eigen::VectorXd deh2 = wh.transpose() * dhat_pre;
      de += deh2.head(E);
      Eigen::VectorXd drh = deh2.tail(S);
      Eigen::VectorXd dr = drh.cwiseProduct(h_prev);
      dh_prev += drh.cwiseProduct(r);

      Eigen::VectorXd dz_pre =
          dz.cwiseProduct(z).cwiseProduct(Eigen::VectorXd::Ones(S) - z);
      g_wz.noalias() += dz_pre * eh.transpose();
      g_bz.col(0) += dz_pre;
      Eigen::VectorXd deh = wz.transpose() * dz_pre;
      de += deh.head(E);
      dh_prev += deh.tail(S);

      Eigen::VectorXd dr_pre =
          dr.cwiseProduct(r).cwiseProduct(Eigen::VectorXd::Ones(S) - r);
      g_wr.noalias() += dr_pre * eh.transpose();
      g_br.col(0) += dr_pre;
      deh = wr.transpose() * dr_pre;
      de += deh.head(E);
      dh_prev += deh.tail(S);

      g_tok.col(y) += de;
      dh.col(l - 1) += dh_prev;
    }
  }

  Eigen::VectorXd ds0 = n > 0 ? Eigen::VectorXd(dh.col(0)) : Eigen::VectorXd::Zero(S);
  if (d_value != 0.0) {
    ds0 += d_value * w_val.row(0).transpose();
    g_w_val.row(0) += d_value * tape.s0.transpose();
    g_b_val(0, 0) += d_value;
  }

  Eigen::VectorXd dpre =
      ds0.cwiseProduct(Eigen::VectorXd::Ones(S) - tape.s0.cwiseProduct(tape.s0));
  g_w_ctx.noalias() += dpre * tape.x.transpose();
  g_b_ctx.col(0) += dpre;
  g_mode.col(tape.mode) += dpre;

  Eigen::VectorXd dx = w_ctx.transpose() * dpre;
  for (int s = 0; s < cfg.window; ++s) {
    if (!tape.slot_present[static_cast<size_t>(s)]) continue;
    const Eigen::VectorXd dov =
        dx.segment(static_cast<long>(s) * cfg.obs_embed_dim, cfg.obs_embed_dim);
    const auto ov = tape.obs_vec.col(s);
    Eigen::VectorXd dopre = dov.cwiseProduct(
        Eigen::VectorXd::Ones(cfg.obs_embed_dim) - ov.cwiseProduct(ov));
    g_w_obs.noalias() += dopre * tape.obs_cellvec.col(s).transpose();
    g_b_obs.col(0) += dopre;
    Eigen::VectorXd dcv = w_obs.transpose() * dopre;
    for (int c = 0; c < cfg.obs_cells(); ++c) {
      const int cls = tape.cell_class[static_cast<size_t>(s) * cfg.obs_cells() + c];
      g_cell_embed.col(cls) +=
          dcv.segment(static_cast<long>(c) * cfg.cell_embed_dim, cfg.cell_embed_dim);
    }
  }
}

SeqTape value_forward(const PolicyNet& net, const PolicyContext& ctx) {
  SeqTape tape;
  tape.n_pos = 0;
  tape.mode = static_cast<int>(ctx.mode);
  CtxEncoding e;
  encode_ctx(net, ctx, e);
  tape.cell_class = std::move(e.cell_class);
  tape.obs_cellvec = std::move(e.obs_cellvec);
  tape.slot_present = std::move(e.slot_present);
  tape.obs_vec = std::move(e.obs_vec);
  tape.x = std::move(e.x);
  tape.s0 = std::move(e.s0);
  tape.value = e.value;
  const int S = net.config().state_width;
  tape.h.setZero(S, 1);
  tape.h.col(0) = tape.s0;
  tape.probs.setZero(tok::kVocabSize, 0);
  return tape;
}

SeqScore forward_logprobs(const PolicyNet& net, const PolicyContext& ctx,
                          std::span<const int> tokens) {
  const SeqTape tape = policy_forward(net, ctx, tokens);
  SeqScore score;
  score.logprobs = tape.logprobs;
  score.value = tape.value;
  score.dists.reserve(static_cast<size_t>(tape.n_pos));
  for (int l = 0; l < tape.n_pos; ++l) {
    score.dists.emplace_back(tape.probs.col(l));
  }
  return score;
}

}  // namespace enav
