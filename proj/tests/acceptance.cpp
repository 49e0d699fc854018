// Acceptance suite: ten exact criteria plus six directional trend
// reproductions averaged over three master seeds. Prints one line per
// criterion.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "doctest.h"
#include "enav/eval.hpp"
#include "enav/rng.hpp"

using namespace enav;

namespace {

void report(int idx, bool pass, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", idx, what.c_str());
  std::fflush(stdout);
}

double mean(std::span<const double> xs) {
  double s = 0;
  for (const double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

// Small fixture net/world for the mechanical criteria.
TaskSetup small_setup(uint64_t seed) {
  TaskSetup s = default_task_setup();
  s.gen.width = 11;
  s.gen.height = 11;
  s.gen.rooms_min = 1;
  s.gen.rooms_max = 3;
  s.gen.object_density = 0.12;
  s.env_train.max_steps = 60;
  s.env_eval.max_steps = 60;
  s.feats = FeatureConfig{4, 8, 2};
  s.gate.max_trace_len = 6;
  s.window = 2;
  s.master_seed = seed;
  return s;
}

PolicyNet small_net(const TaskSetup& setup, uint64_t seed) {
  return PolicyNet(make_policy_config(setup, 24, 8, 12, 4), seed);
}

}  // namespace

TEST_CASE("criterion 1: action entropy closed forms") {
  bool pass = true;
  const std::vector<double> uniform(5, 0.2);
  pass &= std::abs(action_entropy(uniform).first - std::log(5.0)) <= 1e-9;
  const std::vector<double> onehot = {1, 0, 0, 0, 0};
  pass &= action_entropy(onehot).first == 0.0;
  const std::vector<double> half = {0.5, 0.5, 0, 0, 0};
  pass &= std::abs(action_entropy(half).first - std::log(2.0)) <= 1e-9;
  report(1, pass, "entropy math: uniform -> ln 5, one-hot -> 0, half-half -> ln 2");
  CHECK(pass);
}

TEST_CASE("criterion 2: SEL fixture evaluates to exactly one half") {
  auto rec = [](bool s, int w, int e) {
    EpisodeRecord r;
    r.success = s;
    r.shortest = w;
    r.steps = e;
    return r;
  };
  const std::vector<EpisodeRecord> rs = {rec(true, 10, 10), rec(true, 10, 20),
                                         rec(false, 5, 600)};
  const bool pass = sel(rs) == 0.5;
  report(2, pass, "SEL fixture [(1,10,10),(1,10,20),(0,5,600)] -> 0.5");
  CHECK(pass);
}

TEST_CASE("criterion 3: GAE matches brute force on 100 random fixtures") {
  double max_diff = 0.0;
  const double gamma = 0.99, lambda = 0.95;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    RolloutBuffer buf;
    const int n = 5;
    std::vector<double> rewards(n), values(n);
    for (int i = 0; i < n; ++i) {
      rewards[static_cast<size_t>(i)] = rng.next_gauss();
      values[static_cast<size_t>(i)] = rng.next_gauss();
      Transition t;
      t.reward = rewards[static_cast<size_t>(i)];
      t.value = values[static_cast<size_t>(i)];
      t.done = i == n - 1;
      buf.transitions.push_back(std::move(t));
    }
    compute_gae(buf, gamma, lambda, false);
    for (int t = 0; t < n; ++t) {
      double a = 0.0;
      for (int l = 0; t + l < n; ++l) {
        const double v_next = t + l + 1 < n ? values[static_cast<size_t>(t + l + 1)] : 0.0;
        const double delta = rewards[static_cast<size_t>(t + l)] + gamma * v_next -
                             values[static_cast<size_t>(t + l)];
        a += std::pow(gamma * lambda, l) * delta;
      }
      max_diff = std::max(max_diff, std::abs(buf.transitions[static_cast<size_t>(t)].advantage - a));
    }
  }
  const bool pass = max_diff <= 1e-10;
  report(3, pass, "GAE vs brute-force double loop, max abs diff " + std::to_string(max_diff));
  CHECK(pass);
}

TEST_CASE("criterion 4: analytic gradients match central finite differences") {
  const TaskSetup setup = small_setup(4);
  PolicyNet net = small_net(setup, 104);
  double max_rel_err = 0.0;

  // H-SFT loss slice.
  {
    HybridDataset ds = collect_expert_dataset(setup, 6);
    std::vector<size_t> pick = {0, 1};
    annotate_reasoning(ds, pick, 0.0, 8, 3);
    std::vector<const ExpertSample*> samples;
    for (const auto& s : ds.nrd) samples.push_back(&s);
    for (const auto& s : ds.rd) samples.push_back(&s);
    const double inv_b = 1.0 / static_cast<double>(samples.size());

    auto loss_fn = [&] {
      double nll = 0.0;
      for (const auto* s : samples) {
        for (const double lp : forward_logprobs(net, s->ctx, s->target_tokens).logprobs) {
          nll -= lp;
        }
      }
      return nll * inv_b;
    };
    std::vector<double> grad(net.param_count(), 0.0);
    for (const auto* s : samples) {
      const SeqTape tape = policy_forward(net, s->ctx, s->target_tokens);
      const std::vector<double> d_lp(tape.logprobs.size(), -inv_b);
      policy_backward(net, tape, d_lp, nullptr, 0.0, grad);
    }
    Rng rng(41);
    const double h = 1e-4;
    for (int trial = 0; trial < 64; ++trial) {
      const size_t i = rng.next_below(static_cast<uint32_t>(net.param_count()));
      const double orig = net.params()[i];
      net.params()[i] = orig + h;
      const double up = loss_fn();
      net.params()[i] = orig - h;
      const double dn = loss_fn();
      net.params()[i] = orig;
      const double fd = (up - dn) / (2.0 * h);
      if (std::abs(fd) < 1e-10 && std::abs(grad[i]) < 1e-10) continue;
      max_rel_err = std::max(max_rel_err, std::abs(fd - grad[i]) /
                                              std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
    }
  }

  // Stage-II PPO loss slice (clip + KL + value).
  {
    const PolicyNet ref = small_net(setup, 105);
    RolloutBuffer buf = collect_rollouts(net, setup, 2, 4, 1.0, 0, 7);
    compute_gae(buf, 0.99, 0.95, true);
    if (buf.transitions.size() > 6) buf.transitions.resize(6);
    std::vector<size_t> idx(buf.transitions.size());
    std::iota(idx.begin(), idx.end(), 0);
    PPOConfig cfg;
    cfg.beta = 0.1;

    std::vector<double> grad(net.param_count(), 0.0);
    ppo_minibatch_gradient(net, &ref, buf, idx, cfg, 2, &grad);
    Rng rng(42);
    const double h = 1e-4;
    for (int trial = 0; trial < 64; ++trial) {
      const size_t i = rng.next_below(static_cast<uint32_t>(net.param_count()));
      const double orig = net.params()[i];
      net.params()[i] = orig + h;
      const double up = ppo_minibatch_gradient(net, &ref, buf, idx, cfg, 2, nullptr).total(cfg);
      net.params()[i] = orig - h;
      const double dn = ppo_minibatch_gradient(net, &ref, buf, idx, cfg, 2, nullptr).total(cfg);
      net.params()[i] = orig;
      const double fd = (up - dn) / (2.0 * h);
      if (std::abs(fd) < 1e-10 && std::abs(grad[i]) < 1e-10) continue;
      max_rel_err = std::max(max_rel_err, std::abs(fd - grad[i]) /
                                              std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
    }
  }

  const bool pass = max_rel_err <= 1e-4;
  report(4, pass, "H-SFT and stage-II PPO gradient checks, max rel err " +
                      std::to_string(max_rel_err));
  CHECK(pass);
}

TEST_CASE("criterion 5: gating degeneracies under shared seeds") {
  const TaskSetup setup = small_setup(5);
  const PolicyNet net = small_net(setup, 205);
  bool pass = true;

  for (int e = 0; e < 50 && pass; ++e) {
    const GridHouse house = generate_house(train_house_seed(setup, static_cast<uint64_t>(e)), setup.gen);
    EpisodeOptions hybrid0;
    hybrid0.env = setup.env_train;
    hybrid0.gate = {Strategy::Hybrid, 0.0, 4, 6};
    hybrid0.temperature = 0.8;
    EpisodeOptions everyk = hybrid0;
    everyk.gate = {Strategy::EveryK, 0.6, 4, 6};
    const auto a = run_episode(net, house, hybrid0, static_cast<uint64_t>(e), setup.feats);
    const auto b = run_episode(net, house, everyk, static_cast<uint64_t>(e), setup.feats);
    pass &= a.steps == b.steps;
    for (int i = 0; pass && i < a.steps; ++i) {
      pass &= a.step_logs[static_cast<size_t>(i)].action == b.step_logs[static_cast<size_t>(i)].action;
      pass &= a.step_logs[static_cast<size_t>(i)].thought == b.step_logs[static_cast<size_t>(i)].thought;
    }

    EpisodeOptions hybrid_hi = hybrid0;
    hybrid_hi.gate = {Strategy::Hybrid, 1.0 + 1e-9, 4, 6};
    EpisodeOptions nothink = hybrid0;
    nothink.gate = {Strategy::NoThink, 0.6, 4, 6};
    const auto c = run_episode(net, house, hybrid_hi, static_cast<uint64_t>(e), setup.feats);
    const auto d = run_episode(net, house, nothink, static_cast<uint64_t>(e), setup.feats);
    pass &= c.steps == d.steps && c.thought_steps == 0;
    for (int i = 0; pass && i < c.steps; ++i) {
      pass &= c.step_logs[static_cast<size_t>(i)].action == d.step_logs[static_cast<size_t>(i)].action;
      pass &= c.step_logs[static_cast<size_t>(i)].pose_before == d.step_logs[static_cast<size_t>(i)].pose_before;
    }
  }
  report(5, pass, "Hybrid(tau=0,K) == EveryK(K) decisions; Hybrid(tau>1) == NoThink trajectories, 50 episodes");
  CHECK(pass);
}

TEST_CASE("criterion 6: NTW gap holds in a 200-episode hybrid run") {
  const TaskSetup setup = small_setup(6);
  const PolicyNet net = small_net(setup, 206);
  bool pass = true;
  int thought_total = 0;
  for (int e = 0; e < 200; ++e) {
    const GridHouse house = generate_house(train_house_seed(setup, static_cast<uint64_t>(e)), setup.gen);
    EpisodeOptions opts;
    opts.env = setup.env_train;
    opts.gate = {Strategy::Hybrid, 0.2, 5, 6};
    opts.temperature = 1.0;
    const auto rec = run_episode(net, house, opts, static_cast<uint64_t>(e), setup.feats);
    int last = -1000;
    for (const auto& s : rec.step_logs) {
      if (s.thought) {
        if (last >= 0 && s.clock - last < opts.gate.ntw) pass = false;
        last = s.clock;
        ++thought_total;
      }
    }
  }
  pass &= thought_total > 0;
  report(6, pass, "gap between consecutive thought steps >= K over 200 episodes (" +
                      std::to_string(thought_total) + " thoughts)");
  CHECK(pass);
}

TEST_CASE("criterion 7: stage-II masking leaves parameters bit-identical") {
  const TaskSetup setup = small_setup(7);
  PolicyNet net = small_net(setup, 207);
  RolloutBuffer buf = collect_rollouts(net, setup, 2, 6, 1.0, 0, 3);
  compute_gae(buf, 0.99, 0.95, true);
  for (auto& t : buf.transitions) {
    if (t.think) t.advantage = 0.0;
  }
  PPOConfig cfg;
  cfg.beta = 0.0;
  cfg.value_coef = 0.0;
  cfg.epochs = 2;
  const std::vector<double> before = net.params();
  AdamState adam(net.param_count());
  ppo_update(net, nullptr, buf, cfg, 2, adam, 9);
  const bool pass = net.params() == before;
  report(7, pass, "stage-II update with zeroed think advantages and beta=0 changes no parameter");
  CHECK(pass);
}

TEST_CASE("criterion 8: pass@k estimator closed forms and monotonicity") {
  bool pass = true;
  const std::vector<int> ks = {1, 2, 4, 8, 16};
  const std::vector<std::pair<int, int>> perfect = {{16, 16}};
  for (const double v : pass_at_k(perfect, ks)) pass &= v == 1.0;
  const std::vector<std::pair<int, int>> hopeless = {{16, 0}};
  for (const double v : pass_at_k(hopeless, ks)) pass &= v == 0.0;
  const std::vector<std::pair<int, int>> half = {{2, 1}};
  pass &= pass_at_k(half, std::vector<int>{1})[0] == 0.5;

  // Real sampled run: 16 stochastic attempts per task on a fixture net.
  const TaskSetup setup = small_setup(8);
  const PolicyNet net = small_net(setup, 208);
  std::vector<std::pair<int, int>> counts;
  for (int task = 0; task < 12; ++task) {
    const GridHouse house = generate_house(eval_house_seed(setup, static_cast<uint64_t>(task)), setup.gen);
    auto oracle = std::make_shared<NavOracle>(house, setup.env_eval);
    int succ = 0;
    for (int s = 0; s < 16; ++s) {
      EpisodeOptions opts;
      opts.env = setup.env_eval;
      opts.gate = {Strategy::Hybrid, 0.6, 5, 6};
      opts.temperature = 0.2;
      const auto rec = run_episode(net, house, opts,
                                   derive_seed(setup.master_seed, "passk",
                                               static_cast<uint64_t>(task * 16 + s)),
                                   setup.feats, oracle);
      if (rec.success) ++succ;
    }
    counts.emplace_back(16, succ);
  }
  const auto curve = pass_at_k(counts, ks);
  for (size_t i = 1; i < curve.size(); ++i) pass &= curve[i] >= curve[i - 1] - 1e-12;

  report(8, pass, "pass@k closed forms exact; sampled 16-attempt curve monotone in k");
  CHECK(pass);
}

TEST_CASE("criterion 9: reward decomposition audit over 10k steps") {
  bool pass = true;
  long steps = 0;
  Rng rng(99);
  uint64_t house_idx = 0;
  const GenParams gen;  // 16x16 defaults
  while (steps < 10000) {
    const GridHouse house = generate_house(house_idx++, gen);
    auto [state, obs] = reset(house, {});
    int best = state.dist_to_target;  // delta d tracks the closest-yet geodesic
    while (!state.done && steps < 10000) {
      const NavAction a = static_cast<NavAction>(rng.next_below(5));
      const StepOutcome out = step(state, a);
      const double expected = -0.01 + (out.success ? 10.0 : 0.0) +
                              std::max(0, best - out.geodesic_to_target);
      if (std::abs(out.reward - expected) > 1e-12) pass = false;
      best = std::min(best, out.geodesic_to_target);
      ++steps;
    }
  }
  report(9, pass, "10k logged rewards equal -0.01 + 10*success + max(0, delta d)");
  CHECK(pass);
}

TEST_CASE("criterion 10: expert optimality on 100 seeded houses") {
  bool pass = true;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const GridHouse house = generate_house(seed);
    const auto rec = run_expert_episode(house, {});
    pass &= rec.success && rec.steps == rec.shortest;
  }
  report(10, pass, "expert rollouts succeed in exactly shortest_episode_length steps");
  CHECK(pass);
}

// ---------------------------------------------------------------------------
// Directional criteria: the full pipeline on 16x16 houses, three master
// seeds, 200 held-out evaluation tasks.
// ---------------------------------------------------------------------------

namespace {

struct PipelineOutcome {
  double hsft_nothink_sr = 0.0;
  double frac_high_entropy = 0.0;
  std::vector<double> sweep_q;
  double stage1_nothink_sr = 0.0;
  double stage2_nothink_sr = 0.0;
  double stage2_nokl_nothink_sr = 0.0;
  double hybrid_sr = 0.0;
  double nothink_sr = 0.0;
  double dense_sr = 0.0;
  double everyk_sr = 0.0;
  double hybrid_tps = 0.0;
  double dense_tps = 0.0;
  double corrupt_sr = 0.0;
};

struct AcceptanceScale {
  int data_steps = 12000;
  int bootstrap_epochs = 1;
  int sft_epochs = 3;
  int sft_batch = 256;
  double sft_lr = 2e-3;
  int eval_tasks = 200;
  double eval_temperature = 0.2;
  int sweep_episodes = 60;
  int policy_width = 128;
};

TaskSetup full_setup(uint64_t master_seed) {
  TaskSetup s = default_task_setup();  // 16x16 gen defaults, 300/600 caps
  s.master_seed = master_seed;
  return s;
}

double eval_sr(const PolicyNet& net, const TaskSetup& setup, Strategy strategy,
               int tasks, double temperature,
               std::optional<CorruptionParams> corruption = {},
               double* tokens_per_step = nullptr) {
  EvalOptions opts;
  opts.gate = setup.gate;
  opts.gate.strategy = strategy;
  opts.temperature = temperature;
  opts.tasks = tasks;
  opts.corruption = corruption;
  const auto records = evaluate(net, setup, opts);
  if (tokens_per_step) {
    double tps = 0;
    for (const auto& r : records) tps += token_accounting(r).tokens_per_step;
    *tokens_per_step = records.empty() ? 0.0 : tps / static_cast<double>(records.size());
  }
  return records.empty() ? 0.0 : success_rate(records);
}

PipelineOutcome run_pipeline(uint64_t master_seed, const AcceptanceScale& scale) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  TaskSetup setup = full_setup(master_seed);
  const PolicyConfig pcfg = make_policy_config(setup, scale.policy_width);

  PipelineOutcome out;

  // Expert data + bootstrap filter + annotation.
  HybridDataset ds = collect_expert_dataset(setup, scale.data_steps);
  {
    PolicyNet filter_net(pcfg, derive_seed(master_seed, "bootstrap_init"));
    HybridDataset nrd_only;
    nrd_only.nrd = ds.nrd;
    hsft_train(filter_net, nrd_only, scale.bootstrap_epochs, scale.sft_batch,
               scale.sft_lr, derive_seed(master_seed, "bootstrap_sft"));
    const auto selected = entropy_filter(ds, filter_net, 0.2);
    annotate_reasoning(ds, selected, 0.1, 8, derive_seed(master_seed, "annotator"));
  }
  std::fprintf(stderr, "[seed %llu] dataset ready (%zu nrd, %zu rd) at %.1fs\n",
               static_cast<unsigned long long>(master_seed), ds.nrd.size(), ds.rd.size(),
               elapsed());

  // Hybrid SFT.
  PolicyNet hsft_net(pcfg, derive_seed(master_seed, "hsft_init"));
  hsft_train(hsft_net, ds, scale.sft_epochs, scale.sft_batch, scale.sft_lr,
             derive_seed(master_seed, "hsft"));
  std::fprintf(stderr, "[seed %llu] hsft done at %.1fs\n",
               static_cast<unsigned long long>(master_seed), elapsed());

  out.hsft_nothink_sr = eval_sr(hsft_net, setup, Strategy::NoThink, scale.eval_tasks,
                                scale.eval_temperature);

  // Entropy distribution of the SFT net (criterion 13).
  {
    const auto entropies =
        collect_nothink_entropies(hsft_net, setup, 50, scale.eval_temperature);
    out.frac_high_entropy = entropy_histogram(entropies).fraction_at_least(0.6);
  }

  // Q-value threshold sweep on the SFT net (criterion 12).
  {
    const std::vector<double> taus = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    const SweepResult sweep = q_threshold_sweep(hsft_net, setup, taus,
                                                scale.sweep_episodes, 0.99,
                                                setup.gate.ntw, scale.eval_temperature);
    out.sweep_q = sweep.mean_q;
  }
  std::fprintf(stderr, "[seed %llu] sft evals done at %.1fs\n",
               static_cast<unsigned long long>(master_seed), elapsed());

  // Two-stage RL.
  PPOConfig ppo;
  const StageResult s1 = train_stage(hsft_net, nullptr, 1, ppo, setup, "", 1u << 20);
  std::fprintf(stderr, "[seed %llu] stage I done at %.1fs (best SR %.3f)\n",
               static_cast<unsigned long long>(master_seed), elapsed(), s1.best_sr);
  const StageResult s2 = train_stage(s1.best_net, &s1.best_net, 2, ppo, setup, "", 2u << 20);
  std::fprintf(stderr, "[seed %llu] stage II done at %.1fs (best SR %.3f)\n",
               static_cast<unsigned long long>(master_seed), elapsed(), s2.best_sr);

  PPOConfig ppo_nokl = ppo;
  ppo_nokl.beta = 0.0;
  const StageResult s2_nokl =
      train_stage(s1.best_net, &s1.best_net, 2, ppo_nokl, setup, "", 2u << 20);
  std::fprintf(stderr, "[seed %llu] stage II (beta=0) done at %.1fs\n",
               static_cast<unsigned long long>(master_seed), elapsed());

  // Held-out evaluations.
  out.stage1_nothink_sr = eval_sr(s1.best_net, setup, Strategy::NoThink,
                                  scale.eval_tasks, scale.eval_temperature);
  out.stage2_nothink_sr = eval_sr(s2.best_net, setup, Strategy::NoThink,
                                  scale.eval_tasks, scale.eval_temperature);
  out.stage2_nokl_nothink_sr = eval_sr(s2_nokl.best_net, setup, Strategy::NoThink,
                                       scale.eval_tasks, scale.eval_temperature);
  out.nothink_sr = out.stage2_nothink_sr;
  out.hybrid_sr = eval_sr(s2.best_net, setup, Strategy::Hybrid, scale.eval_tasks,
                          scale.eval_temperature, {}, &out.hybrid_tps);
  out.dense_sr = eval_sr(s2.best_net, setup, Strategy::DenseThink, scale.eval_tasks,
                         scale.eval_temperature, {}, &out.dense_tps);
  out.everyk_sr = eval_sr(s2.best_net, setup, Strategy::EveryK, scale.eval_tasks,
                          scale.eval_temperature);
  out.corrupt_sr = eval_sr(s2.best_net, setup, Strategy::Hybrid, scale.eval_tasks,
                           scale.eval_temperature, CorruptionParams{0.3, 0.1});
  std::fprintf(stderr,
               "[seed %llu] evals done at %.1fs: hsft %.3f s1 %.3f s2nt %.3f "
               "hyb %.3f dense %.3f everyk %.3f corrupt %.3f nokl %.3f\n",
               static_cast<unsigned long long>(master_seed), elapsed(),
               out.hsft_nothink_sr, out.stage1_nothink_sr, out.stage2_nothink_sr,
               out.hybrid_sr, out.dense_sr, out.everyk_sr, out.corrupt_sr,
               out.stage2_nokl_nothink_sr);
  return out;
}

}  // namespace

TEST_CASE("criteria 11-16: directional trend reproductions over 3 master seeds") {
  const AcceptanceScale scale;
  const std::vector<uint64_t> seeds = {1, 2, 3};
  std::vector<PipelineOutcome> outs;
  for (const uint64_t seed : seeds) outs.push_back(run_pipeline(seed, scale));

  auto collect = [&](auto field) {
    std::vector<double> vals;
    for (const auto& o : outs) vals.push_back(field(o));
    return vals;
  };

  const double hsft_sr = mean(collect([](const auto& o) { return o.hsft_nothink_sr; }));
  const double s1_sr = mean(collect([](const auto& o) { return o.stage1_nothink_sr; }));
  const double s2_nt_sr = mean(collect([](const auto& o) { return o.stage2_nothink_sr; }));
  const double s2_nokl_sr =
      mean(collect([](const auto& o) { return o.stage2_nokl_nothink_sr; }));
  const double hybrid_sr = mean(collect([](const auto& o) { return o.hybrid_sr; }));
  const double dense_sr = mean(collect([](const auto& o) { return o.dense_sr; }));
  const double hybrid_tps = mean(collect([](const auto& o) { return o.hybrid_tps; }));
  const double dense_tps = mean(collect([](const auto& o) { return o.dense_tps; }));
  const double corrupt_sr = mean(collect([](const auto& o) { return o.corrupt_sr; }));
  const double frac_high = mean(collect([](const auto& o) { return o.frac_high_entropy; }));

  {
    char buf[256];
    const bool pass = hybrid_sr >= s2_nt_sr && hybrid_tps <= 0.5 * dense_tps;
    std::snprintf(buf, sizeof(buf),
                  "hybrid SR %.3f >= no-think SR %.3f and tokens/step %.2f <= 50%% of dense %.2f",
                  hybrid_sr, s2_nt_sr, hybrid_tps, dense_tps);
    report(11, pass, buf);
    CHECK(pass);
  }
  {
    std::vector<double> sweep_mean(outs[0].sweep_q.size(), 0.0);
    for (const auto& o : outs) {
      for (size_t i = 0; i < sweep_mean.size(); ++i) sweep_mean[i] += o.sweep_q[i];
    }
    for (auto& v : sweep_mean) v /= static_cast<double>(outs.size());
    size_t argmax = 0;
    for (size_t i = 1; i < sweep_mean.size(); ++i) {
      if (sweep_mean[i] > sweep_mean[argmax]) argmax = i;
    }
    const bool pass = argmax != 0 && argmax != sweep_mean.size() - 1;
    std::string detail = "seed-mean Q over tau {0,.2,.4,.6,.8,1}:";
    for (const double q : sweep_mean) detail += " " + std::to_string(q);
    report(12, pass, detail + " (argmax interior: " + (pass ? "yes" : "no") + ")");
    CHECK(pass);
  }
  {
    char buf[128];
    const bool pass = frac_high >= 0.10 && frac_high <= 0.50;
    std::snprintf(buf, sizeof(buf),
                  "fraction of no-think steps with normalized entropy >= 0.6: %.3f in [0.10, 0.50]",
                  frac_high);
    report(13, pass, buf);
    CHECK(pass);
  }
  {
    char buf[256];
    const double drop_kl = s1_sr - s2_nt_sr;
    const double drop_nokl = s1_sr - s2_nokl_sr;
    const bool pass = s2_nt_sr >= s1_sr - 0.05 && drop_nokl >= drop_kl;
    std::snprintf(buf, sizeof(buf),
                  "KL anchoring: stage-II no-think SR %.3f vs stage-I %.3f (drop %.3f); "
                  "beta=0 drop %.3f >= beta=0.1 drop",
                  s2_nt_sr, s1_sr, drop_kl, drop_nokl);
    report(14, pass, buf);
    CHECK(pass);
  }
  {
    char buf[128];
    const bool pass = s1_sr >= hsft_sr + 0.05;
    std::snprintf(buf, sizeof(buf),
                  "stage-I no-think SR %.3f exceeds H-SFT no-think SR %.3f by >= 5 points",
                  s1_sr, hsft_sr);
    report(15, pass, buf);
    CHECK(pass);
  }
  {
    char buf[192];
    const bool pass = corrupt_sr >= hybrid_sr - 0.15 && corrupt_sr >= dense_sr;
    std::snprintf(buf, sizeof(buf),
                  "corrupted map SR %.3f within 15 points of clean %.3f and >= dense baseline %.3f",
                  corrupt_sr, hybrid_sr, dense_sr);
    report(16, pass, buf);
    CHECK(pass);
  }
}
