// The fine-tuning driver: epsilon-greedy pre-sample stage to warm a fresh
// critic ensemble against a frozen pre-trained actor, then the high-UTD SAC
// loop (M TD updates per env step, one actor step on their union). Baselines
// reuse the same loop with different initialization.
#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "porl/config.hpp"
#include "porl/dataset.hpp"
#include "porl/env.hpp"
#include "porl/log.hpp"
#include "porl/replay.hpp"
#include "porl/sac.hpp"
#include "porl/snapshot.hpp"

namespace porl {

enum class TrainMode { Porl, SacScratch, RandomCritic, SymmetricOffline };

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "porl") return TrainMode::Porl;
  if (s == "sac-scratch") return TrainMode::SacScratch;
  if (s == "random-critic") return TrainMode::RandomCritic;
  if (s == "symmetric-offline") return TrainMode::SymmetricOffline;
  throw ConfigError("mode: unknown training mode '" + s + "'");
}

inline std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::Porl: return "porl";
    case TrainMode::SacScratch: return "sac-scratch";
    case TrainMode::RandomCritic: return "random-critic";
    case TrainMode::SymmetricOffline: return "symmetric-offline";
  }
  throw UsageError("to_string: bad TrainMode");
}

struct Counters {
  std::int64_t env_steps = 0;
  std::int64_t critic_updates = 0;       // td_update invocations
  std::int64_t actor_updates = 0;        // policy gradient steps
  std::int64_t temperature_updates = 0;
  std::int64_t episodes = 0;             // episodes finished during training
  std::int64_t random_actions = 0;       // epsilon branch taken (pre-sample)
  std::int64_t policy_actions = 0;
};

// ---------------------------------------------------------------------------
// Deterministic evaluation

struct EvalStats {
  double return_mean = 0;
  double success_rate = 0;  // fraction of episodes that hit a terminal state
};

inline int eval_thread_cap() {
  if (const char* s = std::getenv("PORL_THREADS")) {
    const long v = std::strtol(s, nullptr, 10);
    if (v >= 1) return int(std::min<long>(v, 256));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

// Each episode gets its own named substream and slot, so the result is
// bit-identical no matter how many workers PORL_THREADS allows.
template <class T>
EvalStats evaluate_policy(const GaussianActor<T>& actor, const std::string& env_name,
                          int episodes, std::uint64_t seed, std::int64_t step) {
  require_shape(episodes >= 1, "evaluate_policy: episodes must be positive");
  std::vector<double> returns(std::size_t(episodes), 0.0);
  std::vector<double> success(std::size_t(episodes), 0.0);
  const std::string tag = "eval/" + std::to_string(step) + "/";
  auto run_range = [&](int begin, int stride) {
    const auto env = make_env<T>(env_name);
    for (int e = begin; e < episodes; e += stride) {
      RngStream stream = substream(seed, tag + std::to_string(e));
      std::vector<T> state = env->reset(stream);
      double ret = 0;
      bool reached = false;
      while (true) {
        const ActResult<T> a = act(actor, state, ActMode::Deterministic, stream);
        const StepResult<T> r = env->step(a.action);
        ret += double(r.reward);
        reached = reached || r.terminated;
        if (r.terminated || r.truncated) break;
        state = r.next_state;
      }
      returns[std::size_t(e)] = ret;
      success[std::size_t(e)] = reached ? 1.0 : 0.0;
    }
  };
  const int workers = std::min(episodes, eval_thread_cap());
  if (workers <= 1) {
    run_range(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(run_range, w, workers);
    for (auto& t : pool) t.join();
  }
  EvalStats out;
  for (int e = 0; e < episodes; ++e) {
    out.return_mean += returns[std::size_t(e)];
    out.success_rate += success[std::size_t(e)];
  }
  out.return_mean /= episodes;
  out.success_rate /= episodes;
  return out;
}

// ---------------------------------------------------------------------------
// Collection

template <class T>
struct CollectResult {
  Transition<T> transition;
  bool episode_end = false;   // terminated or truncated; caller must reset
  bool random_branch = false;
};

// One epsilon-greedy interaction. Stream order: the branch coin, then either
// action_dim uniforms (random branch) or the policy's sampling draws — a
// deterministic exploit consumes nothing beyond the coin.
template <class T>
CollectResult<T> epsilon_greedy_collect(const GaussianActor<T>& actor, Env<T>& env,
                                        const std::vector<T>& state, double epsilon,
                                        RngStream& stream,
                                        ActMode exploit = ActMode::Stochastic) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw ConfigError("epsilon_greedy_collect: epsilon must be within [0, 1]");
  const EnvSpec& spec = env.spec();
  CollectResult<T> out;
  out.random_branch = stream.uniform01() < epsilon;
  std::vector<T> action(std::size_t(spec.action_dim));
  if (out.random_branch) {
    for (int d = 0; d < spec.action_dim; ++d)
      action[std::size_t(d)] = T(stream.uniform(spec.action_low[std::size_t(d)],
                                                spec.action_high[std::size_t(d)]));
  } else {
    action = act(actor, state, exploit, stream).action;
  }
  const StepResult<T> r = env.step(action);
  out.transition.state = state;
  out.transition.action = std::move(action);
  out.transition.reward = r.reward;
  out.transition.next_state = r.next_state;
  out.transition.done = r.terminated;
  out.episode_end = r.terminated || r.truncated;
  return out;
}

// ---------------------------------------------------------------------------
// Train state

template <class T>
struct TrainState {
  RunConfig cfg;
  TrainMode mode = TrainMode::Porl;
  std::unique_ptr<Env<T>> env;
  SacAgent<T> agent;
  ReplayBuffer<T> replay;
  std::unique_ptr<ReplayBuffer<T>> offline;
  Counters counters;
  TrainLog log;

  std::vector<T> state;
  std::int64_t env_step = 0;
  RngStream reset_stream, interact_stream, td_stream, actor_stream, temperature_stream;
  std::chrono::steady_clock::time_point started;

  // accumulators between evaluation records
  double acc_loss = 0, acc_q_mean = 0, acc_q_std = 0;
  std::int64_t acc_td = 0;
  double acc_obj = 0;
  std::int64_t acc_actor = 0;

  bool symmetric_batches() const { return offline != nullptr; }
};

template <class T>
TrainState<T> make_train_state(const RunConfig& cfg) {
  validate_run_config(cfg);
  const TrainMode mode = parse_train_mode(cfg.mode);
  auto env = make_env<T>(cfg.env);
  const SacConfig sac_cfg = to_sac_config(cfg, env->spec());
  RngStream init = substream(cfg.seed, "init");
  SacAgent<T> agent = make_sac_agent<T>(sac_cfg, init);

  const bool load_actor = mode == TrainMode::Porl || mode == TrainMode::RandomCritic;
  if (load_actor)
    load_snapshot_components(agent, load_snapshot_file(cfg.actor_snapshot), {"actor"});
  if (!cfg.critic_snapshot.empty())
    load_snapshot_components(agent, load_snapshot_file(cfg.critic_snapshot), {"critic"});

  TrainState<T> st{cfg,
                   mode,
                   std::move(env),
                   std::move(agent),
                   ReplayBuffer<T>(sac_cfg.state_dim, sac_cfg.action_dim, cfg.replay_capacity,
                                   substream(cfg.seed, "replay")),
                   nullptr,
                   Counters{},
                   TrainLog{},
                   {},
                   0,
                   substream(cfg.seed, "reset"),
                   substream(cfg.seed, "interact"),
                   substream(cfg.seed, "td"),
                   substream(cfg.seed, "actor"),
                   substream(cfg.seed, "temperature"),
                   std::chrono::steady_clock::now()};

  if (!cfg.offline_dataset.empty()) {
    const DemoDataset<T> ds = load_demo_dataset<T>(cfg.offline_dataset);
    if (ds.env != cfg.env)
      throw ConfigError("offline_dataset: recorded on env '" + ds.env + "', run targets '" +
                        cfg.env + "'");
    const bool separate = cfg.retain_offline || mode == TrainMode::SymmetricOffline;
    if (separate) {
      if (ds.size() == 0) throw ConfigError("offline_dataset: dataset is empty");
      st.offline = std::make_unique<ReplayBuffer<T>>(sac_cfg.state_dim, sac_cfg.action_dim,
                                                     std::max<std::size_t>(ds.size(), 1),
                                                     substream(cfg.seed, "replay-offline"));
      push_dataset(*st.offline, ds);
    } else {
      push_dataset(st.replay, ds);  // plain preload into the shared buffer
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// Updates shared by both stages

namespace detail {

template <class T>
Batch<T> draw_critic_batch(TrainState<T>& st) {
  if (st.symmetric_batches())
    return sample_symmetric(st.replay, *st.offline, st.cfg.batch_size);
  return st.replay.sample_batch(st.cfg.batch_size);
}

template <class T>
Batch<T> draw_bc_batch(TrainState<T>& st) {
  if (st.cfg.bc_mode == "latest-window")
    return st.replay.sample_batch_from(st.replay.latest_window(st.cfg.bc_window),
                                       st.cfg.batch_size);
  return st.replay.sample_batch(st.cfg.batch_size);
}

// M TD updates on fresh batches; optionally one policy step on their union
// (or one per batch in per-batch mode) and one temperature step on the union.
template <class T>
void run_updates(TrainState<T>& st, bool with_actor) {
  std::vector<Batch<T>> batches;
  batches.reserve(std::size_t(st.cfg.utd));
  for (int i = 0; i < st.cfg.utd; ++i) {
    Batch<T> b = draw_critic_batch(st);
    const TdStats<T> stats = td_update(st.agent, b, st.td_stream);
    st.counters.critic_updates += 1;
    st.acc_loss += double(stats.loss);
    st.acc_q_mean += double(stats.q_mean);
    st.acc_q_std += double(stats.q_std);
    st.acc_td += 1;
    batches.push_back(std::move(b));
  }
  const bool need_union =
      (with_actor && st.cfg.actor_step_mode == "union") || st.cfg.tune_temperature;
  Batch<T> united;
  if (need_union) united = concat_batches(batches);

  if (with_actor) {
    const T beta = T(st.cfg.beta);
    const bool use_bc = st.cfg.beta > 0.0;
    if (st.cfg.actor_step_mode == "union") {
      Batch<T> bc;
      if (use_bc) bc = draw_bc_batch(st);
      const T obj = policy_update(st.agent, united, beta, use_bc ? &bc : nullptr,
                                  st.actor_stream);
      st.counters.actor_updates += 1;
      st.acc_obj += double(obj);
      st.acc_actor += 1;
    } else {
      for (const Batch<T>& b : batches) {
        Batch<T> bc;
        if (use_bc) bc = draw_bc_batch(st);
        const T obj = policy_update(st.agent, b, beta, use_bc ? &bc : nullptr, st.actor_stream);
        st.counters.actor_updates += 1;
        st.acc_obj += double(obj);
        st.acc_actor += 1;
      }
    }
  }
  if (st.cfg.tune_temperature) {
    temperature_update(st.agent, united, st.temperature_stream);
    st.counters.temperature_updates += 1;
  }
}

template <class T>
void run_updates_at_step(TrainState<T>& st, bool with_actor) {
  try {
    run_updates(st, with_actor);
  } catch (const NumericError& e) {
    throw NumericError("env step " + std::to_string(st.env_step) + ": " + e.what());
  }
}

template <class T>
void record_eval(TrainState<T>& st) {
  TrainRecord r;
  r.env_step = st.env_step;
  const EvalStats ev = evaluate_policy(st.agent.actor, st.cfg.env, st.cfg.eval_episodes,
                                       st.cfg.seed, st.env_step);
  r.eval_return_mean = ev.return_mean;
  r.eval_success_rate = ev.success_rate;
  r.critic_loss = st.acc_td ? st.acc_loss / double(st.acc_td) : 0.0;
  r.q_mean = st.acc_td ? st.acc_q_mean / double(st.acc_td) : 0.0;
  r.q_std = st.acc_td ? st.acc_q_std / double(st.acc_td) : 0.0;
  r.actor_obj = st.acc_actor ? st.acc_obj / double(st.acc_actor) : 0.0;
  r.alpha = double(st.agent.temperature.alpha());
  r.wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - st.started).count();
  st.log.append(r);
  st.acc_loss = st.acc_q_mean = st.acc_q_std = st.acc_obj = 0;
  st.acc_td = st.acc_actor = 0;
}

template <class T>
void finish_episode_bookkeeping(TrainState<T>& st, bool episode_end,
                                const std::vector<T>& next_state) {
  if (episode_end) {
    st.counters.episodes += 1;
    st.state = st.env->reset(st.reset_stream);
  } else {
    st.state = next_state;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages

// Steps 1..T: epsilon-greedy collection against the frozen actor, M TD
// updates per step. The actor is never touched here, and nothing is logged —
// the log covers the online phase only.
template <class T>
void pre_sample_stage(TrainState<T>& st) {
  const std::int64_t T_steps = st.cfg.pre_sample_steps;
  if (T_steps == 0) return;
  if (st.state.empty()) st.state = st.env->reset(st.reset_stream);
  const ActMode exploit = st.cfg.exploit_mode == "deterministic" ? ActMode::Deterministic
                                                                 : ActMode::Stochastic;
  for (std::int64_t k = 0; k < T_steps; ++k) {
    CollectResult<T> col =
        epsilon_greedy_collect(st.agent.actor, *st.env, st.state, st.cfg.epsilon,
                               st.interact_stream, exploit);
    st.replay.push(col.transition);
    st.env_step += 1;
    st.counters.env_steps += 1;
    (col.random_branch ? st.counters.random_actions : st.counters.policy_actions) += 1;
    detail::run_updates_at_step(st, /*with_actor=*/false);
    detail::finish_episode_bookkeeping(st, col.episode_end, col.transition.next_state);
  }
}

// Steps T+1..N: stochastic interaction (no epsilon mixing), M TD updates on M
// fresh batches, one policy step on their union, one temperature step; a
// deterministic evaluation every eval_interval steps and at the final step.
template <class T>
void online_finetune(TrainState<T>& st) {
  if (st.state.empty() && st.env_step < st.cfg.max_env_steps)
    st.state = st.env->reset(st.reset_stream);
  while (st.env_step < st.cfg.max_env_steps) {
    const ActResult<T> a = act(st.agent.actor, st.state, ActMode::Stochastic,
                               st.interact_stream);
    const StepResult<T> r = st.env->step(a.action);
    Transition<T> t;
    t.state = st.state;
    t.action = a.action;
    t.reward = r.reward;
    t.next_state = r.next_state;
    t.done = r.terminated;
    st.replay.push(t);
    st.env_step += 1;
    st.counters.env_steps += 1;
    st.counters.policy_actions += 1;
    detail::run_updates_at_step(st, /*with_actor=*/true);
    detail::finish_episode_bookkeeping(st, r.terminated || r.truncated, r.next_state);
    if (st.env_step % st.cfg.eval_interval == 0 || st.env_step == st.cfg.max_env_steps)
      detail::record_eval(st);
  }
}

// ---------------------------------------------------------------------------
// Whole runs

struct RunArtifacts {
  TrainLog log;
  Counters counters;
  TensorFile final_snapshot;
};

template <class T = float>
RunArtifacts run_train(const RunConfig& cfg) {
  TrainState<T> st = make_train_state<T>(cfg);
  if (st.mode == TrainMode::Porl) pre_sample_stage(st);
  online_finetune(st);
  RunArtifacts out;
  out.final_snapshot = make_snapshot(st.agent, cfg.env, st.env_step, config_hash(cfg));
  if (!cfg.out_snapshot.empty()) save_snapshot(cfg.out_snapshot, out.final_snapshot);
  out.log = std::move(st.log);
  out.counters = st.counters;
  return out;
}

template <class T = float>
RunArtifacts run_baseline(const RunConfig& cfg, TrainMode kind) {
  if (kind == TrainMode::Porl)
    throw UsageError("run_baseline: porl is the main algorithm, not a baseline");
  RunConfig c = cfg;
  c.mode = to_string(kind);
  return run_train<T>(c);
}

}  // namespace porl
