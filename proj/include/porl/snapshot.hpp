// Agent snapshots: every component (actor, critic ensemble, targets,
// temperature, optimizer state) in one tensor file, plus 64 probe inputs with
// their outputs so a load can prove it reproduced the saved agent.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "porl/common.hpp"
#include "porl/mlp_io.hpp"
#include "porl/sac.hpp"
#include "porl/tensor_file.hpp"

namespace porl {

inline constexpr int kSnapshotProbeCount = 64;
inline constexpr const char* kSnapshotVersion = "1";

namespace detail {

template <class T>
void append_ensemble(TensorFile& tf, const std::string& comp, const std::vector<Mlp<T>>& nets) {
  require_shape(!nets.empty(), "snapshot: empty ensemble for component " + comp);
  {
    std::ostringstream arch;
    for (std::size_t i = 0; i < nets[0].layer_sizes.size(); ++i) {
      if (i) arch << " ";
      arch << nets[0].layer_sizes[i];
    }
    tf.set_meta("arch." + comp, arch.str());
  }
  {
    std::ostringstream ln;
    for (std::size_t i = 0; i < nets[0].layer_norm.size(); ++i) {
      if (i) ln << " ";
      ln << (nets[0].layer_norm[i] ? 1 : 0);
    }
    tf.set_meta("layernorm." + comp, ln.str());
  }
  tf.set_meta("count." + comp, std::to_string(nets.size()));
  for (std::size_t i = 0; i < nets.size(); ++i) {
    for_each_tensor(nets[i], [&](const std::string& name, const T* data, std::size_t n) {
      TensorEntry& e = tf.add(comp, "q" + std::to_string(i) + "/" + name, {n});
      for (std::size_t k = 0; k < n; ++k) e.data[k] = float(data[k]);
    });
  }
}

template <class T>
std::vector<Mlp<T>> read_ensemble(const TensorFile& tf, const std::string& comp) {
  const std::string* count = tf.meta_value("count." + comp);
  if (!count) throw IoError("snapshot missing ensemble count for component " + comp);
  const std::string* arch = tf.meta_value("arch." + comp);
  if (!arch) throw IoError("snapshot missing architecture for component " + comp);
  std::vector<int> sizes;
  {
    std::istringstream ls(*arch);
    int v;
    while (ls >> v) sizes.push_back(v);
  }
  if (sizes.size() < 2) throw IoError("bad architecture metadata for component " + comp);
  std::vector<int> ln_flags;
  if (const std::string* ln = tf.meta_value("layernorm." + comp)) {
    std::istringstream ls(*ln);
    int v;
    while (ls >> v) ln_flags.push_back(v);
  }
  bool use_ln = false;
  for (int f : ln_flags) use_ln = use_ln || f != 0;
  const int n = std::stoi(*count);
  if (n < 1) throw IoError("snapshot ensemble count must be positive for component " + comp);
  std::vector<Mlp<T>> nets;
  nets.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    Mlp<T> net = make_mlp<T>(sizes, use_ln);
    if (!ln_flags.empty()) {
      if (ln_flags.size() != net.layer_norm.size())
        throw IoError("layernorm metadata length mismatch for component " + comp);
      for (std::size_t k = 0; k < ln_flags.size(); ++k) {
        net.layer_norm[k] = ln_flags[k] != 0;
        if (net.layer_norm[k] && net.ln_gain[k].empty()) {
          net.ln_gain[k].assign(std::size_t(net.layer_sizes[k + 1]), T(1));
          net.ln_bias[k].assign(std::size_t(net.layer_sizes[k + 1]), T(0));
        }
      }
    }
    for_each_tensor(net, [&](const std::string& name, T* data, std::size_t sz) {
      const std::string full = "q" + std::to_string(i) + "/" + name;
      const TensorEntry* e = tf.find(comp, full);
      if (!e) throw IoError("snapshot missing tensor " + comp + "/" + full);
      if (e->numel() != sz)
        throw ShapeError("snapshot tensor " + comp + "/" + full + " has wrong size");
      for (std::size_t k = 0; k < sz; ++k) data[k] = T(e->data[k]);
    });
    nets.push_back(std::move(net));
  }
  return nets;
}

template <class T>
void append_adam(TensorFile& tf, const std::string& prefix, const AdamState<T>& st) {
  std::size_t total = 0;
  for (const auto& slot : st.m) total += slot.size();
  TensorEntry& m = tf.add("optimizer", prefix + "/adam_m", {total});
  TensorEntry& v = tf.add("optimizer", prefix + "/adam_v", {total});
  std::size_t at = 0;
  for (std::size_t s = 0; s < st.m.size(); ++s)
    for (std::size_t k = 0; k < st.m[s].size(); ++k, ++at) {
      m.data[at] = float(st.m[s][k]);
      v.data[at] = float(st.v[s][k]);
    }
  TensorEntry& step = tf.add("optimizer", prefix + "/adam_step", {1});
  step.data[0] = float(st.step);
}

template <class T>
void append_actor(TensorFile& tf, const GaussianActor<T>& actor) {
  append_mlp(tf, "actor", actor.trunk);
  const std::size_t adim = std::size_t(actor.action_dim);
  TensorEntry& c = tf.add("actor", "center", {adim});
  TensorEntry& h = tf.add("actor", "halfwidth", {adim});
  for (std::size_t d = 0; d < adim; ++d) {
    c.data[d] = float(actor.center[d]);
    h.data[d] = float(actor.halfwidth[d]);
  }
}

// Probe inputs come from a fixed internal stream so identical agents produce
// byte-identical snapshots: states ~ N(0,1), actions uniform within bounds.
template <class T>
std::pair<Mat<T>, Mat<T>> probe_inputs(const GaussianActor<T>& actor) {
  const int sdim = actor.trunk.input_dim();
  const int adim = actor.action_dim;
  RngStream probe(substream_seed(0x706f726cu, "snapshot-probe"));
  Mat<T> states(kSnapshotProbeCount, std::size_t(sdim));
  for (std::size_t i = 0; i < states.size(); ++i) states.data()[i] = T(probe.normal());
  Mat<T> actions(kSnapshotProbeCount, std::size_t(adim));
  for (std::size_t r = 0; r < actions.rows(); ++r)
    for (int d = 0; d < adim; ++d)
      actions(r, std::size_t(d)) = actor.center[std::size_t(d)] +
                                   actor.halfwidth[std::size_t(d)] *
                                       T(2.0 * probe.uniform01() - 1.0);
  return {std::move(states), std::move(actions)};
}

template <class T>
void put_probe(TensorFile& tf, const std::string& name, const Mat<T>& m) {
  TensorEntry& e = tf.add("probe", name, {m.rows(), m.cols()});
  for (std::size_t i = 0; i < m.size(); ++i) e.data[i] = float(m.data()[i]);
}

// Probe outputs are compared bit-for-bit when the in-memory scalar type is
// float (the on-disk precision); wider types tolerate the f32 round-trip.
template <class T>
constexpr double probe_tolerance() {
  return std::is_same_v<T, float> ? 0.0 : 1e-4;
}

inline Mat<float> probe_matrix(const TensorFile& tf, const std::string& name) {
  const TensorEntry* e = tf.find("probe", name);
  if (!e) throw IoError("snapshot missing probe tensor '" + name + "'");
  require_shape(e->dims.size() == 2, "snapshot probe tensor " + name + " must be 2-d");
  Mat<float> m(e->dims[0], e->dims[1]);
  for (std::size_t i = 0; i < e->data.size(); ++i) m.data()[i] = e->data[i];
  return m;
}

template <class T>
Mat<T> cast_matrix(const Mat<float>& src) {
  Mat<T> out(src.rows(), src.cols());
  for (std::size_t i = 0; i < src.size(); ++i) out.data()[i] = T(src.data()[i]);
  return out;
}

template <class T>
void check_probe(const std::string& component, const std::string& name, const Mat<T>& computed,
                 const Mat<float>& stored) {
  require_shape(computed.rows() == stored.rows() && computed.cols() == stored.cols(),
                "snapshot probe tensor " + name + " has wrong shape");
  const double tol = probe_tolerance<T>();
  for (std::size_t i = 0; i < computed.size(); ++i) {
    const double got = double(float(computed.data()[i]));
    const double want = double(stored.data()[i]);
    const bool ok = tol == 0.0 ? got == want
                               : std::abs(got - want) <= tol * std::max(1.0, std::abs(want));
    if (!ok)
      throw IoError("snapshot probe mismatch for component " + component + " (" + name +
                    ", entry " + std::to_string(i) + ")");
  }
}

}  // namespace detail

namespace detail {

inline TensorFile snapshot_shell(const std::string& env_name, std::int64_t step,
                                 const std::string& cfg_hash) {
  TensorFile tf;
  tf.kind = "snapshot";
  tf.set_meta("version", kSnapshotVersion);
  tf.set_meta("env", env_name);
  tf.set_meta("step", std::to_string(step));
  tf.set_meta("config_hash", cfg_hash);
  return tf;
}

}  // namespace detail

// Actor-only snapshot: enough to start policy-only fine-tuning or to drive
// rollouts, with probe coverage for the actor component alone.
template <class T>
TensorFile make_actor_snapshot(const GaussianActor<T>& actor, const std::string& env_name,
                               std::int64_t step, const std::string& cfg_hash) {
  TensorFile tf = detail::snapshot_shell(env_name, step, cfg_hash);
  detail::append_actor(tf, actor);
  auto [states, actions] = detail::probe_inputs(actor);
  (void)actions;
  detail::put_probe(tf, "states", states);
  const ActorSample<T> det = sample_actions(actor, states, ActMode::Deterministic, nullptr);
  detail::put_probe(tf, "actor_actions", det.actions);
  return tf;
}

template <class T>
TensorFile make_snapshot(const SacAgent<T>& agent, const std::string& env_name, std::int64_t step,
                         const std::string& cfg_hash) {
  TensorFile tf = detail::snapshot_shell(env_name, step, cfg_hash);
  detail::append_actor(tf, agent.actor);
  detail::append_ensemble(tf, "critic", agent.critics.online);
  detail::append_ensemble(tf, "target", agent.critics.target);
  {
    TensorEntry& la = tf.add("temperature", "log_alpha", {1});
    la.data[0] = float(agent.temperature.log_alpha);
    TensorEntry& te = tf.add("temperature", "target_entropy", {1});
    te.data[0] = float(agent.temperature.target_entropy);
  }
  detail::append_adam(tf, "actor", agent.actor_opt);
  for (std::size_t i = 0; i < agent.critic_opt.size(); ++i)
    detail::append_adam(tf, "q" + std::to_string(i), agent.critic_opt[i]);
  {
    TensorEntry& t = tf.add("optimizer", "temperature/adam", {3});
    t.data[0] = float(agent.temperature.opt.m);
    t.data[1] = float(agent.temperature.opt.v);
    t.data[2] = float(agent.temperature.opt.step);
  }

  auto [states, actions] = detail::probe_inputs(agent.actor);
  detail::put_probe(tf, "states", states);
  detail::put_probe(tf, "actions", actions);

  const ActorSample<T> det = sample_actions(agent.actor, states, ActMode::Deterministic, nullptr);
  detail::put_probe(tf, "actor_actions", det.actions);

  const Mat<T> xq = concat_state_action(states, actions);
  const std::size_t n = agent.critics.online.size();
  Mat<T> online_q(std::size_t(kSnapshotProbeCount), n);
  Mat<T> target_q(std::size_t(kSnapshotProbeCount), n);
  for (std::size_t i = 0; i < n; ++i) {
    const Mat<T> qo = forward(agent.critics.online[i], xq);
    const Mat<T> qt = forward(agent.critics.target[i], xq);
    for (std::size_t r = 0; r < qo.rows(); ++r) {
      online_q(r, i) = qo(r, 0);
      target_q(r, i) = qt(r, 0);
    }
  }
  detail::put_probe(tf, "critic_q", online_q);
  detail::put_probe(tf, "target_q", target_q);
  return tf;
}

inline void save_snapshot(const std::string& path, const TensorFile& tf) {
  if (tf.kind != "snapshot")
    throw UsageError("save_snapshot: tensor file has kind '" + tf.kind + "'");
  save_tensor_file(path, tf);
}

inline TensorFile load_snapshot_file(const std::string& path) {
  TensorFile tf = load_tensor_file(path);
  if (tf.kind != "snapshot")
    throw IoError(path + ": not a snapshot file (kind '" + tf.kind + "')");
  return tf;
}

// Standalone actor from any snapshot carrying the actor component, verified
// against the stored probe outputs.
template <class T>
GaussianActor<T> read_actor(const TensorFile& snap) {
  if (snap.kind != "snapshot")
    throw IoError("read_actor: tensor file has kind '" + snap.kind + "'");
  GaussianActor<T> a;
  a.trunk = read_mlp<T>(snap, "actor");
  const TensorEntry* c = snap.find("actor", "center");
  const TensorEntry* h = snap.find("actor", "halfwidth");
  if (!c || !h) throw IoError("snapshot missing actor action bounds");
  a.action_dim = int(c->numel());
  if (h->numel() != c->numel() || a.trunk.layer_sizes.back() != 2 * a.action_dim)
    throw ShapeError("snapshot actor head does not match its action bounds");
  a.center.resize(std::size_t(a.action_dim));
  a.halfwidth.resize(std::size_t(a.action_dim));
  for (std::size_t d = 0; d < a.center.size(); ++d) {
    a.center[d] = T(c->data[d]);
    a.halfwidth[d] = T(h->data[d]);
  }
  const Mat<T> states = detail::cast_matrix<T>(detail::probe_matrix(snap, "states"));
  const ActorSample<T> det = sample_actions(a, states, ActMode::Deterministic, nullptr);
  detail::check_probe("actor", "actor_actions", det.actions,
                      detail::probe_matrix(snap, "actor_actions"));
  return a;
}

// Standalone online critic ensemble from any snapshot carrying the critic
// component, verified against the stored probe outputs.
template <class T>
std::vector<Mlp<T>> read_critic(const TensorFile& snap) {
  if (snap.kind != "snapshot")
    throw IoError("read_critic: tensor file has kind '" + snap.kind + "'");
  std::vector<Mlp<T>> nets = detail::read_ensemble<T>(snap, "critic");
  const Mat<T> states = detail::cast_matrix<T>(detail::probe_matrix(snap, "states"));
  const Mat<T> actions = detail::cast_matrix<T>(detail::probe_matrix(snap, "actions"));
  const Mat<T> xq = concat_state_action(states, actions);
  Mat<T> online_q(states.rows(), nets.size());
  for (std::size_t i = 0; i < nets.size(); ++i) {
    const Mat<T> q = forward(nets[i], xq);
    for (std::size_t r = 0; r < q.rows(); ++r) online_q(r, i) = q(r, 0);
  }
  detail::check_probe("critic", "critic_q", online_q, detail::probe_matrix(snap, "critic_q"));
  return nets;
}

// Replaces exactly the named components ⊆ {actor, critic, temperature} and
// resets their optimizer state; everything else in the agent is untouched.
// Loaded components are verified against the snapshot's probe outputs.
template <class T>
void load_snapshot_components(SacAgent<T>& agent, const TensorFile& snap,
                              const std::vector<std::string>& components) {
  if (snap.kind != "snapshot")
    throw IoError("load_snapshot_components: tensor file has kind '" + snap.kind + "'");
  bool want_actor = false, want_critic = false, want_temperature = false;
  for (const auto& c : components) {
    if (c == "actor")
      want_actor = true;
    else if (c == "critic")
      want_critic = true;
    else if (c == "temperature")
      want_temperature = true;
    else
      throw ConfigError("load_snapshot_components: unknown component '" + c + "'");
  }

  if (want_actor) {
    Mlp<T> trunk = read_mlp<T>(snap, "actor");
    const int sd = agent.config.state_dim, ad = agent.config.action_dim;
    if (trunk.input_dim() != sd || trunk.layer_sizes.back() != 2 * ad)
      throw ShapeError("snapshot actor expects " + std::to_string(trunk.input_dim()) + "->" +
                       std::to_string(trunk.layer_sizes.back()) + ", agent needs " +
                       std::to_string(sd) + "->" + std::to_string(2 * ad));
    const TensorEntry* c = snap.find("actor", "center");
    const TensorEntry* h = snap.find("actor", "halfwidth");
    if (!c || !h) throw IoError("snapshot missing actor action bounds");
    require_shape(c->numel() == std::size_t(ad) && h->numel() == std::size_t(ad),
                  "snapshot actor action bounds have wrong size");
    for (int d = 0; d < ad; ++d)
      if (float(agent.actor.center[std::size_t(d)]) != c->data[std::size_t(d)] ||
          float(agent.actor.halfwidth[std::size_t(d)]) != h->data[std::size_t(d)])
        throw ConfigError("snapshot action bounds do not match the agent's environment");
    agent.actor.trunk = std::move(trunk);
    agent.actor_opt = make_adam_state(agent.actor.trunk, AdamConfig<T>{T(agent.config.actor_lr)});
    agent.actor_grads = make_gradients(agent.actor.trunk);
  }

  if (want_critic) {
    std::vector<Mlp<T>> online = detail::read_ensemble<T>(snap, "critic");
    std::vector<Mlp<T>> target = snap.has_component("target")
                                     ? detail::read_ensemble<T>(snap, "target")
                                     : online;
    const int in = agent.config.state_dim + agent.config.action_dim;
    for (const auto& q : online)
      if (q.input_dim() != in || q.layer_sizes.back() != 1)
        throw ShapeError("snapshot critic expects input " + std::to_string(q.input_dim()) +
                         ", agent needs " + std::to_string(in));
    if (target.size() != online.size())
      throw IoError("snapshot target ensemble size does not match critic ensemble");
    if (agent.config.reduce_mode == ReduceMode::MinSubsetK &&
        int(online.size()) < agent.config.reduce_subset)
      throw ConfigError("snapshot critic ensemble is smaller than reduce_subset");
    agent.critics.online = std::move(online);
    agent.critics.target = std::move(target);
    agent.config.ensemble_size = int(agent.critics.online.size());
    agent.critic_opt.clear();
    agent.critic_grads.clear();
    for (auto& q : agent.critics.online) {
      agent.critic_opt.push_back(make_adam_state(q, AdamConfig<T>{T(agent.config.critic_lr)}));
      agent.critic_grads.push_back(make_gradients(q));
    }
  }

  if (want_temperature) {
    const TensorEntry* la = snap.find("temperature", "log_alpha");
    const TensorEntry* te = snap.find("temperature", "target_entropy");
    if (!la || !te) throw IoError("snapshot missing temperature component");
    agent.temperature.log_alpha = T(la->data[0]);
    agent.temperature.target_entropy = T(te->data[0]);
    agent.temperature.opt = AdamScalar<T>{AdamConfig<T>{T(agent.config.temperature_lr)}};
  }

  if (want_actor) {
    const Mat<T> states = detail::cast_matrix<T>(detail::probe_matrix(snap, "states"));
    const ActorSample<T> det =
        sample_actions(agent.actor, states, ActMode::Deterministic, nullptr);
    detail::check_probe("actor", "actor_actions", det.actions,
                        detail::probe_matrix(snap, "actor_actions"));
  }
  if (want_critic) {
    const Mat<T> states = detail::cast_matrix<T>(detail::probe_matrix(snap, "states"));
    const Mat<T> actions = detail::cast_matrix<T>(detail::probe_matrix(snap, "actions"));
    const Mat<T> xq = concat_state_action(states, actions);
    const std::size_t n = agent.critics.online.size();
    Mat<T> online_q(states.rows(), n);
    Mat<T> target_q(states.rows(), n);
    for (std::size_t i = 0; i < n; ++i) {
      const Mat<T> qo = forward(agent.critics.online[i], xq);
      const Mat<T> qt = forward(agent.critics.target[i], xq);
      for (std::size_t r = 0; r < qo.rows(); ++r) {
        online_q(r, i) = qo(r, 0);
        target_q(r, i) = qt(r, 0);
      }
    }
    detail::check_probe("critic", "critic_q", online_q, detail::probe_matrix(snap, "critic_q"));
    detail::check_probe("critic", "target_q", target_q, detail::probe_matrix(snap, "target_q"));
  }
}

}  // namespace porl
