// Columnar demonstration datasets: transition columns plus provenance
// (generator, noise level, episode count, success rate). Stored in the shared
// manifest+payload container, kind "dataset".
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "porl/common.hpp"
#include "porl/env.hpp"
#include "porl/replay.hpp"
#include "porl/tensor_file.hpp"

namespace porl {

// Absolute slack allowed before an action counts as out of bounds; anything
// inside it is treated as a rounding artifact and clipped by consumers.
inline constexpr double kActionBoundsTol = 1e-6;

template <class T>
struct DemoDataset {
  std::string env;
  std::string generator = "scripted-expert";  // scripted-expert | agent-snapshot
  double noise_sigma = 0.0;
  std::int64_t episodes = 0;
  double success_rate = 0.0;

  Mat<T> states, actions, next_states;
  std::vector<T> rewards, dones;

  std::size_t size() const { return states.rows(); }
};

struct EpisodeRecount {
  std::int64_t episodes = 0;
  std::int64_t successes = 0;
};

// Episodes are delimited by terminal flags or by hitting the env horizon; a
// success is an episode that ended on a terminal transition. The stored
// success_rate must match this recount, which is how provenance stays honest
// without a separate boundary column.
template <class T>
EpisodeRecount recount_episodes(const DemoDataset<T>& ds, int horizon) {
  require_shape(horizon >= 1, "recount_episodes: horizon must be positive");
  EpisodeRecount r;
  int len = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    len += 1;
    const bool terminal = ds.dones[i] != T(0);
    if (terminal || len == horizon) {
      r.episodes += 1;
      if (terminal) r.successes += 1;
      len = 0;
    }
  }
  if (len != 0) throw IoError("dataset ends mid-episode");
  return r;
}

template <class T>
void validate_dataset(const DemoDataset<T>& ds) {
  if (ds.generator != "scripted-expert" && ds.generator != "agent-snapshot")
    throw ConfigError("dataset generator must be scripted-expert or agent-snapshot, got '" +
                      ds.generator + "'");
  const auto env = make_env<T>(ds.env);
  const EnvSpec& spec = env->spec();
  const std::size_t n = ds.size();
  require_shape(ds.states.cols() == std::size_t(spec.state_dim) || n == 0,
                "dataset states have wrong dimension for env " + ds.env);
  require_shape(ds.actions.rows() == n && ds.next_states.rows() == n && ds.rewards.size() == n &&
                    ds.dones.size() == n,
                "dataset columns disagree on row count");
  if (n > 0) {
    require_shape(ds.actions.cols() == std::size_t(spec.action_dim),
                  "dataset actions have wrong dimension for env " + ds.env);
    require_shape(ds.next_states.cols() == std::size_t(spec.state_dim),
                  "dataset next_states have wrong dimension for env " + ds.env);
    for (std::size_t r = 0; r < n; ++r)
      for (int d = 0; d < spec.action_dim; ++d) {
        const double a = double(ds.actions(r, std::size_t(d)));
        if (a < spec.action_low[std::size_t(d)] - kActionBoundsTol ||
            a > spec.action_high[std::size_t(d)] + kActionBoundsTol)
          throw IoError("dataset action outside env bounds (row " + std::to_string(r) + ", dim " +
                        std::to_string(d) + ")");
      }
  }
  const EpisodeRecount r = recount_episodes(ds, spec.max_episode_steps);
  if (r.episodes != ds.episodes)
    throw IoError("dataset episode count " + std::to_string(ds.episodes) +
                  " does not match recount " + std::to_string(r.episodes));
  const double recounted =
      r.episodes == 0 ? 0.0 : double(r.successes) / double(r.episodes);
  if (!(std::abs(recounted - ds.success_rate) <= 1e-12))
    throw IoError("dataset success_rate does not match episode recount");
}

inline std::string format_meta_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
void save_demo_dataset(const std::string& path, const DemoDataset<T>& ds) {
  validate_dataset(ds);
  TensorFile tf;
  tf.kind = "dataset";
  tf.set_meta("env", ds.env);
  tf.set_meta("generator", ds.generator);
  tf.set_meta("noise_sigma", format_meta_double(ds.noise_sigma));
  tf.set_meta("episodes", std::to_string(ds.episodes));
  tf.set_meta("success_rate", format_meta_double(ds.success_rate));
  const std::size_t n = ds.size();
  auto put_mat = [&](const std::string& name, const Mat<T>& m) {
    TensorEntry& e = tf.add("data", name, {n, m.cols()});
    for (std::size_t i = 0; i < m.size(); ++i) e.data[i] = float(m.data()[i]);
  };
  auto put_vec = [&](const std::string& name, const std::vector<T>& v) {
    TensorEntry& e = tf.add("data", name, {n});
    for (std::size_t i = 0; i < n; ++i) e.data[i] = float(v[i]);
  };
  put_mat("states", ds.states);
  put_mat("actions", ds.actions);
  put_vec("rewards", ds.rewards);
  put_mat("next_states", ds.next_states);
  put_vec("dones", ds.dones);
  save_tensor_file(path, tf);
}

template <class T>
DemoDataset<T> load_demo_dataset(const std::string& path) {
  const TensorFile tf = load_tensor_file(path);
  if (tf.kind != "dataset") throw IoError(path + ": not a dataset file (kind '" + tf.kind + "')");
  DemoDataset<T> ds;
  auto meta = [&](const std::string& key) -> const std::string& {
    const std::string* v = tf.meta_value(key);
    if (!v) throw IoError(path + ": dataset missing metadata key '" + key + "'");
    return *v;
  };
  ds.env = meta("env");
  ds.generator = meta("generator");
  ds.noise_sigma = std::stod(meta("noise_sigma"));
  ds.episodes = std::stoll(meta("episodes"));
  ds.success_rate = std::stod(meta("success_rate"));
  auto tensor = [&](const std::string& name) -> const TensorEntry& {
    const TensorEntry* e = tf.find("data", name);
    if (!e) throw IoError(path + ": dataset missing column '" + name + "'");
    return *e;
  };
  auto get_mat = [&](const std::string& name) {
    const TensorEntry& e = tensor(name);
    require_shape(e.dims.size() == 2, "dataset column " + name + " must be 2-d");
    Mat<T> m(e.dims[0], e.dims[1]);
    for (std::size_t i = 0; i < e.data.size(); ++i) m.data()[i] = T(e.data[i]);
    return m;
  };
  auto get_vec = [&](const std::string& name) {
    const TensorEntry& e = tensor(name);
    require_shape(e.dims.size() == 1, "dataset column " + name + " must be 1-d");
    std::vector<T> v(e.data.size());
    for (std::size_t i = 0; i < e.data.size(); ++i) v[i] = T(e.data[i]);
    return v;
  };
  ds.states = get_mat("states");
  ds.actions = get_mat("actions");
  ds.rewards = get_vec("rewards");
  ds.next_states = get_mat("next_states");
  ds.dones = get_vec("dones");
  validate_dataset(ds);
  return ds;
}

template <class T>
void push_dataset(ReplayBuffer<T>& buffer, const DemoDataset<T>& ds) {
  Transition<T> t;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    t.state.assign(ds.states.row(i), ds.states.row(i) + ds.states.cols());
    t.action.assign(ds.actions.row(i), ds.actions.row(i) + ds.actions.cols());
    t.next_state.assign(ds.next_states.row(i), ds.next_states.row(i) + ds.next_states.cols());
    t.reward = ds.rewards[i];
    t.done = ds.dones[i] != T(0);
    buffer.push(t);
  }
}

}  // namespace porl
