// Soft actor-critic with a tanh-squashed Gaussian actor, a Q-ensemble with
// Polyak-averaged targets, and auto-tuned temperature. Update rules are plain
// functions over SacAgent so the trainer can compose them in any schedule.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "porl/adam.hpp"
#include "porl/common.hpp"
#include "porl/mlp.hpp"
#include "porl/replay.hpp"
#include "porl/rng.hpp"

namespace porl {

enum class ActMode { Stochastic, Deterministic };
enum class ReduceMode { MinAll, MinSubsetK };

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
// Boundary actions are pulled just inside the squash image so atanh stays finite.
inline constexpr double kPreTanhClamp = 1.0 - 1e-6;

struct SacConfig {
  int state_dim = 0;
  int action_dim = 0;
  std::vector<double> action_low, action_high;

  std::vector<int> actor_hidden{256, 256};
  std::vector<int> critic_hidden{256, 256};
  bool actor_layer_norm = false;
  bool critic_layer_norm = true;
  double actor_init_scale = 1e-2;
  double critic_init_scale = 1e-2;

  int ensemble_size = 10;
  ReduceMode reduce_mode = ReduceMode::MinSubsetK;
  int reduce_subset = 2;

  double discount = 0.99;
  double tau = 0.005;
  double actor_lr = 1e-4;
  double critic_lr = 3e-4;
  double temperature_lr = 1e-4;
  double init_log_alpha = 0.0;
  std::optional<double> target_entropy;  // default: -action_dim
};

inline void validate_sac_config(const SacConfig& c) {
  if (c.state_dim <= 0 || c.action_dim <= 0)
    throw ConfigError("sac: state_dim and action_dim must be positive");
  if (int(c.action_low.size()) != c.action_dim || int(c.action_high.size()) != c.action_dim)
    throw ConfigError("sac: action bounds must match action_dim");
  for (int d = 0; d < c.action_dim; ++d)
    if (!(c.action_low[d] < c.action_high[d]))
      throw ConfigError("sac: action_low must be strictly below action_high");
  if (c.actor_hidden.empty() || c.critic_hidden.empty())
    throw ConfigError("sac: hidden layer lists must be non-empty");
  if (c.ensemble_size < 1) throw ConfigError("sac: ensemble_size must be at least 1");
  if (c.reduce_mode == ReduceMode::MinSubsetK &&
      (c.reduce_subset < 1 || c.reduce_subset > c.ensemble_size))
    throw ConfigError("sac: reduce_subset must be within [1, ensemble_size]");
  if (!(c.discount >= 0.0 && c.discount <= 1.0))
    throw ConfigError("sac: discount must be within [0, 1]");
  if (!(c.tau > 0.0 && c.tau <= 1.0)) throw ConfigError("sac: tau must be within (0, 1]");
  if (!(c.actor_lr > 0.0 && c.critic_lr > 0.0 && c.temperature_lr > 0.0))
    throw ConfigError("sac: learning rates must be positive");
}

// ---------------------------------------------------------------------------
// Actor

template <class T>
struct GaussianActor {
  Mlp<T> trunk;  // state -> [mean, raw log-std], 2 * action_dim outputs
  int action_dim = 0;
  std::vector<T> center, halfwidth;  // affine rescale of tanh output
};

template <class T>
GaussianActor<T> make_actor(const SacConfig& cfg, RngStream& stream) {
  GaussianActor<T> a;
  a.action_dim = cfg.action_dim;
  std::vector<int> sizes{cfg.state_dim};
  sizes.insert(sizes.end(), cfg.actor_hidden.begin(), cfg.actor_hidden.end());
  sizes.push_back(2 * cfg.action_dim);
  a.trunk = make_mlp<T>(std::move(sizes), cfg.actor_layer_norm);
  init_mlp(a.trunk, stream, cfg.actor_init_scale);
  a.center.resize(cfg.action_dim);
  a.halfwidth.resize(cfg.action_dim);
  for (int d = 0; d < cfg.action_dim; ++d) {
    a.center[d] = T(0.5 * (cfg.action_high[d] + cfg.action_low[d]));
    a.halfwidth[d] = T(0.5 * (cfg.action_high[d] - cfg.action_low[d]));
  }
  return a;
}

// log(1 - tanh(u)^2) without catastrophic cancellation at large |u|.
template <class T>
inline T log_one_minus_tanh_sq(T u) {
  const T au = std::abs(u);
  return T(2) * (T(0.693147180559945309417L) - au - std::log1p(std::exp(T(-2) * au)));
}

template <class T>
struct ActorSample {
  Mat<T> mean, log_std;  // clamped log-std
  Mat<T> noise;          // reparameterization draw; zero in deterministic mode
  Mat<T> pre_tanh;       // mean + sigma * noise
  Mat<T> tanh_u;
  Mat<T> actions;            // center + halfwidth * tanh_u
  std::vector<T> log_prob;   // per row, includes the squash change of variables
  ForwardCache<T> cache;     // trunk cache; acts.back() holds the raw head output
};

inline constexpr double kHalfLog2Pi = 0.918938533204672741780329736406;

// Draws (or, in deterministic mode, squashes the mean of) one action per row.
// Noise consumption order is row-major: row 0 dims 0..A-1, then row 1, ...
// In deterministic mode log_prob is the log-density of the returned action.
template <class T>
ActorSample<T> sample_actions(const GaussianActor<T>& actor, const Mat<T>& states,
                              ActMode mode, RngStream* stream) {
  if (mode == ActMode::Stochastic && stream == nullptr)
    throw UsageError("sample_actions: stochastic mode needs a stream");
  ActorSample<T> s;
  const Mat<T> out = forward(actor.trunk, states, &s.cache);
  if (!all_finite(out.data(), out.size()))
    throw NumericError("actor: non-finite trunk output");
  const std::size_t b = states.rows();
  const int adim = actor.action_dim;
  s.mean = Mat<T>(b, adim);
  s.log_std = Mat<T>(b, adim);
  s.noise = Mat<T>(b, adim);
  s.pre_tanh = Mat<T>(b, adim);
  s.tanh_u = Mat<T>(b, adim);
  s.actions = Mat<T>(b, adim);
  s.log_prob.assign(b, T(0));
  for (std::size_t r = 0; r < b; ++r) {
    T lp = 0;
    for (int d = 0; d < adim; ++d) {
      const T mu = out(r, d);
      const T ls = std::clamp(out(r, adim + d), T(kLogStdMin), T(kLogStdMax));
      const T sigma = std::exp(ls);
      const T xi = mode == ActMode::Stochastic ? T(stream->normal()) : T(0);
      const T u = mu + sigma * xi;
      const T t = std::tanh(u);
      s.mean(r, d) = mu;
      s.log_std(r, d) = ls;
      s.noise(r, d) = xi;
      s.pre_tanh(r, d) = u;
      s.tanh_u(r, d) = t;
      s.actions(r, d) = actor.center[d] + actor.halfwidth[d] * t;
      lp += -T(kHalfLog2Pi) - ls - T(0.5) * xi * xi - std::log(actor.halfwidth[d]) -
            log_one_minus_tanh_sq(u);
    }
    s.log_prob[r] = lp;
  }
  return s;
}

// log pi(a|s) for externally supplied actions (behavior cloning, evaluation).
template <class T>
std::vector<T> action_log_prob(const GaussianActor<T>& actor, const Mat<T>& states,
                               const Mat<T>& actions) {
  require_shape(states.rows() == actions.rows() && int(actions.cols()) == actor.action_dim,
                "action_log_prob: state/action batch mismatch");
  const Mat<T> out = forward(actor.trunk, states);
  if (!all_finite(out.data(), out.size()))
    throw NumericError("actor: non-finite trunk output");
  const int adim = actor.action_dim;
  std::vector<T> lp(states.rows(), T(0));
  for (std::size_t r = 0; r < states.rows(); ++r) {
    for (int d = 0; d < adim; ++d) {
      const T mu = out(r, d);
      const T ls = std::clamp(out(r, adim + d), T(kLogStdMin), T(kLogStdMax));
      const T sigma = std::exp(ls);
      const T z = std::clamp((actions(r, d) - actor.center[d]) / actor.halfwidth[d],
                             T(-kPreTanhClamp), T(kPreTanhClamp));
      const T u = std::atanh(z);
      const T xi = (u - mu) / sigma;
      lp[r] += -T(kHalfLog2Pi) - ls - T(0.5) * xi * xi - std::log(actor.halfwidth[d]) -
               log_one_minus_tanh_sq(u);
    }
  }
  return lp;
}

template <class T>
struct ActResult {
  std::vector<T> action;
  T log_prob = 0;
};

template <class T>
ActResult<T> act(const GaussianActor<T>& actor, const std::vector<T>& state, ActMode mode,
                 RngStream& stream) {
  require_shape(int(state.size()) == actor.trunk.input_dim(),
                "act: state dimension mismatch");
  Mat<T> s(1, state.size());
  std::copy(state.begin(), state.end(), s.row(0));
  ActorSample<T> smp = sample_actions(actor, s, mode, &stream);
  ActResult<T> r;
  r.action.assign(smp.actions.row(0), smp.actions.row(0) + actor.action_dim);
  r.log_prob = smp.log_prob[0];
  return r;
}

// ---------------------------------------------------------------------------
// Critic ensemble

template <class T>
struct CriticEnsemble {
  std::vector<Mlp<T>> online, target;
  T tau = T(0.005);
};

template <class T>
CriticEnsemble<T> make_critics(const SacConfig& cfg, RngStream& stream) {
  CriticEnsemble<T> c;
  c.tau = T(cfg.tau);
  std::vector<int> sizes{cfg.state_dim + cfg.action_dim};
  sizes.insert(sizes.end(), cfg.critic_hidden.begin(), cfg.critic_hidden.end());
  sizes.push_back(1);
  for (int j = 0; j < cfg.ensemble_size; ++j) {
    Mlp<T> q = make_mlp<T>(sizes, cfg.critic_layer_norm);
    init_mlp(q, stream, cfg.critic_init_scale);
    c.target.push_back(q);
    c.online.push_back(std::move(q));
  }
  return c;
}

template <class T>
Mat<T> concat_state_action(const Mat<T>& states, const Mat<T>& actions) {
  require_shape(states.rows() == actions.rows(),
                "concat_state_action: row count mismatch");
  Mat<T> x(states.rows(), states.cols() + actions.cols());
  for (std::size_t r = 0; r < states.rows(); ++r) {
    T* xr = x.row(r);
    std::copy(states.row(r), states.row(r) + states.cols(), xr);
    std::copy(actions.row(r), actions.row(r) + actions.cols(), xr + states.cols());
  }
  return x;
}

template <class T>
void polyak_update(Mlp<T>& target, const Mlp<T>& online, T tau) {
  std::vector<std::pair<T*, std::size_t>> ts;
  for_each_tensor(target, [&](const std::string&, T* p, std::size_t n) { ts.push_back({p, n}); });
  std::vector<std::pair<const T*, std::size_t>> os;
  for_each_tensor(online, [&](const std::string&, const T* p, std::size_t n) { os.push_back({p, n}); });
  require_shape(ts.size() == os.size(), "polyak: tensor count mismatch");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    require_shape(ts[i].second == os[i].second, "polyak: tensor shape mismatch");
    T* t = ts[i].first;
    const T* o = os[i].first;
    for (std::size_t k = 0; k < ts[i].second; ++k) t[k] = (T(1) - tau) * t[k] + tau * o[k];
  }
}

// ---------------------------------------------------------------------------
// Ensemble reduction

// Uniform k-subset of {0..n-1} by partial Fisher-Yates; order is incidental.
inline std::vector<int> sample_index_subset(int n, int k, RngStream& stream) {
  if (n < 1) throw ConfigError("sample_index_subset: n must be positive");
  if (k < 1 || k > n) throw ConfigError("sample_index_subset: k must be within [1, n]");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + int(stream.uniform_int(std::uint64_t(n - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

template <class T>
T ensemble_reduce(const std::vector<T>& values, ReduceMode mode, int k, RngStream& stream) {
  if (values.empty()) throw ShapeError("ensemble_reduce: empty value list");
  if (mode == ReduceMode::MinAll) return *std::min_element(values.begin(), values.end());
  const std::vector<int> pick = sample_index_subset(int(values.size()), k, stream);
  T m = values[std::size_t(pick[0])];
  for (std::size_t i = 1; i < pick.size(); ++i) m = std::min(m, values[std::size_t(pick[i])]);
  return m;
}

// ---------------------------------------------------------------------------
// Temperature

template <class T>
struct Temperature {
  T log_alpha = 0;
  T target_entropy = 0;
  AdamScalar<T> opt;

  T alpha() const { return std::exp(log_alpha); }
};

// ---------------------------------------------------------------------------
// Agent

template <class T>
struct SacAgent {
  SacConfig config;
  GaussianActor<T> actor;
  CriticEnsemble<T> critics;
  Temperature<T> temperature;
  AdamState<T> actor_opt;
  std::vector<AdamState<T>> critic_opt;
  Gradients<T> actor_grads;
  std::vector<Gradients<T>> critic_grads;

  int ensemble_size() const { return int(critics.online.size()); }
};

// Consumes the stream in a fixed order: actor init first, then each critic.
template <class T>
SacAgent<T> make_sac_agent(const SacConfig& cfg, RngStream& stream) {
  validate_sac_config(cfg);
  SacAgent<T> a;
  a.config = cfg;
  a.actor = make_actor<T>(cfg, stream);
  a.critics = make_critics<T>(cfg, stream);
  a.temperature.log_alpha = T(cfg.init_log_alpha);
  a.temperature.target_entropy =
      T(cfg.target_entropy ? *cfg.target_entropy : -double(cfg.action_dim));
  a.temperature.opt.cfg.learning_rate = T(cfg.temperature_lr);
  a.actor_opt = make_adam_state(a.actor.trunk, AdamConfig<T>{T(cfg.actor_lr)});
  a.actor_grads = make_gradients(a.actor.trunk);
  for (auto& q : a.critics.online) {
    a.critic_opt.push_back(make_adam_state(q, AdamConfig<T>{T(cfg.critic_lr)}));
    a.critic_grads.push_back(make_gradients(q));
  }
  return a;
}

// ---------------------------------------------------------------------------
// Updates

template <class T>
struct TdStats {
  T loss = 0;    // MSE against the shared target, averaged over the ensemble
  T q_mean = 0;  // online ensemble Q statistics on the batch, pre-update
  T q_std = 0;
};

// One TD step: every online critic regresses to the shared entropy-regularized
// target, one Adam step each, then Polyak target updates. Stream order: next-
// action noise (row-major), then one subset draw per row when reducing by
// min-subset-k.
template <class T>
TdStats<T> td_update(SacAgent<T>& agent, const Batch<T>& batch, RngStream& stream) {
  const std::size_t b = batch.size();
  if (b == 0) throw UsageError("td_update: empty batch");
  const int n = agent.ensemble_size();

  const ActorSample<T> next = sample_actions(agent.actor, batch.next_states,
                                             ActMode::Stochastic, &stream);
  const Mat<T> xnext = concat_state_action(batch.next_states, next.actions);
  Mat<T> qs(b, n);
  for (int j = 0; j < n; ++j) {
    const Mat<T> q = forward(agent.critics.target[std::size_t(j)], xnext);
    for (std::size_t r = 0; r < b; ++r) qs(r, j) = q(r, 0);
  }

  const T alpha = agent.temperature.alpha();
  const T gamma = T(agent.config.discount);
  std::vector<T> y(b), vals(n);
  for (std::size_t r = 0; r < b; ++r) {
    std::copy(qs.row(r), qs.row(r) + n, vals.begin());
    const T reduced = ensemble_reduce(vals, agent.config.reduce_mode,
                                      agent.config.reduce_subset, stream);
    y[r] = batch.rewards[r] +
           gamma * (T(1) - batch.dones[r]) * (reduced - alpha * next.log_prob[r]);
  }
  if (!all_finite(y.data(), y.size())) throw NumericError("td_update: non-finite target");

  const Mat<T> xq = concat_state_action(batch.states, batch.actions);
  TdStats<T> stats;
  T qsum = 0, qsumsq = 0;
  ForwardCache<T> cache;
  for (int j = 0; j < n; ++j) {
    Mlp<T>& critic = agent.critics.online[std::size_t(j)];
    const Mat<T> q = forward(critic, xq, &cache);
    Mat<T> dy(b, 1);
    T mse = 0;
    for (std::size_t r = 0; r < b; ++r) {
      const T diff = q(r, 0) - y[r];
      mse += diff * diff;
      dy(r, 0) = T(2) * diff / T(b);
      qsum += q(r, 0);
      qsumsq += q(r, 0) * q(r, 0);
    }
    stats.loss += mse / T(b);
    zero_gradients(agent.critic_grads[std::size_t(j)]);
    backward(critic, cache, dy, &agent.critic_grads[std::size_t(j)]);
    adam_step(critic, agent.critic_grads[std::size_t(j)], agent.critic_opt[std::size_t(j)]);
  }
  stats.loss /= T(n);
  const T count = T(n) * T(b);
  stats.q_mean = qsum / count;
  stats.q_std = std::sqrt(std::max(T(0), qsumsq / count - stats.q_mean * stats.q_mean));

  for (int j = 0; j < n; ++j)
    polyak_update(agent.critics.target[std::size_t(j)], agent.critics.online[std::size_t(j)],
                  agent.critics.tau);
  return stats;
}

// Objective (maximized): beta * E[log pi(a|s)] over bc_source
//                      + (1-beta) * E[reduce_j Q_j(s, a~) - alpha * log pi(a~|s)].
// Accumulates d(objective)/d(actor params) into grads and returns the value.
// Terms with zero coefficient are skipped entirely, so beta=0 consumes no
// bc_source data and beta=1 consumes no stream draws.
template <class T>
T policy_gradient(SacAgent<T>& agent, const Batch<T>& batch, std::type_identity_t<T> beta,
                  const Batch<std::type_identity_t<T>>* bc_source, RngStream& stream,
                  Gradients<T>& grads) {
  if (!(beta >= T(0) && beta <= T(1)))
    throw ConfigError("policy_update: beta must be within [0, 1]");
  if (beta > T(0) && bc_source == nullptr)
    throw UsageError("policy_update: bc_source required when beta > 0");
  if (batch.size() == 0) throw UsageError("policy_update: empty batch");
  if (bc_source != nullptr && bc_source->size() == 0)
    throw UsageError("policy_update: empty bc_source");

  GaussianActor<T>& actor = agent.actor;
  const int adim = actor.action_dim;
  T objective = 0;

  if (beta < T(1)) {
    const std::size_t b = batch.size();
    const int n = agent.ensemble_size();
    ActorSample<T> smp = sample_actions(actor, batch.states, ActMode::Stochastic, &stream);
    const Mat<T> xin = concat_state_action(batch.states, smp.actions);
    std::vector<ForwardCache<T>> caches;
    caches.resize(std::size_t(n));
    Mat<T> qs(b, n);
    for (int j = 0; j < n; ++j) {
      const Mat<T> q = forward(agent.critics.online[std::size_t(j)], xin, &caches[std::size_t(j)]);
      for (std::size_t r = 0; r < b; ++r) qs(r, j) = q(r, 0);
    }
    if (!all_finite(qs.data(), qs.size()))
      throw NumericError("policy_update: non-finite critic output");

    std::vector<int> argmin(b, 0);
    const T alpha = agent.temperature.alpha();
    T value = 0;
    for (std::size_t r = 0; r < b; ++r) {
      int best;
      if (agent.config.reduce_mode == ReduceMode::MinAll) {
        best = 0;
        for (int j = 1; j < n; ++j)
          if (qs(r, j) < qs(r, best)) best = j;
      } else {
        const std::vector<int> pick =
            sample_index_subset(n, agent.config.reduce_subset, stream);
        best = pick[0];
        for (std::size_t i = 1; i < pick.size(); ++i)
          if (qs(r, std::size_t(pick[i])) < qs(r, std::size_t(best))) best = pick[i];
      }
      argmin[r] = best;
      value += qs(r, std::size_t(best)) - alpha * smp.log_prob[r];
    }
    value /= T(b);
    objective += (T(1) - beta) * value;

    // dQ/da via the argmin critic of each row
    const T w = (T(1) - beta) / T(b);
    Mat<T> da(b, adim);
    Mat<T> dy(b, 1), dx;
    for (int j = 0; j < n; ++j) {
      bool any = false;
      for (std::size_t r = 0; r < b; ++r) {
        dy(r, 0) = argmin[r] == j ? w : T(0);
        any = any || argmin[r] == j;
      }
      if (!any) continue;
      backward(agent.critics.online[std::size_t(j)], caches[std::size_t(j)], dy,
               static_cast<Gradients<T>*>(nullptr), &dx, /*accumulate_params=*/false);
      for (std::size_t r = 0; r < b; ++r)
        if (argmin[r] == j)
          for (int d = 0; d < adim; ++d) da(r, d) += dx(r, std::size_t(agent.config.state_dim + d));
    }

    // through the squash into the trunk head; the entropy term adds the
    // reparameterized dlogpi/dmean = 2 tanh(u), dlogpi/dlogstd = -1 + 2 tanh(u) sigma xi
    const Mat<T>& raw = smp.cache.acts.back();
    Mat<T> dtrunk(b, 2 * std::size_t(adim));
    const T ga = -(T(1) - beta) * alpha / T(b);  // d objective / d log_prob per row
    for (std::size_t r = 0; r < b; ++r) {
      for (int d = 0; d < adim; ++d) {
        const T t = smp.tanh_u(r, d);
        const T sigma = std::exp(smp.log_std(r, d));
        const T xi = smp.noise(r, d);
        const T dadu = actor.halfwidth[std::size_t(d)] * (T(1) - t * t);
        T dmu = da(r, d) * dadu + ga * T(2) * t;
        T ds = da(r, d) * dadu * sigma * xi + ga * (T(-1) + T(2) * t * sigma * xi);
        const T rawls = raw(r, std::size_t(adim + d));
        if (rawls <= T(kLogStdMin) || rawls >= T(kLogStdMax)) ds = T(0);
        dtrunk(r, d) = dmu;
        dtrunk(r, std::size_t(adim + d)) = ds;
      }
    }
    backward(actor.trunk, smp.cache, dtrunk, &grads);
  }

  if (beta > T(0)) {
    const std::size_t bb = bc_source->size();
    ForwardCache<T> cache;
    const Mat<T> out = forward(actor.trunk, bc_source->states, &cache);
    if (!all_finite(out.data(), out.size()))
      throw NumericError("actor: non-finite trunk output");
    Mat<T> dtrunk(bb, 2 * std::size_t(adim));
    const T wb = beta / T(bb);
    T value = 0;
    for (std::size_t r = 0; r < bb; ++r) {
      for (int d = 0; d < adim; ++d) {
        const T mu = out(r, d);
        const T rawls = out(r, std::size_t(adim + d));
        const T ls = std::clamp(rawls, T(kLogStdMin), T(kLogStdMax));
        const T sigma = std::exp(ls);
        const T z = std::clamp((bc_source->actions(r, d) - actor.center[std::size_t(d)]) /
                                   actor.halfwidth[std::size_t(d)],
                               T(-kPreTanhClamp), T(kPreTanhClamp));
        const T u = std::atanh(z);
        const T xi = (u - mu) / sigma;
        value += -T(kHalfLog2Pi) - ls - T(0.5) * xi * xi -
                 std::log(actor.halfwidth[std::size_t(d)]) - log_one_minus_tanh_sq(u);
        dtrunk(r, d) = wb * xi / sigma;
        T ds = wb * (T(-1) + xi * xi);
        if (rawls <= T(kLogStdMin) || rawls >= T(kLogStdMax)) ds = T(0);
        dtrunk(r, std::size_t(adim + d)) = ds;
      }
    }
    objective += beta * value / T(bb);
    backward(actor.trunk, cache, dtrunk, &grads);
  }

  return objective;
}

template <class T>
void scale_gradients(Gradients<T>& g, const Mlp<T>& net, T factor) {
  for_each_tensor(g, net, [&](const std::string&, T* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] *= factor;
  });
}

// Gradient-ascent step on the BC-SAC objective; returns the objective value.
template <class T>
T policy_update(SacAgent<T>& agent, const Batch<T>& batch, std::type_identity_t<T> beta,
                const Batch<std::type_identity_t<T>>* bc_source, RngStream& stream) {
  zero_gradients(agent.actor_grads);
  const T objective = policy_gradient(agent, batch, beta, bc_source, stream, agent.actor_grads);
  scale_gradients(agent.actor_grads, agent.actor.trunk, T(-1));  // Adam minimizes
  adam_step(agent.actor.trunk, agent.actor_grads, agent.actor_opt);
  return objective;
}

// Minimizes E[-alpha * (log pi(a~|s) + target_entropy)] over log-alpha.
// Returns the loss, whose value equals its own log-alpha gradient.
template <class T>
T temperature_update(SacAgent<T>& agent, const Batch<T>& batch, RngStream& stream) {
  if (batch.size() == 0) throw UsageError("temperature_update: empty batch");
  const ActorSample<T> smp =
      sample_actions(agent.actor, batch.states, ActMode::Stochastic, &stream);
  T mean_lp = 0;
  for (const T lp : smp.log_prob) mean_lp += lp;
  mean_lp /= T(batch.size());
  const T alpha = agent.temperature.alpha();
  const T loss = -alpha * (mean_lp + agent.temperature.target_entropy);
  agent.temperature.opt.update(agent.temperature.log_alpha, loss);
  return loss;
}

template <class T>
ActResult<T> act(const SacAgent<T>& agent, const std::vector<T>& state, ActMode mode,
                 RngStream& stream) {
  return act(agent.actor, state, mode, stream);
}

}  // namespace porl
