// Behavior cloning: demonstration generation (scripted experts or saved
// agents) and Gaussian-NLL pretraining that emits actor-only snapshots.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "porl/common.hpp"
#include "porl/config.hpp"
#include "porl/dataset.hpp"
#include "porl/env.hpp"
#include "porl/expert.hpp"
#include "porl/sac.hpp"
#include "porl/snapshot.hpp"
#include "porl/train.hpp"

namespace porl {

// ---------------------------------------------------------------------------
// Demonstration sources

struct DemoSource {
  std::string kind = "scripted-expert";  // scripted-expert | agent-snapshot
  double noise_sigma = 0.0;              // per-dim Gaussian action noise, clamped to bounds
  std::string snapshot_path;             // agent-snapshot only
};

inline bool operator==(const DemoSource& a, const DemoSource& b) {
  return a.kind == b.kind && a.noise_sigma == b.noise_sigma && a.snapshot_path == b.snapshot_path;
}

inline void validate_demo_source(const DemoSource& s) {
  if (s.kind != "scripted-expert" && s.kind != "agent-snapshot")
    throw ConfigError("demo source: unknown kind '" + s.kind + "'");
  if (!(s.noise_sigma >= 0.0))
    throw ConfigError("demo source: noise_sigma must be non-negative");
  if (s.kind == "agent-snapshot" && s.snapshot_path.empty())
    throw ConfigError("demo source: agent-snapshot needs a snapshot path");
}

// Rolls out exactly `episodes` full episodes (to terminal or horizon) and
// packs them into a DemoDataset with recount-honest provenance. All draws
// (resets, action noise) come from `stream`, so the result is a pure function
// of (env, source, episodes, stream state).
template <class T = float>
DemoDataset<T> generate_demos(const std::string& env_name, const DemoSource& source,
                              std::int64_t episodes, RngStream& stream) {
  validate_demo_source(source);
  if (episodes < 0) throw ConfigError("generate_demos: episodes must be non-negative");
  auto env = make_env<T>(env_name);
  const EnvSpec spec = env->spec();

  std::optional<GaussianActor<T>> actor;
  if (source.kind == "agent-snapshot") {
    const TensorFile snap = load_snapshot_file(source.snapshot_path);
    actor = read_actor<T>(snap);
    if (actor->trunk.input_dim() != spec.state_dim || actor->action_dim != spec.action_dim)
      throw ConfigError("demo source: snapshot does not match environment '" + env_name + "'");
    for (int d = 0; d < spec.action_dim; ++d) {
      const std::size_t k = std::size_t(d);
      if (float(actor->center[k]) != float(T(0.5 * (spec.action_high[k] + spec.action_low[k]))) ||
          float(actor->halfwidth[k]) != float(T(0.5 * (spec.action_high[k] - spec.action_low[k]))))
        throw ConfigError("demo source: snapshot action bounds do not match environment '" +
                          env_name + "'");
    }
  } else {
    // Surfaces "no controller for this env" up front, before any rollout.
    (void)scripted_expert<T>(env_name, std::vector<T>(std::size_t(spec.state_dim), T(0)));
  }

  std::vector<T> S, A, R, S2, D;
  std::int64_t successes = 0;
  for (std::int64_t e = 0; e < episodes; ++e) {
    std::vector<T> state = env->reset(stream);
    bool success = false;
    while (true) {
      std::vector<T> action = actor ? act(*actor, state, ActMode::Deterministic, stream).action
                                    : scripted_expert<T>(env_name, state);
      if (source.noise_sigma > 0.0)
        action = with_action_noise(std::move(action), source.noise_sigma, stream, spec);
      const StepResult<T> sr = env->step(action);
      S.insert(S.end(), state.begin(), state.end());
      A.insert(A.end(), action.begin(), action.end());
      R.push_back(sr.reward);
      S2.insert(S2.end(), sr.next_state.begin(), sr.next_state.end());
      D.push_back(sr.terminated ? T(1) : T(0));
      if (sr.terminated) success = true;
      state = sr.next_state;
      if (sr.terminated || sr.truncated) break;
    }
    if (success) ++successes;
  }

  DemoDataset<T> ds;
  ds.env = env_name;
  ds.generator = source.kind;
  ds.noise_sigma = source.noise_sigma;
  ds.episodes = episodes;
  ds.success_rate = episodes == 0 ? 0.0 : double(successes) / double(episodes);
  const std::size_t n = R.size();
  ds.states = Mat<T>(n, std::size_t(spec.state_dim));
  ds.actions = Mat<T>(n, std::size_t(spec.action_dim));
  ds.next_states = Mat<T>(n, std::size_t(spec.state_dim));
  std::copy(S.begin(), S.end(), ds.states.data());
  std::copy(A.begin(), A.end(), ds.actions.data());
  std::copy(S2.begin(), S2.end(), ds.next_states.data());
  ds.rewards = std::move(R);
  ds.dones = std::move(D);
  validate_dataset(ds);
  return ds;
}

// ---------------------------------------------------------------------------
// Squash helpers

// Pre-squash coordinate of an in-bounds action. The normalized value is
// clipped to ±(1 - 1e-6) so boundary actions stay finite under atanh.
template <class T>
T inverse_squash(T a, T center, T halfwidth) {
  const T z = std::clamp((a - center) / halfwidth, T(-kPreTanhClamp), T(kPreTanhClamp));
  return std::atanh(z);
}

template <class T>
T squash(T u, T center, T halfwidth) {
  return center + halfwidth * std::tanh(u);
}

// ---------------------------------------------------------------------------
// Behavior cloning

// Desk-scale defaults: two epochs on the default 200-episode demo set leaves
// the cloned policy deliberately imperfect (headroom for fine-tuning to
// close); longer training saturates the point mazes.
struct BcConfig {
  std::int64_t epochs = 2;
  std::int64_t batch_size = 256;
  double learning_rate = 1e-3;
  double validation_fraction = 0.1;  // within [0, 0.5)
  std::string loss = "gaussian-nll";
};

struct ActorArch {
  std::vector<int> hidden{64, 64};
  bool layer_norm = false;
  double init_scale = 1e-2;
};

inline bool operator==(const BcConfig& a, const BcConfig& b) {
  return a.epochs == b.epochs && a.batch_size == b.batch_size &&
         a.learning_rate == b.learning_rate && a.validation_fraction == b.validation_fraction &&
         a.loss == b.loss;
}

inline bool operator==(const ActorArch& a, const ActorArch& b) {
  return a.hidden == b.hidden && a.layer_norm == b.layer_norm && a.init_scale == b.init_scale;
}

inline void validate_bc_config(const BcConfig& c) {
  if (c.epochs < 1) throw ConfigError("epochs: must be at least 1");
  if (c.batch_size < 1) throw ConfigError("batch_size: must be at least 1");
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate: must be positive");
  if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 0.5))
    throw ConfigError("validation_fraction: must be within [0, 0.5)");
  if (c.loss != "gaussian-nll") throw ConfigError("loss: unknown loss '" + c.loss + "'");
}

inline std::string canonical_bc_config(const BcConfig& c, const ActorArch& a) {
  std::ostringstream os;
  os << "bc.epochs=" << c.epochs << "\n";
  os << "bc.batch_size=" << c.batch_size << "\n";
  os << "bc.learning_rate=" << format_double(c.learning_rate) << "\n";
  os << "bc.validation_fraction=" << format_double(c.validation_fraction) << "\n";
  os << "bc.loss=" << c.loss << "\n";
  os << "bc.actor_hidden=";
  for (std::size_t i = 0; i < a.hidden.size(); ++i) os << (i ? "," : "") << a.hidden[i];
  os << "\n";
  os << "bc.actor_layer_norm=" << (a.layer_norm ? 1 : 0) << "\n";
  os << "bc.init_scale=" << format_double(a.init_scale) << "\n";
  return os.str();
}

struct BcReport {
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
  std::vector<double> train_nll;      // mean NLL per epoch over the training split
  double final_train_nll = 0.0;
  double final_validation_nll = 0.0;  // falls back to the train split when nothing is held out
  double eval_return_mean = 0.0;
  double eval_success_rate = 0.0;     // deterministic rollouts on the dataset's env
  int eval_episodes = 0;
  std::uint64_t eval_seed = 0;        // recorded so the evaluation can be replayed exactly
};

template <class T>
struct BcResult {
  GaussianActor<T> actor;
  TensorFile snapshot;  // actor-only
  BcReport report;
};

namespace detail {

template <class T>
Mat<T> take_rows(const Mat<T>& src, const std::vector<std::size_t>& idx, std::size_t lo,
                 std::size_t hi) {
  Mat<T> out(hi - lo, src.cols());
  for (std::size_t r = lo; r < hi; ++r)
    for (std::size_t c = 0; c < src.cols(); ++c) out(r - lo, c) = src(idx[r], c);
  return out;
}

inline void shuffle_indices(std::vector<std::size_t>& idx, RngStream& stream) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[std::size_t(stream.uniform_int(i))]);
}

// Mean (over rows) Gaussian NLL of pre-squash targets under the actor head,
// summed over action dims, with the sampler's log-std clamp applied.
template <class T>
double bc_mean_nll(const Mlp<T>& trunk, const Mat<T>& states, const Mat<T>& targets, int adim) {
  if (states.rows() == 0) return 0.0;
  const Mat<T> out = forward(trunk, states);
  double total = 0.0;
  for (std::size_t r = 0; r < states.rows(); ++r)
    for (int d = 0; d < adim; ++d) {
      const double ls =
          std::clamp(double(out(r, std::size_t(adim + d))), kLogStdMin, kLogStdMax);
      const double xi = (double(targets(r, std::size_t(d))) - double(out(r, std::size_t(d)))) /
                        std::exp(ls);
      total += ls + kHalfLog2Pi + 0.5 * xi * xi;
    }
  return total / double(states.rows());
}

// One batch of the BC objective: mean NLL and its exact parameter gradient.
template <class T>
double bc_loss_and_grad(const Mlp<T>& trunk, int adim, const Mat<T>& bx, const Mat<T>& bu,
                        Gradients<T>& grads) {
  ForwardCache<T> cache;
  const Mat<T> out = forward(trunk, bx, &cache);
  if (!all_finite(out.data(), out.size())) throw NumericError("bc: non-finite actor output");
  const std::size_t b = bx.rows();
  Mat<T> dout(b, std::size_t(2 * adim));
  const T inv_b = T(1) / T(b);
  double nll = 0.0;
  for (std::size_t r = 0; r < b; ++r)
    for (int d = 0; d < adim; ++d) {
      const T rawls = out(r, std::size_t(adim + d));
      const T ls = std::clamp(rawls, T(kLogStdMin), T(kLogStdMax));
      const T sigma = std::exp(ls);
      const T xi = (bu(r, std::size_t(d)) - out(r, std::size_t(d))) / sigma;
      nll += double(ls) + kHalfLog2Pi + 0.5 * double(xi) * double(xi);
      dout(r, std::size_t(d)) = -xi / sigma * inv_b;
      T dls = (T(1) - xi * xi) * inv_b;
      if (rawls <= T(kLogStdMin) || rawls >= T(kLogStdMax)) dls = T(0);
      dout(r, std::size_t(adim + d)) = dls;
    }
  zero_gradients(grads);
  backward(trunk, cache, dout, &grads);
  return nll / double(b);
}

}  // namespace detail

// Supervised pretraining: minimizes the Gaussian NLL of inverse-squashed
// dataset actions under the actor head (the squash jacobian is constant in
// the parameters, so this maximizes the squashed log-likelihood too). Stream
// draw order: trunk init, validation-split shuffle, one shuffle per epoch,
// one eval seed. Returns the trained actor, an actor-only snapshot, and a
// training report.
template <class T = float>
BcResult<T> train_bc(const DemoDataset<T>& ds, const ActorArch& arch, const BcConfig& cfg,
                     RngStream& stream, int eval_episodes = 50) {
  validate_bc_config(cfg);
  if (arch.hidden.empty()) throw ConfigError("actor_hidden: must be non-empty");
  if (eval_episodes < 0) throw ConfigError("eval_episodes: must be non-negative");
  if (ds.size() == 0) throw ConfigError("train_bc: dataset is empty");
  validate_dataset(ds);

  auto env = make_env<T>(ds.env);
  const EnvSpec spec = env->spec();

  SacConfig sc;
  sc.state_dim = spec.state_dim;
  sc.action_dim = spec.action_dim;
  sc.action_low = spec.action_low;
  sc.action_high = spec.action_high;
  sc.actor_hidden = arch.hidden;
  sc.actor_layer_norm = arch.layer_norm;
  sc.actor_init_scale = arch.init_scale;
  GaussianActor<T> actor = make_actor<T>(sc, stream);
  const int adim = spec.action_dim;

  const std::size_t n = ds.size();
  Mat<T> targets(n, std::size_t(adim));
  for (std::size_t r = 0; r < n; ++r)
    for (int d = 0; d < adim; ++d) {
      const std::size_t k = std::size_t(d);
      targets(r, k) = inverse_squash(ds.actions(r, k), actor.center[k], actor.halfwidth[k]);
    }

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  detail::shuffle_indices(idx, stream);
  const std::size_t n_val = std::size_t(double(n) * cfg.validation_fraction);
  const Mat<T> val_x = detail::take_rows(ds.states, idx, 0, n_val);
  const Mat<T> val_u = detail::take_rows(targets, idx, 0, n_val);
  Mat<T> train_x = detail::take_rows(ds.states, idx, n_val, n);
  Mat<T> train_u = detail::take_rows(targets, idx, n_val, n);
  const std::size_t n_train = n - n_val;

  AdamState<T> opt = make_adam_state(actor.trunk, AdamConfig<T>{T(cfg.learning_rate)});
  Gradients<T> grads = make_gradients(actor.trunk);

  BcReport report;
  report.train_rows = n_train;
  report.validation_rows = n_val;

  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    detail::shuffle_indices(order, stream);
    double epoch_nll = 0.0;
    for (std::size_t at = 0; at < n_train; at += std::size_t(cfg.batch_size)) {
      const std::size_t hi = std::min(n_train, at + std::size_t(cfg.batch_size));
      const Mat<T> bx = detail::take_rows(train_x, order, at, hi);
      const Mat<T> bu = detail::take_rows(train_u, order, at, hi);
      epoch_nll += detail::bc_loss_and_grad(actor.trunk, adim, bx, bu, grads) * double(hi - at);
      adam_step(actor.trunk, grads, opt);
    }
    report.train_nll.push_back(epoch_nll / double(n_train));
  }

  report.final_train_nll = detail::bc_mean_nll(actor.trunk, train_x, train_u, adim);
  report.final_validation_nll = n_val > 0
                                    ? detail::bc_mean_nll(actor.trunk, val_x, val_u, adim)
                                    : report.final_train_nll;
  report.eval_episodes = eval_episodes;
  if (eval_episodes > 0) {
    report.eval_seed = stream.uniform_int(std::uint64_t(1) << 62);
    const EvalStats ev = evaluate_policy(actor, ds.env, eval_episodes, report.eval_seed, 0);
    report.eval_return_mean = ev.return_mean;
    report.eval_success_rate = ev.success_rate;
  }

  BcResult<T> res{std::move(actor), TensorFile{}, std::move(report)};
  res.snapshot =
      make_actor_snapshot(res.actor, ds.env, 0, hash_text(canonical_bc_config(cfg, arch)));
  return res;
}

}  // namespace porl
