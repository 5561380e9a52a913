// Run configuration for the fine-tuning driver: one flat struct covering the
// environment, the pre-sample stage, the SAC update loop, and artifact paths.
#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "porl/common.hpp"
#include "porl/env.hpp"
#include "porl/sac.hpp"

namespace porl {

struct RunConfig {
  std::string env = "pointmaze-u";
  // porl | sac-scratch | random-critic | symmetric-offline
  std::string mode = "porl";
  std::uint64_t seed = 1;

  double epsilon = 0.1;                  // epsilon-greedy mix during pre-sample
  // Exploit branch of the epsilon-greedy mix: a stochastic sample from the
  // policy (default) or its deterministic mean.
  std::string exploit_mode = "stochastic";
  std::int64_t pre_sample_steps = 2000;  // T
  std::int64_t max_env_steps = 30000;    // N (total env steps, both stages)
  int utd = 16;                          // M critic updates per env step
  std::size_t batch_size = 256;

  double beta = 0.0;               // BC weight in the actor objective
  std::string bc_mode = "off";     // off | full-buffer | latest-window
  std::size_t bc_window = 10000;   // latest-window size in transitions

  int ensemble_size = 10;
  std::string reduction = "min-subset";  // min-all | min-subset
  int reduce_subset = 2;
  double discount = 0.99;
  double tau = 0.005;

  double actor_lr = 1e-4;
  double critic_lr = 3e-4;
  double temperature_lr = 1e-4;
  double init_log_alpha = 0.0;
  bool tune_temperature = true;
  std::optional<double> target_entropy;  // default: -action_dim

  std::vector<int> actor_hidden{256, 256};
  std::vector<int> critic_hidden{256, 256};
  bool actor_layer_norm = false;
  bool critic_layer_norm = true;

  std::string actor_step_mode = "union";  // union | per-batch
  std::size_t replay_capacity = 1000000;

  std::string offline_dataset;  // path; empty = none
  bool retain_offline = false;  // keep offline data in its own buffer, sample symmetrically

  std::int64_t eval_interval = 1000;
  int eval_episodes = 10;

  std::string actor_snapshot;   // pre-trained policy (the policy-only input)
  std::string critic_snapshot;  // optional warm critic for initialization studies
  std::string out_snapshot;     // where the final agent is written; empty = skip
};

inline bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.env == b.env && a.mode == b.mode && a.seed == b.seed && a.epsilon == b.epsilon &&
         a.exploit_mode == b.exploit_mode &&
         a.pre_sample_steps == b.pre_sample_steps && a.max_env_steps == b.max_env_steps &&
         a.utd == b.utd && a.batch_size == b.batch_size && a.beta == b.beta &&
         a.bc_mode == b.bc_mode && a.bc_window == b.bc_window &&
         a.ensemble_size == b.ensemble_size && a.reduction == b.reduction &&
         a.reduce_subset == b.reduce_subset && a.discount == b.discount && a.tau == b.tau &&
         a.actor_lr == b.actor_lr && a.critic_lr == b.critic_lr &&
         a.temperature_lr == b.temperature_lr && a.init_log_alpha == b.init_log_alpha &&
         a.tune_temperature == b.tune_temperature && a.target_entropy == b.target_entropy &&
         a.actor_hidden == b.actor_hidden && a.critic_hidden == b.critic_hidden &&
         a.actor_layer_norm == b.actor_layer_norm && a.critic_layer_norm == b.critic_layer_norm &&
         a.actor_step_mode == b.actor_step_mode && a.replay_capacity == b.replay_capacity &&
         a.offline_dataset == b.offline_dataset && a.retain_offline == b.retain_offline &&
         a.eval_interval == b.eval_interval && a.eval_episodes == b.eval_episodes &&
         a.actor_snapshot == b.actor_snapshot && a.critic_snapshot == b.critic_snapshot &&
         a.out_snapshot == b.out_snapshot;
}

inline const std::vector<std::string>& train_mode_names() {
  static const std::vector<std::string> names{"porl", "sac-scratch", "random-critic",
                                              "symmetric-offline"};
  return names;
}

// Every violation names the offending key so config errors are actionable.
inline void validate_run_config(const RunConfig& c) {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError(key + ": " + what);
  };
  bool env_ok = false;
  for (const auto& n : env_names()) env_ok = env_ok || n == c.env;
  if (!env_ok) fail("env", "unknown environment '" + c.env + "'");
  bool mode_ok = false;
  for (const auto& n : train_mode_names()) mode_ok = mode_ok || n == c.mode;
  if (!mode_ok) fail("mode", "must be one of porl, sac-scratch, random-critic, symmetric-offline");
  if (!(c.epsilon >= 0.0 && c.epsilon <= 1.0)) fail("epsilon", "must be within [0, 1]");
  if (c.exploit_mode != "stochastic" && c.exploit_mode != "deterministic")
    fail("exploit_mode", "must be stochastic or deterministic");
  if (c.pre_sample_steps < 0) fail("pre_sample_steps", "must be non-negative");
  if (c.max_env_steps < c.pre_sample_steps)
    fail("pre_sample_steps", "must not exceed max_env_steps");
  if (c.utd < 1) fail("utd", "must be at least 1");
  if (c.batch_size < 1) fail("batch_size", "must be at least 1");
  if (!(c.beta >= 0.0 && c.beta <= 1.0)) fail("beta", "must be within [0, 1]");
  if (c.bc_mode != "off" && c.bc_mode != "full-buffer" && c.bc_mode != "latest-window")
    fail("bc_mode", "must be one of off, full-buffer, latest-window");
  if (c.beta > 0.0 && c.bc_mode == "off")
    fail("bc_mode", "must name a BC source when beta is positive");
  if (c.bc_mode == "latest-window" && c.bc_window < 1) fail("bc_window", "must be at least 1");
  if (c.ensemble_size < 1) fail("ensemble_size", "must be at least 1");
  if (c.reduction != "min-all" && c.reduction != "min-subset")
    fail("reduction", "must be min-all or min-subset");
  if (c.reduction == "min-subset" && (c.reduce_subset < 1 || c.reduce_subset > c.ensemble_size))
    fail("reduce_subset", "must be within [1, ensemble_size]");
  if (!(c.discount >= 0.0 && c.discount <= 1.0)) fail("discount", "must be within [0, 1]");
  if (!(c.tau > 0.0 && c.tau <= 1.0)) fail("tau", "must be within (0, 1]");
  if (!(c.actor_lr > 0.0)) fail("actor_lr", "must be positive");
  if (!(c.critic_lr > 0.0)) fail("critic_lr", "must be positive");
  if (!(c.temperature_lr > 0.0)) fail("temperature_lr", "must be positive");
  if (c.actor_hidden.empty()) fail("actor_hidden", "must name at least one hidden layer");
  if (c.critic_hidden.empty()) fail("critic_hidden", "must name at least one hidden layer");
  for (int w : c.actor_hidden)
    if (w < 1) fail("actor_hidden", "layer widths must be positive");
  for (int w : c.critic_hidden)
    if (w < 1) fail("critic_hidden", "layer widths must be positive");
  if (c.actor_step_mode != "union" && c.actor_step_mode != "per-batch")
    fail("actor_step_mode", "must be union or per-batch");
  if (c.replay_capacity < 1) fail("replay_capacity", "must be at least 1");
  if (c.retain_offline && c.offline_dataset.empty())
    fail("offline_dataset", "required when retain_offline is set");
  if (c.mode == "symmetric-offline" && c.offline_dataset.empty())
    fail("offline_dataset", "required for mode symmetric-offline");
  const bool symmetric = c.retain_offline || c.mode == "symmetric-offline";
  if (symmetric && c.batch_size % 2 != 0)
    fail("batch_size", "must be even when sampling symmetrically from two buffers");
  if (c.eval_interval < 1) fail("eval_interval", "must be at least 1");
  if (c.eval_episodes < 1) fail("eval_episodes", "must be at least 1");
  if ((c.mode == "porl" || c.mode == "random-critic") && c.actor_snapshot.empty())
    fail("actor_snapshot", "required for mode '" + c.mode + "'");
}

inline SacConfig to_sac_config(const RunConfig& c, const EnvSpec& spec) {
  SacConfig s;
  s.state_dim = spec.state_dim;
  s.action_dim = spec.action_dim;
  s.action_low = spec.action_low;
  s.action_high = spec.action_high;
  s.actor_hidden = c.actor_hidden;
  s.critic_hidden = c.critic_hidden;
  s.actor_layer_norm = c.actor_layer_norm;
  s.critic_layer_norm = c.critic_layer_norm;
  s.ensemble_size = c.ensemble_size;
  s.reduce_mode = c.reduction == "min-all" ? ReduceMode::MinAll : ReduceMode::MinSubsetK;
  s.reduce_subset = c.reduce_subset;
  s.discount = c.discount;
  s.tau = c.tau;
  s.actor_lr = c.actor_lr;
  s.critic_lr = c.critic_lr;
  s.temperature_lr = c.temperature_lr;
  s.init_log_alpha = c.init_log_alpha;
  s.target_entropy = c.target_entropy;
  return s;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Canonical key=value rendering; the config hash recorded in snapshots is
// FNV-1a over this string, so it is stable across processes.
inline std::string canonical_config(const RunConfig& c) {
  std::ostringstream os;
  auto ints = [](const std::vector<int>& v) {
    std::ostringstream s;
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << v[i];
    return s.str();
  };
  os << "env=" << c.env << "\n";
  os << "mode=" << c.mode << "\n";
  os << "seed=" << c.seed << "\n";
  os << "epsilon=" << format_double(c.epsilon) << "\n";
  os << "exploit_mode=" << c.exploit_mode << "\n";
  os << "pre_sample_steps=" << c.pre_sample_steps << "\n";
  os << "max_env_steps=" << c.max_env_steps << "\n";
  os << "utd=" << c.utd << "\n";
  os << "batch_size=" << c.batch_size << "\n";
  os << "beta=" << format_double(c.beta) << "\n";
  os << "bc_mode=" << c.bc_mode << "\n";
  os << "bc_window=" << c.bc_window << "\n";
  os << "ensemble_size=" << c.ensemble_size << "\n";
  os << "reduction=" << c.reduction << "\n";
  os << "reduce_subset=" << c.reduce_subset << "\n";
  os << "discount=" << format_double(c.discount) << "\n";
  os << "tau=" << format_double(c.tau) << "\n";
  os << "actor_lr=" << format_double(c.actor_lr) << "\n";
  os << "critic_lr=" << format_double(c.critic_lr) << "\n";
  os << "temperature_lr=" << format_double(c.temperature_lr) << "\n";
  os << "init_log_alpha=" << format_double(c.init_log_alpha) << "\n";
  os << "tune_temperature=" << (c.tune_temperature ? 1 : 0) << "\n";
  os << "target_entropy=" << (c.target_entropy ? format_double(*c.target_entropy) : "auto")
     << "\n";
  os << "actor_hidden=" << ints(c.actor_hidden) << "\n";
  os << "critic_hidden=" << ints(c.critic_hidden) << "\n";
  os << "actor_layer_norm=" << (c.actor_layer_norm ? 1 : 0) << "\n";
  os << "critic_layer_norm=" << (c.critic_layer_norm ? 1 : 0) << "\n";
  os << "actor_step_mode=" << c.actor_step_mode << "\n";
  os << "replay_capacity=" << c.replay_capacity << "\n";
  os << "offline_dataset=" << c.offline_dataset << "\n";
  os << "retain_offline=" << (c.retain_offline ? 1 : 0) << "\n";
  os << "eval_interval=" << c.eval_interval << "\n";
  os << "eval_episodes=" << c.eval_episodes << "\n";
  os << "actor_snapshot=" << c.actor_snapshot << "\n";
  os << "critic_snapshot=" << c.critic_snapshot << "\n";
  os << "out_snapshot=" << c.out_snapshot << "\n";
  return os.str();
}

// FNV-1a over a canonical key=value rendering; stable across builds.
inline std::string hash_text(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_hash(const RunConfig& c) { return hash_text(canonical_config(c)); }

}  // namespace porl
