// Analysis tooling: Q-value bias against a converged reference critic, 2D
// state-visitation/value grids, and multi-seed learning-curve summaries.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "porl/common.hpp"
#include "porl/dataset.hpp"
#include "porl/env.hpp"
#include "porl/log.hpp"
#include "porl/sac.hpp"
#include "porl/snapshot.hpp"

namespace porl {

// ---------------------------------------------------------------------------
// Q-value bias

// A probe counts as in-dataset when it lies within this Euclidean distance of
// some dataset (s, a) row after per-dimension standardization by the
// dataset's own statistics.
inline constexpr double kInDatasetRadius = 0.1;

struct BiasRecord {
  double q_est = 0;   // ensemble mean of the critic under test
  double q_ref = 0;   // ensemble mean of the reference
  double bias = 0;    // q_est - q_ref
  bool in_dataset = false;
};

template <class T>
struct BiasReport {
  Mat<T> states, actions;  // probe inputs, row-aligned with records
  std::vector<BiasRecord> records;
  std::int64_t in_count = 0, out_count = 0;
  // Mean bias per tag; NaN when the tag holds no probes.
  double in_mean = std::numeric_limits<double>::quiet_NaN();
  double out_mean = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

template <class T>
std::vector<double> ensemble_mean_q(const std::vector<Mlp<T>>& nets, const Mat<T>& xq) {
  std::vector<double> mean(xq.rows(), 0.0);
  for (const auto& net : nets) {
    const Mat<T> q = forward(net, xq);
    for (std::size_t r = 0; r < q.rows(); ++r) mean[r] += double(q(r, 0));
  }
  for (double& v : mean) v /= double(nets.size());
  return mean;
}

// Per-dimension standard deviations of the joint (s, a) rows, floored so a
// constant column cannot blow up the distance.
template <class T>
std::vector<double> joint_stds(const DemoDataset<T>& ds) {
  const std::size_t sd = ds.states.cols(), ad = ds.actions.cols(), n = ds.size();
  std::vector<double> mean(sd + ad, 0.0), var(sd + ad, 0.0);
  auto joint = [&](std::size_t r, std::size_t d) {
    return d < sd ? double(ds.states(r, d)) : double(ds.actions(r, d - sd));
  };
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t d = 0; d < sd + ad; ++d) mean[d] += joint(r, d);
  for (double& m : mean) m /= double(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t d = 0; d < sd + ad; ++d) {
      const double c = joint(r, d) - mean[d];
      var[d] += c * c;
    }
  std::vector<double> sd_out(sd + ad);
  for (std::size_t d = 0; d < sd + ad; ++d)
    sd_out[d] = std::max(std::sqrt(var[d] / double(n)), 1e-8);
  return sd_out;
}

}  // namespace detail

template <class T>
BiasReport<T> compute_q_bias(const std::vector<Mlp<T>>& critic,
                             const std::vector<Mlp<T>>& reference, const Mat<T>& probe_states,
                             const Mat<T>& probe_actions,
                             const std::type_identity_t<DemoDataset<T>>* dataset = nullptr,
                             double radius = kInDatasetRadius) {
  if (critic.empty() || reference.empty())
    throw UsageError("compute_q_bias: empty critic ensemble");
  if (probe_states.rows() == 0) throw UsageError("compute_q_bias: probe set is empty");
  require_shape(probe_states.rows() == probe_actions.rows(),
                "compute_q_bias: probe states and actions disagree on row count");
  if (!(radius >= 0.0)) throw ConfigError("compute_q_bias: radius must be non-negative");
  const std::size_t sd = probe_states.cols(), ad = probe_actions.cols();
  for (const auto& q : critic)
    require_shape(q.input_dim() == int(sd + ad) && q.layer_sizes.back() == 1,
                  "compute_q_bias: critic input does not match the probe dimensions");
  for (const auto& q : reference)
    require_shape(q.input_dim() == int(sd + ad) && q.layer_sizes.back() == 1,
                  "compute_q_bias: reference input does not match the probe dimensions");
  if (dataset && dataset->size() > 0)
    require_shape(dataset->states.cols() == sd && dataset->actions.cols() == ad,
                  "compute_q_bias: dataset dimensions do not match the probes");

  const Mat<T> xq = concat_state_action(probe_states, probe_actions);
  const std::vector<double> q_est = detail::ensemble_mean_q(critic, xq);
  const std::vector<double> q_ref = detail::ensemble_mean_q(reference, xq);

  BiasReport<T> rep;
  rep.states = probe_states;
  rep.actions = probe_actions;
  rep.records.resize(probe_states.rows());

  std::vector<double> stds;
  if (dataset && dataset->size() > 0) stds = detail::joint_stds(*dataset);
  const double r2 = radius * radius;

  double in_sum = 0, out_sum = 0;
  for (std::size_t p = 0; p < rep.records.size(); ++p) {
    BiasRecord& rec = rep.records[p];
    rec.q_est = q_est[p];
    rec.q_ref = q_ref[p];
    rec.bias = rec.q_est - rec.q_ref;
    if (!stds.empty()) {
      for (std::size_t row = 0; row < dataset->size() && !rec.in_dataset; ++row) {
        double d2 = 0;
        for (std::size_t d = 0; d < sd + ad && d2 <= r2; ++d) {
          const double pv = d < sd ? double(probe_states(p, d)) : double(probe_actions(p, d - sd));
          const double rv =
              d < sd ? double(dataset->states(row, d)) : double(dataset->actions(row, d - sd));
          const double z = (pv - rv) / stds[d];
          d2 += z * z;
        }
        rec.in_dataset = d2 <= r2;
      }
    }
    (rec.in_dataset ? rep.in_count : rep.out_count) += 1;
    (rec.in_dataset ? in_sum : out_sum) += rec.bias;
  }
  if (rep.in_count > 0) rep.in_mean = in_sum / double(rep.in_count);
  if (rep.out_count > 0) rep.out_mean = out_sum / double(rep.out_count);
  return rep;
}

template <class T>
std::string bias_csv(const BiasReport<T>& rep) {
  std::ostringstream os;
  for (std::size_t d = 0; d < rep.states.cols(); ++d) os << "s" << d << ",";
  for (std::size_t d = 0; d < rep.actions.cols(); ++d) os << "a" << d << ",";
  os << "q_est,q_ref,bias,tag\n";
  for (std::size_t p = 0; p < rep.records.size(); ++p) {
    for (std::size_t d = 0; d < rep.states.cols(); ++d)
      os << csv_double(double(rep.states(p, d))) << ",";
    for (std::size_t d = 0; d < rep.actions.cols(); ++d)
      os << csv_double(double(rep.actions(p, d))) << ",";
    const BiasRecord& r = rep.records[p];
    os << csv_double(r.q_est) << "," << csv_double(r.q_ref) << "," << csv_double(r.bias) << ","
       << (r.in_dataset ? "in-dataset" : "out-of-dataset") << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Visitation grids

struct GridSpec {
  double x_lo = 0, x_hi = 1;
  double y_lo = 0, y_hi = 1;
  int nx = 1, ny = 1;  // cells per axis
};

inline void validate_grid(const GridSpec& g) {
  if (g.nx < 1 || g.ny < 1) throw ConfigError("grid: resolution must be at least 1x1");
  if (!(g.x_hi > g.x_lo) || !(g.y_hi > g.y_lo))
    throw ConfigError("grid: bounds must have positive extent");
}

struct VisitationMap {
  GridSpec grid;
  std::vector<std::int64_t> counts;  // row-major, iy * nx + ix
  std::vector<double> value_mean;    // mean supplied value per cell, NaN unvisited
  bool has_values = false;
  std::int64_t total = 0;

  std::int64_t count(int ix, int iy) const {
    return counts[std::size_t(iy) * std::size_t(grid.nx) + std::size_t(ix)];
  }
  double value(int ix, int iy) const {
    return value_mean[std::size_t(iy) * std::size_t(grid.nx) + std::size_t(ix)];
  }
};

// Bins the 2D position slice of each state row; positions beyond the bounds
// are clamped into the edge cells so occupancy mass is always conserved. An
// optional per-row value channel (e.g. reference Q) is averaged per cell.
template <class T>
VisitationMap visitation_map(const Mat<T>& states, const EnvSpec& spec, const GridSpec& grid,
                             const std::vector<double>& values = {}) {
  validate_grid(grid);
  if (spec.position_slice < 0)
    throw UsageError("visitation_map: environment has no 2D position slice");
  require_shape(spec.position_slice + 2 <= spec.state_dim,
                "visitation_map: position slice exceeds the state size");
  require_shape(int(states.cols()) == spec.state_dim,
                "visitation_map: state width does not match the environment");
  if (!values.empty())
    require_shape(values.size() == states.rows(),
                  "visitation_map: values length does not match the states");

  VisitationMap m;
  m.grid = grid;
  const std::size_t cells = std::size_t(grid.nx) * std::size_t(grid.ny);
  m.counts.assign(cells, 0);
  m.has_values = !values.empty();
  std::vector<double> sums(cells, 0.0);
  const double dx = (grid.x_hi - grid.x_lo) / grid.nx;
  const double dy = (grid.y_hi - grid.y_lo) / grid.ny;
  const std::size_t px = std::size_t(spec.position_slice);
  for (std::size_t r = 0; r < states.rows(); ++r) {
    const double x = double(states(r, px));
    const double y = double(states(r, px + 1));
    const int ix = std::clamp(int(std::floor((x - grid.x_lo) / dx)), 0, grid.nx - 1);
    const int iy = std::clamp(int(std::floor((y - grid.y_lo) / dy)), 0, grid.ny - 1);
    const std::size_t cell = std::size_t(iy) * std::size_t(grid.nx) + std::size_t(ix);
    m.counts[cell] += 1;
    if (m.has_values) sums[cell] += values[r];
  }
  m.total = std::int64_t(states.rows());
  m.value_mean.assign(cells, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 0; c < cells; ++c)
    if (m.has_values && m.counts[c] > 0) m.value_mean[c] = sums[c] / double(m.counts[c]);
  return m;
}

// First line records bounds and resolution so a grid file is self-describing.
inline std::string grid_csv(const VisitationMap& m) {
  std::ostringstream os;
  os << "# x_lo=" << csv_double(m.grid.x_lo) << " x_hi=" << csv_double(m.grid.x_hi)
     << " y_lo=" << csv_double(m.grid.y_lo) << " y_hi=" << csv_double(m.grid.y_hi)
     << " nx=" << m.grid.nx << " ny=" << m.grid.ny << "\n";
  os << "ix,iy,x_center,y_center,count,value_mean\n";
  const double dx = (m.grid.x_hi - m.grid.x_lo) / m.grid.nx;
  const double dy = (m.grid.y_hi - m.grid.y_lo) / m.grid.ny;
  for (int iy = 0; iy < m.grid.ny; ++iy)
    for (int ix = 0; ix < m.grid.nx; ++ix) {
      os << ix << "," << iy << "," << csv_double(m.grid.x_lo + (ix + 0.5) * dx) << ","
         << csv_double(m.grid.y_lo + (iy + 0.5) * dy) << "," << m.count(ix, iy) << ","
         << csv_double(m.value(ix, iy)) << "\n";
    }
  return os.str();
}

// One cell per maze cell over the full layout; the only envs with a declared
// position slice are the point mazes.
inline GridSpec default_grid(const std::string& env_name) {
  const std::string prefix = "pointmaze-";
  if (env_name.rfind(prefix, 0) != 0)
    throw UsageError("default_grid: no 2D position grid declared for '" + env_name + "'");
  const MazeLayout m = maze_layout(env_name.substr(prefix.size()));
  GridSpec g;
  g.x_lo = 0;
  g.x_hi = m.width();
  g.y_lo = 0;
  g.y_hi = m.height();
  g.nx = m.width();
  g.ny = m.height();
  return g;
}

// ---------------------------------------------------------------------------
// Curve summaries

struct CurveSummary {
  std::vector<std::int64_t> env_steps;
  std::vector<double> return_median, return_min, return_max;
  std::vector<double> success_median, success_min, success_max;
};

namespace detail {

// Median of a small sample: middle order statistic, or the mean of the two
// central ones for even counts.
inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline CurveSummary summarize_runs(const std::vector<TrainLog>& logs) {
  if (logs.empty()) throw UsageError("summarize_runs: no logs given");
  const std::size_t points = logs[0].records.size();
  for (const auto& log : logs) {
    if (log.records.size() != points)
      throw UsageError("summarize_runs: evaluation schedules differ");
    for (std::size_t i = 0; i < points; ++i)
      if (log.records[i].env_step != logs[0].records[i].env_step)
        throw UsageError("summarize_runs: evaluation schedules differ");
  }
  CurveSummary s;
  for (std::size_t i = 0; i < points; ++i) {
    std::vector<double> rets, succ;
    for (const auto& log : logs) {
      rets.push_back(log.records[i].eval_return_mean);
      succ.push_back(log.records[i].eval_success_rate);
    }
    s.env_steps.push_back(logs[0].records[i].env_step);
    s.return_median.push_back(detail::median_of(rets));
    s.return_min.push_back(*std::min_element(rets.begin(), rets.end()));
    s.return_max.push_back(*std::max_element(rets.begin(), rets.end()));
    s.success_median.push_back(detail::median_of(succ));
    s.success_min.push_back(*std::min_element(succ.begin(), succ.end()));
    s.success_max.push_back(*std::max_element(succ.begin(), succ.end()));
  }
  return s;
}

inline std::string summary_csv(const CurveSummary& s) {
  std::ostringstream os;
  os << "env_step,return_median,return_min,return_max,success_median,success_min,success_max\n";
  for (std::size_t i = 0; i < s.env_steps.size(); ++i) {
    os << s.env_steps[i] << "," << csv_double(s.return_median[i]) << ","
       << csv_double(s.return_min[i]) << "," << csv_double(s.return_max[i]) << ","
       << csv_double(s.success_median[i]) << "," << csv_double(s.success_min[i]) << ","
       << csv_double(s.success_max[i]) << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Reference critics

// Convergence gate over the evaluation curve: the last window (a fraction of
// all eval points, at least two of them) must span less than the threshold
// relative to the window's own magnitude. A perfectly flat window passes
// regardless of level.
struct PlateauGate {
  double window_frac = 0.2;
  double rel_threshold = 0.05;
};

inline bool plateau_converged(const std::vector<double>& evals, const PlateauGate& gate = {}) {
  if (!(gate.window_frac > 0.0 && gate.window_frac <= 1.0))
    throw ConfigError("plateau gate: window_frac must be within (0, 1]");
  if (!(gate.rel_threshold > 0.0))
    throw ConfigError("plateau gate: rel_threshold must be positive");
  const std::size_t n = evals.size();
  if (n < 2) return false;
  std::size_t w = std::size_t(std::ceil(gate.window_frac * double(n)));
  w = std::clamp<std::size_t>(w, 2, n);
  const auto first = evals.end() - std::ptrdiff_t(w);
  const double lo = *std::min_element(first, evals.end());
  const double hi = *std::max_element(first, evals.end());
  const double range = hi - lo;
  if (range == 0.0) return true;
  const double scale = std::max(std::abs(lo), std::abs(hi));
  return range < gate.rel_threshold * scale;
}

// Critic-only snapshot minted from a run whose evaluation curve has plateaued;
// the gate parameters and measured relative range go into the metadata. The
// probes mirror make_snapshot's critic probes, so the file both survives
// read_critic and loads as a warm critic initialization.
template <class T>
TensorFile make_reference_critic(const SacAgent<T>& agent, const TrainLog& log,
                                 const std::string& env_name, std::int64_t step,
                                 const std::string& cfg_hash, PlateauGate gate = {}) {
  std::vector<double> evals;
  evals.reserve(log.records.size());
  for (const auto& r : log.records) evals.push_back(r.eval_return_mean);
  if (!plateau_converged(evals, gate))
    throw UsageError("reference critic: evaluation has not plateaued over the gate window");

  std::size_t w = std::size_t(std::ceil(gate.window_frac * double(evals.size())));
  w = std::clamp<std::size_t>(w, 2, evals.size());
  const auto first = evals.end() - std::ptrdiff_t(w);
  const double lo = *std::min_element(first, evals.end());
  const double hi = *std::max_element(first, evals.end());
  const double rel_range =
      hi == lo ? 0.0 : (hi - lo) / std::max(std::abs(lo), std::abs(hi));

  TensorFile tf = detail::snapshot_shell(env_name, step, cfg_hash);
  tf.set_meta("plateau.metric", "eval_return_mean");
  tf.set_meta("plateau.window_frac", csv_double(gate.window_frac));
  tf.set_meta("plateau.rel_threshold", csv_double(gate.rel_threshold));
  tf.set_meta("plateau.window_points", std::to_string(w));
  tf.set_meta("plateau.rel_range", csv_double(rel_range));
  detail::append_ensemble(tf, "critic", agent.critics.online);

  auto [states, actions] = detail::probe_inputs(agent.actor);
  detail::put_probe(tf, "states", states);
  detail::put_probe(tf, "actions", actions);
  const Mat<T> xq = concat_state_action(states, actions);
  Mat<T> online_q(states.rows(), agent.critics.online.size());
  for (std::size_t i = 0; i < agent.critics.online.size(); ++i) {
    const Mat<T> q = forward(agent.critics.online[i], xq);
    for (std::size_t r = 0; r < q.rows(); ++r) online_q(r, i) = q(r, 0);
  }
  detail::put_probe(tf, "critic_q", online_q);
  // No separate target ensemble is stored; loading falls back to target =
  // online, so the target probe mirrors the online one.
  detail::put_probe(tf, "target_q", online_q);
  return tf;
}

}  // namespace porl
