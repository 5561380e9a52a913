// Waypoint-following controller for the point mazes; source of BC demos.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "porl/env.hpp"
#include "porl/rng.hpp"

namespace porl {

// Per-maze drive strength. The large maze is driven gently: demonstrations
// then spread across the horizon (and perturbations genuinely cost success)
// instead of every rollout finishing with huge slack.
inline double expert_action_cap(const std::string& maze_name) {
  return maze_name == "large" ? 0.22 : 1.0;
}

// Deterministic expert action for the named environment. Mazes only: BFS over
// cells picks the next waypoint, a saturating velocity controller tracks it.
template <class T>
std::vector<T> scripted_expert(const std::string& env_name, const std::vector<T>& state) {
  if (env_name.rfind("pointmaze-", 0) != 0)
    throw ConfigError("scripted_expert: no controller for environment '" + env_name + "'");
  const MazeLayout m = maze_layout(env_name.substr(10));
  require_shape(state.size() == 4, "scripted_expert: maze state must be [x y vx vy]");
  const double x = double(state[0]), y = double(state[1]);
  const double vx = double(state[2]), vy = double(state[3]);

  const double gdx = x - m.goal_x(), gdy = y - m.goal_y();
  if (gdx * gdx + gdy * gdy <= PointMazeEnv<T>::kGoalRadius * PointMazeEnv<T>::kGoalRadius)
    return {T(0), T(0)};

  int r = std::clamp(int(std::floor(y)), 0, m.height() - 1);
  int c = std::clamp(int(std::floor(x)), 0, m.width() - 1);
  const auto dist = maze_distances(m);
  double wx = m.goal_x(), wy = m.goal_y();
  if (!(r == m.goal_r && c == m.goal_c)) {
    // Step to the neighbor closest to the goal; fixed scan order keeps ties
    // deterministic.
    int best = dist[std::size_t(r)][std::size_t(c)];
    int br = r, bc = c;
    const int dr[4] = {-1, 1, 0, 0};
    const int dc[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k], nc = c + dc[k];
      if (m.wall(nr, nc)) continue;
      const int d = dist[std::size_t(nr)][std::size_t(nc)];
      if (d >= 0 && (best < 0 || d < best)) {
        best = d;
        br = nr;
        bc = nc;
      }
    }
    wx = bc + 0.5;
    wy = br + 0.5;
    if (br == m.goal_r && bc == m.goal_c) {
      wx = m.goal_x();
      wy = m.goal_y();
    }
  }

  double dx = wx - x, dy = wy - y;
  const double n = std::sqrt(dx * dx + dy * dy);
  double vdx = 0, vdy = 0;
  if (n > 1e-9) {
    vdx = dx / n;
    vdy = dy / n;
  }
  // One-step velocity tracking: v' = 0.9 v + 0.1 a, so a = 10 (v_des - 0.9 v),
  // clipped. Saturates to bang-bang most of the time.
  const double cap = expert_action_cap(env_name.substr(10));
  const double ax = std::clamp(10.0 * (vdx - 0.9 * vx), -cap, cap);
  const double ay = std::clamp(10.0 * (vdy - 0.9 * vy), -cap, cap);
  return {T(ax), T(ay)};
}

// Dataset-diversity wrapper: expert action plus clipped Gaussian noise.
template <class T>
std::vector<T> with_action_noise(std::vector<T> action, double sigma, RngStream& stream,
                                 const EnvSpec& spec) {
  for (std::size_t i = 0; i < action.size(); ++i) {
    const double noisy = double(action[i]) + sigma * stream.normal();
    action[i] = T(std::clamp(noisy, spec.action_low[i], spec.action_high[i]));
  }
  return action;
}

}  // namespace porl
