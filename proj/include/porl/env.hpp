// Toy control environments: sparse-reward point mazes and a dense-reward
// two-link reacher. Deterministic given the reset stream and action sequence.
#pragma once

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "porl/common.hpp"
#include "porl/rng.hpp"

namespace porl {

enum class RewardKind { SparseBinary, Dense };

struct EnvSpec {
  int state_dim = 0;
  int action_dim = 0;
  std::vector<double> action_low, action_high;
  int max_episode_steps = 0;
  RewardKind reward_kind = RewardKind::SparseBinary;
  // Index of (x, y) within the state for envs with an intrinsic 2D position;
  // -1 when the state has no such slice (visitation maps refuse those envs).
  int position_slice = -1;
};

template <class T>
struct StepResult {
  std::vector<T> next_state;
  T reward = 0;
  bool terminated = false;
  bool truncated = false;
};

template <class T>
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual const std::string& name() const = 0;
  virtual std::vector<T> reset(RngStream& stream) = 0;
  virtual StepResult<T> step(const std::vector<T>& action) = 0;
  virtual std::string describe() const = 0;
};

// ---------------------------------------------------------------------------
// Point mazes. Cells are unit squares; '#' is solid, 'S' start box, 'G' goal.
// World x runs along columns, y along rows (downward). The agent is a point
// mass with a small collision radius.

struct MazeLayout {
  std::string name;
  std::vector<std::string> rows;
  int start_r = 0, start_c = 0;
  int goal_r = 0, goal_c = 0;
  int max_episode_steps = 0;

  int height() const { return int(rows.size()); }
  int width() const { return int(rows[0].size()); }
  bool wall(int r, int c) const {
    if (r < 0 || c < 0 || r >= height() || c >= width()) return true;
    return rows[std::size_t(r)][std::size_t(c)] == '#';
  }
  double goal_x() const { return goal_c + 0.5; }
  double goal_y() const { return goal_r + 0.5; }
  double start_x() const { return start_c + 0.5; }
  double start_y() const { return start_r + 0.5; }
};

inline MazeLayout maze_layout(const std::string& maze_name) {
  MazeLayout m;
  m.name = maze_name;
  if (maze_name == "u") {
    m.rows = {
        "#####",
        "#G..#",
        "###.#",
        "#S..#",
        "#####",
    };
    m.max_episode_steps = 150;
  } else if (maze_name == "medium") {
    m.rows = {
        "########",
        "#S.##..#",
        "#..#...#",
        "##...###",
        "#..#...#",
        "#.#..#.#",
        "#...#.G#",
        "########",
    };
    m.max_episode_steps = 300;
  } else if (maze_name == "large") {
    m.rows = {
        "############",
        "#S...#.....#",
        "#.##.#.#.#.#",
        "#......#...#",
        "#.####.###.#",
        "#..#.#.....#",
        "##.#.#.#.###",
        "#..#...#.G.#",
        "############",
    };
    m.max_episode_steps = 600;
  } else {
    throw ConfigError("unknown maze layout: " + maze_name);
  }
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) {
      const char ch = m.rows[std::size_t(r)][std::size_t(c)];
      if (ch == 'S') {
        m.start_r = r;
        m.start_c = c;
      } else if (ch == 'G') {
        m.goal_r = r;
        m.goal_c = c;
      }
    }
  return m;
}

// Shortest-path step counts to the goal cell, -1 where unreachable.
inline std::vector<std::vector<int>> maze_distances(const MazeLayout& m) {
  std::vector<std::vector<int>> dist(std::size_t(m.height()),
                                     std::vector<int>(std::size_t(m.width()), -1));
  std::vector<std::pair<int, int>> queue{{m.goal_r, m.goal_c}};
  dist[std::size_t(m.goal_r)][std::size_t(m.goal_c)] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const auto [r, c] = queue[head];
    const int d = dist[std::size_t(r)][std::size_t(c)];
    const int dr[4] = {-1, 1, 0, 0};
    const int dc[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k], nc = c + dc[k];
      if (m.wall(nr, nc) || dist[std::size_t(nr)][std::size_t(nc)] >= 0) continue;
      dist[std::size_t(nr)][std::size_t(nc)] = d + 1;
      queue.push_back({nr, nc});
    }
  }
  return dist;
}

template <class T>
class PointMazeEnv final : public Env<T> {
 public:
  static constexpr double kDt = 0.1;
  static constexpr double kDamping = 0.9;
  static constexpr double kGoalRadius = 0.5;
  static constexpr double kAgentRadius = 0.15;
  static constexpr double kStartHalf = 0.25;  // half-width of the start box

  explicit PointMazeEnv(const std::string& maze_name)
      : layout_(maze_layout(maze_name)), name_("pointmaze-" + maze_name) {
    spec_.state_dim = 4;
    spec_.action_dim = 2;
    spec_.action_low = {-1.0, -1.0};
    spec_.action_high = {1.0, 1.0};
    spec_.max_episode_steps = layout_.max_episode_steps;
    spec_.reward_kind = RewardKind::SparseBinary;
    spec_.position_slice = 0;
  }

  const EnvSpec& spec() const override { return spec_; }
  const std::string& name() const override { return name_; }
  const MazeLayout& layout() const { return layout_; }

  std::vector<T> reset(RngStream& stream) override {
    x_ = layout_.start_x() + stream.uniform(-kStartHalf, kStartHalf);
    y_ = layout_.start_y() + stream.uniform(-kStartHalf, kStartHalf);
    vx_ = vy_ = 0.0;
    steps_ = 0;
    needs_reset_ = false;
    return state();
  }

  // Place the agent exactly (probes and oracles). Starts a fresh episode.
  void set_state(double x, double y, double vx, double vy) {
    if (blocked(x, y)) throw UsageError(name_ + ": set_state inside a wall");
    x_ = x;
    y_ = y;
    vx_ = vx;
    vy_ = vy;
    steps_ = 0;
    needs_reset_ = false;
  }

  // Does a point with the agent's radius at (px, py) overlap any wall cell?
  bool blocked(double px, double py) const {
    for (int sx = -1; sx <= 1; sx += 2)
      for (int sy = -1; sy <= 1; sy += 2) {
        const int c = int(std::floor(px + sx * kAgentRadius));
        const int r = int(std::floor(py + sy * kAgentRadius));
        if (layout_.wall(r, c)) return true;
      }
    return false;
  }

  StepResult<T> step(const std::vector<T>& action) override {
    if (needs_reset_) throw UsageError(name_ + ": step after episode end; call reset first");
    require_shape(int(action.size()) == spec_.action_dim, name_ + ": action dimension mismatch");
    const double ax = std::clamp(double(action[0]), -1.0, 1.0);
    const double ay = std::clamp(double(action[1]), -1.0, 1.0);
    vx_ = kDamping * vx_ + kDt * ax;
    vy_ = kDamping * vy_ + kDt * ay;

    // Axis-decomposed move with sliding: clamp at the crossed cell boundary
    // and kill that velocity component. Per-step motion (<= 0.1) never spans
    // a full cell, so only the adjacent boundary can be crossed.
    double nx = x_ + kDt * vx_;
    if (blocked(nx, y_)) {
      if (vx_ > 0)
        nx = std::floor(nx + kAgentRadius) - kAgentRadius - kEps;
      else
        nx = std::floor(nx - kAgentRadius) + 1 + kAgentRadius + kEps;
      vx_ = 0.0;
    }
    double ny = y_ + kDt * vy_;
    if (blocked(nx, ny)) {
      if (vy_ > 0)
        ny = std::floor(ny + kAgentRadius) - kAgentRadius - kEps;
      else
        ny = std::floor(ny - kAgentRadius) + 1 + kAgentRadius + kEps;
      vy_ = 0.0;
    }
    x_ = nx;
    y_ = ny;
    steps_ += 1;

    StepResult<T> out;
    const double dx = x_ - layout_.goal_x();
    const double dy = y_ - layout_.goal_y();
    out.terminated = dx * dx + dy * dy <= kGoalRadius * kGoalRadius;
    out.reward = out.terminated ? T(1) : T(0);
    out.truncated = !out.terminated && steps_ >= spec_.max_episode_steps;
    needs_reset_ = out.terminated || out.truncated;
    out.next_state = state();
    return out;
  }

  std::string describe() const override {
    std::ostringstream os;
    os << name_ << ": sparse point maze\n";
    os << "  state [x y vx vy], actions 2d acceleration in [-1,1]\n";
    os << "  dt " << kDt << ", damping " << kDamping << ", goal radius " << kGoalRadius
       << ", horizon " << spec_.max_episode_steps << "\n";
    for (const auto& row : layout_.rows) os << "  " << row << "\n";
    return os.str();
  }

 private:
  // Clamp margin; wide enough that float-rounded observations stay legal.
  static constexpr double kEps = 1e-5;

  std::vector<T> state() const { return {T(x_), T(y_), T(vx_), T(vy_)}; }

  MazeLayout layout_;
  std::string name_;
  EnvSpec spec_;
  double x_ = 0, y_ = 0, vx_ = 0, vy_ = 0;
  int steps_ = 0;
  bool needs_reset_ = true;
};

// ---------------------------------------------------------------------------
// Two-link reacher with dense negative-distance reward. Links 0.5 each;
// targets sampled in the reachable annulus.

template <class T>
class ReacherEnv final : public Env<T> {
 public:
  static constexpr double kDt = 0.1;
  static constexpr double kDamping = 0.9;
  static constexpr double kLink = 0.5;
  static constexpr double kTargetMin = 0.3;
  static constexpr double kTargetMax = 0.9;
  static constexpr double kPi = 3.14159265358979323846;

  ReacherEnv() {
    spec_.state_dim = 6;
    spec_.action_dim = 2;
    spec_.action_low = {-1.0, -1.0};
    spec_.action_high = {1.0, 1.0};
    spec_.max_episode_steps = 50;
    spec_.reward_kind = RewardKind::Dense;
  }

  const EnvSpec& spec() const override { return spec_; }
  const std::string& name() const override { return name_; }

  std::vector<T> reset(RngStream& stream) override {
    th1_ = stream.uniform(-kPi, kPi);
    th2_ = stream.uniform(-kPi, kPi);
    w1_ = w2_ = 0.0;
    const double ang = stream.uniform(-kPi, kPi);
    const double rad = stream.uniform(kTargetMin, kTargetMax);
    tx_ = rad * std::cos(ang);
    ty_ = rad * std::sin(ang);
    steps_ = 0;
    needs_reset_ = false;
    return state();
  }

  void set_state(double th1, double th2, double w1, double w2, double tx, double ty) {
    th1_ = th1;
    th2_ = th2;
    w1_ = w1;
    w2_ = w2;
    tx_ = tx;
    ty_ = ty;
    steps_ = 0;
    needs_reset_ = false;
  }

  static std::pair<double, double> tip(double th1, double th2) {
    return {kLink * std::cos(th1) + kLink * std::cos(th1 + th2),
            kLink * std::sin(th1) + kLink * std::sin(th1 + th2)};
  }

  StepResult<T> step(const std::vector<T>& action) override {
    if (needs_reset_) throw UsageError(name_ + ": step after episode end; call reset first");
    require_shape(int(action.size()) == spec_.action_dim, name_ + ": action dimension mismatch");
    const double a1 = std::clamp(double(action[0]), -1.0, 1.0);
    const double a2 = std::clamp(double(action[1]), -1.0, 1.0);
    w1_ = kDamping * w1_ + kDt * a1;
    w2_ = kDamping * w2_ + kDt * a2;
    th1_ = wrap(th1_ + kDt * w1_);
    th2_ = wrap(th2_ + kDt * w2_);
    steps_ += 1;

    StepResult<T> out;
    const auto [px, py] = tip(th1_, th2_);
    out.reward = T(-std::sqrt((px - tx_) * (px - tx_) + (py - ty_) * (py - ty_)));
    out.terminated = false;
    out.truncated = steps_ >= spec_.max_episode_steps;
    needs_reset_ = out.truncated;
    out.next_state = state();
    return out;
  }

  std::string describe() const override {
    std::ostringstream os;
    os << name_ << ": dense two-link reacher\n";
    os << "  state [th1 th2 w1 w2 tx ty], torque actions in [-1,1]\n";
    os << "  links " << kLink << "+" << kLink << ", dt " << kDt << ", damping " << kDamping
       << ", horizon " << spec_.max_episode_steps << "\n";
    os << "  reward = -dist(tip, target); target radius in [" << kTargetMin << ", " << kTargetMax
       << "]\n";
    return os.str();
  }

 private:
  static double wrap(double th) {
    while (th > kPi) th -= 2 * kPi;
    while (th < -kPi) th += 2 * kPi;
    return th;
  }

  std::vector<T> state() const { return {T(th1_), T(th2_), T(w1_), T(w2_), T(tx_), T(ty_)}; }

  EnvSpec spec_;
  std::string name_ = "reacher";
  double th1_ = 0, th2_ = 0, w1_ = 0, w2_ = 0, tx_ = 0, ty_ = 0;
  int steps_ = 0;
  bool needs_reset_ = true;
};

// ---------------------------------------------------------------------------

template <class T>
std::unique_ptr<Env<T>> make_env(const std::string& name) {
  if (name == "pointmaze-u") return std::make_unique<PointMazeEnv<T>>("u");
  if (name == "pointmaze-medium") return std::make_unique<PointMazeEnv<T>>("medium");
  if (name == "pointmaze-large") return std::make_unique<PointMazeEnv<T>>("large");
  if (name == "reacher") return std::make_unique<ReacherEnv<T>>();
  throw ConfigError("unknown environment: " + name);
}

inline std::vector<std::string> env_names() {
  return {"pointmaze-u", "pointmaze-medium", "pointmaze-large", "reacher"};
}

inline std::string describe_env(const std::string& name) {
  return make_env<float>(name)->describe();
}

}  // namespace porl
