#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "porl/env.hpp"
#include "porl/expert.hpp"
#include "porl/rng.hpp"
#include "support/stats.hpp"

using namespace porl;

TEST_CASE("registry knows every environment", "[env]") {
  for (const auto& name : env_names()) {
    auto env = make_env<float>(name);
    REQUIRE(env->name() == name);
    const EnvSpec& spec = env->spec();
    REQUIRE(spec.state_dim > 0);
    REQUIRE(spec.action_dim == 2);
    REQUIRE(spec.max_episode_steps >= 1);
    for (int d = 0; d < spec.action_dim; ++d) REQUIRE(spec.action_low[d] < spec.action_high[d]);
    REQUIRE_FALSE(env->describe().empty());
  }
  REQUIRE_THROWS_AS(make_env<float>("pointmaze-xl"), ConfigError);
  REQUIRE(describe_env("pointmaze-u").find("#####") != std::string::npos);
}

TEST_CASE("maze layouts are fully connected with one start and goal", "[env]") {
  for (const std::string name : {"u", "medium", "large"}) {
    const MazeLayout m = maze_layout(name);
    int starts = 0, goals = 0;
    for (const auto& row : m.rows)
      for (char ch : row) {
        starts += ch == 'S';
        goals += ch == 'G';
      }
    REQUIRE(starts == 1);
    REQUIRE(goals == 1);
    const auto dist = maze_distances(m);
    for (int r = 0; r < m.height(); ++r)
      for (int c = 0; c < m.width(); ++c)
        if (!m.wall(r, c)) REQUIRE(dist[std::size_t(r)][std::size_t(c)] >= 0);
    REQUIRE(dist[std::size_t(m.start_r)][std::size_t(m.start_c)] > 0);
  }
  // Difficulty ladder: strictly longer shortest paths and horizons.
  const auto du = maze_distances(maze_layout("u"));
  const auto dm = maze_distances(maze_layout("medium"));
  const auto dl = maze_distances(maze_layout("large"));
  const MazeLayout u = maze_layout("u"), me = maze_layout("medium"), la = maze_layout("large");
  const int su = du[std::size_t(u.start_r)][std::size_t(u.start_c)];
  const int sm = dm[std::size_t(me.start_r)][std::size_t(me.start_c)];
  const int sl = dl[std::size_t(la.start_r)][std::size_t(la.start_c)];
  REQUIRE(su < sm);
  REQUIRE(sm < sl);
  REQUIRE(u.max_episode_steps == 150);
  REQUIRE(me.max_episode_steps == 300);
  REQUIRE(la.max_episode_steps == 600);
}

TEST_CASE("reset is deterministic and draws from the start box", "[env]") {
  auto env = make_env<float>("pointmaze-u");
  RngStream a = substream(5, "env");
  RngStream b = substream(5, "env");
  REQUIRE(env->reset(a) == env->reset(b));

  const MazeLayout m = maze_layout("u");
  RngStream s = substream(17, "env");
  for (int i = 0; i < 100; ++i) {
    const auto st = env->reset(s);
    REQUIRE(std::abs(double(st[0]) - m.start_x()) <= PointMazeEnv<float>::kStartHalf);
    REQUIRE(std::abs(double(st[1]) - m.start_y()) <= PointMazeEnv<float>::kStartHalf);
    REQUIRE(st[2] == 0.0f);
    REQUIRE(st[3] == 0.0f);
  }
}

TEST_CASE("start distribution is uniform over the box", "[env]") {
  auto env = make_env<double>("pointmaze-u");
  const MazeLayout m = maze_layout("u");
  RngStream s = substream(23, "env-reset");
  const int n = 10000;
  std::vector<int> counts(16, 0);
  std::vector<double> xs;
  xs.reserve(n);
  const double half = PointMazeEnv<double>::kStartHalf;
  for (int i = 0; i < n; ++i) {
    const auto st = env->reset(s);
    const double ux = (st[0] - (m.start_x() - half)) / (2 * half);  // in [0,1)
    const double uy = (st[1] - (m.start_y() - half)) / (2 * half);
    const int bx = std::min(3, int(ux * 4));
    const int by = std::min(3, int(uy * 4));
    counts[std::size_t(by * 4 + bx)] += 1;
    xs.push_back(st[0]);
  }
  REQUIRE(teststats::chi_square_uniform(counts) > 0.01);
  REQUIRE(teststats::ks_uniform_p(xs, m.start_x() - half, m.start_x() + half) > 0.01);
}

TEST_CASE("zero action from rest leaves the agent in place", "[env]") {
  PointMazeEnv<double> env("u");
  env.set_state(2.5, 3.5, 0.0, 0.0);
  const auto r = env.step({0.0, 0.0});
  REQUIRE(r.next_state[0] == 2.5);
  REQUIRE(r.next_state[1] == 3.5);
  REQUIRE(r.next_state[2] == 0.0);
  REQUIRE(r.next_state[3] == 0.0);
  REQUIRE(r.reward == 0.0);
  REQUIRE_FALSE(r.terminated);
}

TEST_CASE("pushing into a wall clamps at the boundary", "[env]") {
  PointMazeEnv<double> env("u");
  env.set_state(3.5, 3.5, 0.0, 0.0);
  for (int i = 0; i < 100; ++i) {
    const auto r = env.step({1.0, 0.0});  // east wall of the U bend
    REQUIRE_FALSE(env.blocked(r.next_state[0], r.next_state[1]));
    REQUIRE(r.next_state[0] < 4.0 - PointMazeEnv<double>::kAgentRadius + 1e-6);
    if (r.terminated || r.truncated) break;
  }
}

TEST_CASE("straight run to the goal matches the simulated dynamics", "[env]") {
  // Drive west along the U maze's top corridor from (3.5, 1.5). The oracle
  // integrates v' = 0.9v - 0.1, x' = x + 0.1 v' until within 0.5 of the goal.
  const MazeLayout m = maze_layout("u");
  double x = 3.5, v = 0.0;
  int oracle_steps = 0;
  while (true) {
    v = 0.9 * v + 0.1 * -1.0;
    x = x + 0.1 * v;
    oracle_steps += 1;
    const double dx = x - m.goal_x();
    if (dx * dx <= 0.25) break;
    REQUIRE(oracle_steps < 1000);
  }

  PointMazeEnv<double> env("u");
  env.set_state(3.5, 1.5, 0.0, 0.0);
  StepResult<double> r;
  int steps = 0;
  do {
    r = env.step({-1.0, 0.0});
    steps += 1;
    REQUIRE(r.reward == (r.terminated ? 1.0 : 0.0));
  } while (!r.terminated && !r.truncated);
  REQUIRE(r.terminated);
  REQUIRE(steps == oracle_steps);
  REQUIRE(r.next_state[0] == x);  // same arithmetic, same bits
}

TEST_CASE("stepping a finished episode is a usage error", "[env]") {
  PointMazeEnv<float> env("u");
  RngStream s = substream(3, "env");
  REQUIRE_THROWS_AS(env.step({0.0f, 0.0f}), UsageError);  // never reset

  env.reset(s);
  StepResult<float> r;
  for (int i = 0; i < 150; ++i) r = env.step({0.0f, 0.0f});
  REQUIRE(r.truncated);
  REQUIRE_FALSE(r.terminated);
  REQUIRE_THROWS_AS(env.step({0.0f, 0.0f}), UsageError);

  env.set_state(2.0, 1.5, 0.0, 0.0);  // inside the goal ring after one step
  r = env.step({-1.0f, 0.0f});
  REQUIRE(r.terminated);
  REQUIRE_THROWS_AS(env.step({0.0f, 0.0f}), UsageError);

  REQUIRE_THROWS_AS(env.set_state(0.5, 0.5, 0.0, 0.0), UsageError);  // wall cell
}

TEST_CASE("identical seeds and actions give bit-exact trajectories", "[env]") {
  auto run = [](std::vector<float>& states) {
    auto env = make_env<float>("pointmaze-medium");
    RngStream es = substream(31, "env");
    RngStream as = substream(31, "actions");
    auto st = env->reset(es);
    for (int i = 0; i < 500; ++i) {
      const std::vector<float> a{float(as.uniform(-1, 1)), float(as.uniform(-1, 1))};
      const auto r = env->step(a);
      states.insert(states.end(), r.next_state.begin(), r.next_state.end());
      if (r.terminated || r.truncated)
        st = env->reset(es);
      else
        st = r.next_state;
    }
    (void)st;
  };
  std::vector<float> run1, run2;
  run(run1);
  run(run2);
  REQUIRE(run1 == run2);
}

TEST_CASE("walls are never penetrated over 1e5 random steps", "[env]") {
  PointMazeEnv<float> env("medium");
  RngStream es = substream(47, "env");
  RngStream as = substream(47, "actions");
  env.reset(es);
  double episode_reward = 0;
  int episode_steps = 0;
  for (int i = 0; i < 100000; ++i) {
    const std::vector<float> a{float(as.uniform(-1, 1)), float(as.uniform(-1, 1))};
    const auto r = env.step(a);
    episode_reward += r.reward;
    episode_steps += 1;
    REQUIRE_FALSE(env.blocked(r.next_state[0], r.next_state[1]));
    if (r.terminated || r.truncated) {
      REQUIRE((episode_reward == 0.0 || episode_reward == 1.0));
      REQUIRE(episode_steps <= env.spec().max_episode_steps);
      if (!r.terminated) REQUIRE(episode_steps == env.spec().max_episode_steps);
      episode_reward = 0;
      episode_steps = 0;
      env.reset(es);
    }
  }
}

TEST_CASE("action components are clipped to bounds", "[env]") {
  PointMazeEnv<double> a("u"), b("u");
  a.set_state(2.5, 3.5, 0.1, -0.2);
  b.set_state(2.5, 3.5, 0.1, -0.2);
  const auto ra = a.step({7.0, -9.0});
  const auto rb = b.step({1.0, -1.0});
  REQUIRE(ra.next_state == rb.next_state);
}

TEST_CASE("reacher dynamics and reward follow the declared model", "[env]") {
  ReacherEnv<double> env;
  RngStream s = substream(71, "env");

  // reward is exactly -dist(tip, target), never positive
  auto st = env.reset(s);
  const double rad = std::hypot(st[4], st[5]);
  REQUIRE(rad >= ReacherEnv<double>::kTargetMin - 1e-12);
  REQUIRE(rad <= ReacherEnv<double>::kTargetMax + 1e-12);
  for (int i = 0; i < 20; ++i) {
    const auto r = env.step({0.3, -0.5});
    const auto [px, py] = ReacherEnv<double>::tip(r.next_state[0], r.next_state[1]);
    const double d = std::hypot(px - r.next_state[4], py - r.next_state[5]);
    REQUIRE(r.reward == Catch::Approx(-d).margin(1e-12));
    REQUIRE(r.reward <= 0.0);
  }

  // zero torque from rest freezes the arm
  env.set_state(0.7, -0.3, 0.0, 0.0, 0.5, 0.5);
  const auto r0 = env.step({0.0, 0.0});
  REQUIRE(r0.next_state[0] == 0.7);
  REQUIRE(r0.next_state[1] == -0.3);

  // horizon 50, truncation only, then usage error
  env.set_state(0.0, 0.0, 0.0, 0.0, 0.5, 0.5);
  StepResult<double> r;
  for (int i = 0; i < 50; ++i) r = env.step({0.1, 0.1});
  REQUIRE(r.truncated);
  REQUIRE_FALSE(r.terminated);
  REQUIRE_THROWS_AS(env.step({0.0, 0.0}), UsageError);

  // determinism across instances
  ReacherEnv<float> e1, e2;
  RngStream s1 = substream(9, "env"), s2 = substream(9, "env");
  REQUIRE(e1.reset(s1) == e2.reset(s2));
  for (int i = 0; i < 50; ++i) REQUIRE(e1.step({0.4f, -0.9f}).next_state == e2.step({0.4f, -0.9f}).next_state);
}

namespace {

// Rolls noiseless or noisy expert episodes; returns the success count.
int expert_successes(const std::string& env_name, int episodes, double sigma, std::uint64_t seed) {
  auto env = make_env<float>(env_name);
  RngStream es = substream(seed, "env");
  RngStream ns = substream(seed, "noise");
  int successes = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    auto st = env->reset(es);
    while (true) {
      auto a = scripted_expert<float>(env_name, st);
      if (sigma > 0) a = with_action_noise(a, sigma, ns, env->spec());
      const auto r = env->step(a);
      st = r.next_state;
      if (r.terminated) {
        successes += 1;
        break;
      }
      if (r.truncated) break;
    }
  }
  return successes;
}

}  // namespace

TEST_CASE("expert in the goal region outputs zero action", "[env]") {
  const MazeLayout m = maze_layout("u");
  const std::vector<float> st{float(m.goal_x() + 0.2), float(m.goal_y() - 0.1), 0.4f, 0.0f};
  const auto a = scripted_expert<float>("pointmaze-u", st);
  REQUIRE(a[0] == 0.0f);
  REQUIRE(a[1] == 0.0f);
  REQUIRE_THROWS_AS(scripted_expert<float>("reacher", st), ConfigError);
  REQUIRE_THROWS_AS(scripted_expert<float>("pointmaze-xxl", st), ConfigError);
}

TEST_CASE("noiseless expert reaches the goal on every maze", "[env]") {
  REQUIRE(expert_successes("pointmaze-u", 100, 0.0, 101) >= 95);
  REQUIRE(expert_successes("pointmaze-medium", 50, 0.0, 102) >= 48);
  REQUIRE(expert_successes("pointmaze-large", 50, 0.0, 103) >= 48);
}

TEST_CASE("action noise strictly lowers expert success", "[env]") {
  const int episodes = 200;
  const int clean = expert_successes("pointmaze-large", episodes, 0.0, 104);
  const int noisy = expert_successes("pointmaze-large", episodes, 0.3, 104);
  REQUIRE(clean > noisy);
}
