#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "porl/pretrain.hpp"
#include "porl/train.hpp"

using namespace porl;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("porl_test_") + name;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// One shared 200-episode noiseless U-maze demo set; this exact stream is the
// frozen anchor for the headroom-band and monotonicity checks below.
const DemoDataset<float>& umaze_demos() {
  static const DemoDataset<float> ds = [] {
    RngStream gs(substream_seed(7, "demo"));
    return generate_demos<float>("pointmaze-u", DemoSource{}, 200, gs);
  }();
  return ds;
}

// Minimal honest dataset: every row its own terminal episode.
DemoDataset<float> one_row_dataset(float a0, float a1) {
  DemoDataset<float> ds;
  ds.env = "pointmaze-u";
  ds.episodes = 1;
  ds.success_rate = 1.0;
  ds.states = Mat<float>(1, 4);
  ds.actions = Mat<float>(1, 2);
  ds.next_states = Mat<float>(1, 4);
  ds.states(0, 0) = 1.5f;
  ds.states(0, 1) = 3.5f;
  ds.states(0, 2) = 0.0f;
  ds.states(0, 3) = 0.0f;
  ds.actions(0, 0) = a0;
  ds.actions(0, 1) = a1;
  for (std::size_t c = 0; c < 4; ++c) ds.next_states(0, c) = ds.states(0, c);
  ds.rewards = {1.0f};
  ds.dones = {1.0f};
  return ds;
}

}  // namespace

TEST_CASE("bc gradient matches central finite differences", "[pretrain]") {
  SacConfig sc;
  sc.state_dim = 4;
  sc.action_dim = 2;
  sc.action_low = {-1.0, -1.0};
  sc.action_high = {1.0, 1.0};
  sc.actor_hidden = {8};
  sc.actor_init_scale = 0.3;  // spreads the head so log-std is away from its clamp
  RngStream init(substream_seed(11, "fd-init"));
  GaussianActor<double> actor = make_actor<double>(sc, init);

  RngStream data(substream_seed(11, "fd-data"));
  Mat<double> states(10, 4), targets(10, 2);
  for (std::size_t i = 0; i < states.size(); ++i) states.data()[i] = data.normal();
  for (std::size_t i = 0; i < targets.size(); ++i) targets.data()[i] = data.uniform(-2.0, 2.0);

  Gradients<double> analytic = make_gradients(actor.trunk);
  const double loss = detail::bc_loss_and_grad(actor.trunk, 2, states, targets, analytic);
  REQUIRE(loss == Catch::Approx(detail::bc_mean_nll(actor.trunk, states, targets, 2)));

  std::vector<std::pair<double*, std::size_t>> params, grads;
  for_each_tensor(actor.trunk, [&](const std::string&, double* p, std::size_t n) {
    params.push_back({p, n});
  });
  for_each_tensor(analytic, actor.trunk, [&](const std::string&, double* p, std::size_t n) {
    grads.push_back({p, n});
  });
  const double h = 1e-6;
  double worst = 0;
  for (std::size_t ti = 0; ti < params.size(); ++ti)
    for (std::size_t i = 0; i < params[ti].second; ++i) {
      double* p = params[ti].first;
      const double keep = p[i];
      p[i] = keep + h;
      const double up = detail::bc_mean_nll(actor.trunk, states, targets, 2);
      p[i] = keep - h;
      const double dn = detail::bc_mean_nll(actor.trunk, states, targets, 2);
      p[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double an = grads[ti].first[i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      worst = std::max(worst, std::abs(fd - an) / denom);
    }
  REQUIRE(worst < 1e-4);
}

TEST_CASE("squash round-trips every in-bounds action", "[pretrain]") {
  const struct {
    double center, halfwidth;
  } cases[] = {{0.0, 1.0}, {0.5, 0.25}};
  for (const auto& c : cases) {
    const double lo = c.center - c.halfwidth, hi = c.center + c.halfwidth;
    for (int i = 0; i <= 100; ++i) {
      const double a = lo + (hi - lo) * double(i) / 100.0;
      const double back = squash(inverse_squash(a, c.center, c.halfwidth), c.center, c.halfwidth);
      REQUIRE(std::abs(back - a) <= 1e-6 * c.halfwidth + 1e-12);
    }
  }
}

TEST_CASE("demo source and config validation name the problem", "[pretrain]") {
  RngStream s(1);
  DemoSource bad;
  bad.kind = "hand-rolled";
  REQUIRE_THROWS_MATCHES(generate_demos<float>("pointmaze-u", bad, 1, s), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("unknown kind")));
  DemoSource neg;
  neg.noise_sigma = -0.1;
  REQUIRE_THROWS_MATCHES(generate_demos<float>("pointmaze-u", neg, 1, s), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("noise_sigma")));
  DemoSource snap;
  snap.kind = "agent-snapshot";
  REQUIRE_THROWS_MATCHES(generate_demos<float>("pointmaze-u", snap, 1, s), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("snapshot path")));
  REQUIRE_THROWS_AS(generate_demos<float>("pointmaze-u", DemoSource{}, -1, s), ConfigError);
  // scripted expert has no reacher controller: source/env mismatch
  REQUIRE_THROWS_MATCHES(generate_demos<float>("reacher", DemoSource{}, 1, s), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("no controller")));

  BcConfig c;
  c.epochs = 0;
  REQUIRE_THROWS_MATCHES(validate_bc_config(c), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("epochs")));
  c = {};
  c.batch_size = 0;
  REQUIRE_THROWS_MATCHES(validate_bc_config(c), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("batch_size")));
  c = {};
  c.learning_rate = 0.0;
  REQUIRE_THROWS_MATCHES(validate_bc_config(c), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("learning_rate")));
  c = {};
  c.validation_fraction = 0.5;
  REQUIRE_THROWS_MATCHES(validate_bc_config(c), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("validation_fraction")));
  c = {};
  c.validation_fraction = -0.01;
  REQUIRE_THROWS_AS(validate_bc_config(c), ConfigError);
  c = {};
  c.loss = "mse";
  REQUIRE_THROWS_MATCHES(validate_bc_config(c), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("loss")));

  DemoDataset<float> empty;
  empty.env = "pointmaze-u";
  RngStream t(2);
  REQUIRE_THROWS_MATCHES(train_bc(empty, ActorArch{}, BcConfig{}, t), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("empty")));
  ActorArch no_hidden;
  no_hidden.hidden = {};
  REQUIRE_THROWS_MATCHES(train_bc(one_row_dataset(0.1f, 0.1f), no_hidden, BcConfig{}, t),
                         ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("actor_hidden")));
}

TEST_CASE("zero episodes make an empty but valid dataset", "[pretrain]") {
  RngStream s(substream_seed(5, "demo"));
  const auto ds = generate_demos<float>("pointmaze-u", DemoSource{}, 0, s);
  REQUIRE(ds.size() == 0);
  REQUIRE(ds.episodes == 0);
  REQUIRE(ds.success_rate == 0.0);
  const std::string path = temp_path("empty_demos.bin");
  save_demo_dataset(path, ds);
  const auto back = load_demo_dataset<float>(path);
  REQUIRE(back.size() == 0);
  REQUIRE(back.episodes == 0);
  std::remove(path.c_str());
}

TEST_CASE("noiseless U-maze expert demos are near-perfect", "[pretrain]") {
  const auto& ds = umaze_demos();
  REQUIRE(ds.episodes == 200);
  REQUIRE(ds.success_rate >= 0.95);
  REQUIRE(ds.generator == "scripted-expert");
  REQUIRE(ds.noise_sigma == 0.0);

  SECTION("regeneration with the same stream is bit-identical") {
    RngStream gs(substream_seed(7, "demo"));
    const auto again = generate_demos<float>("pointmaze-u", DemoSource{}, 200, gs);
    REQUIRE(again.size() == ds.size());
    REQUIRE(again.states == ds.states);
    REQUIRE(again.actions == ds.actions);
    REQUIRE(again.rewards == ds.rewards);
  }
}

TEST_CASE("action noise strictly degrades the expert", "[pretrain]") {
  DemoSource noisy;
  noisy.noise_sigma = 0.3;
  RngStream a(substream_seed(42, "demo-clean"));
  RngStream b(substream_seed(42, "demo-noisy"));
  const auto clean = generate_demos<float>("pointmaze-large", DemoSource{}, 60, a);
  const auto degraded = generate_demos<float>("pointmaze-large", noisy, 60, b);
  REQUIRE(clean.success_rate >= 0.95);
  REQUIRE(degraded.success_rate < clean.success_rate);
  REQUIRE(degraded.noise_sigma == 0.3);
}

TEST_CASE("dataset actions outside env bounds are rejected", "[pretrain]") {
  auto fine = one_row_dataset(1.0000005f, -0.5f);  // inside the 1e-6 slack
  REQUIRE_NOTHROW(validate_dataset(fine));
  RngStream t(3);
  BcConfig quick;
  quick.epochs = 1;
  quick.batch_size = 1;
  quick.validation_fraction = 0.0;
  ActorArch tiny;
  tiny.hidden = {8};
  REQUIRE_NOTHROW(train_bc(fine, tiny, quick, t, 0));

  auto outside = one_row_dataset(1.00001f, -0.5f);
  REQUIRE_THROWS_MATCHES(validate_dataset(outside), IoError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("outside env bounds")));
  RngStream t2(3);
  REQUIRE_THROWS_AS(train_bc(outside, tiny, quick, t2, 0), IoError);
}

TEST_CASE("a single constant pair is memorized", "[pretrain]") {
  const auto ds = one_row_dataset(0.3f, -0.5f);
  BcConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 1;
  cfg.learning_rate = 1e-2;
  cfg.validation_fraction = 0.0;
  ActorArch arch;
  arch.hidden = {16};
  RngStream t(substream_seed(3, "bc-mem"));
  const auto res = train_bc(ds, arch, cfg, t, 0);
  RngStream unused(0);
  const auto a = act(res.actor, std::vector<float>{1.5f, 3.5f, 0.0f, 0.0f},
                     ActMode::Deterministic, unused);
  REQUIRE(std::abs(double(a.action[0]) - 0.3) <= 0.05);
  REQUIRE(std::abs(double(a.action[1]) + 0.5) <= 0.05);
  REQUIRE(res.report.validation_rows == 0);
  REQUIRE(res.report.final_validation_nll == res.report.final_train_nll);
}

TEST_CASE("training NLL decreases: 5-epoch moving average is monotone", "[pretrain]") {
  BcConfig cfg;
  cfg.epochs = 25;
  RngStream t(substream_seed(1, "bc"));
  const auto res = train_bc(umaze_demos(), ActorArch{}, cfg, t, 0);
  REQUIRE(res.report.train_nll.size() == 25);
  REQUIRE(res.report.train_nll.back() < res.report.train_nll.front());
  const auto ma = [&](std::size_t k) {
    double m = 0;
    for (std::size_t j = 0; j < 5; ++j) m += res.report.train_nll[k + j];
    return m / 5.0;
  };
  for (std::size_t k = 0; k + 5 < res.report.train_nll.size(); ++k)
    REQUIRE(ma(k + 1) <= ma(k) + 1e-9);
}

TEST_CASE("default recipe lands in the frozen headroom band", "[pretrain]") {
  // Frozen regression anchor: demo stream (7, "demo"), bc stream (1, "bc"),
  // shipped defaults, 50 deterministic rollouts. Measured 0.78 on the
  // reference build; the spec'd band is the regression target.
  RngStream t(substream_seed(1, "bc"));
  const auto res = train_bc(umaze_demos(), ActorArch{}, BcConfig{}, t, 50);
  REQUIRE(res.report.eval_episodes == 50);
  REQUIRE(res.report.eval_success_rate >= 0.4);
  REQUIRE(res.report.eval_success_rate <= 0.95);
  REQUIRE(res.report.train_rows == 12934);
  REQUIRE(res.report.validation_rows == 1437);
  REQUIRE(std::isfinite(res.report.final_validation_nll));
}

TEST_CASE("bc snapshot is actor-only and drives the policy-only pipeline", "[pretrain]") {
  BcConfig cfg;
  cfg.epochs = 1;
  RngStream t(substream_seed(9, "bc"));
  RngStream gs(substream_seed(9, "demo"));
  const auto demos = generate_demos<float>("pointmaze-u", DemoSource{}, 20, gs);
  const auto res = train_bc(demos, ActorArch{}, cfg, t, 0);

  REQUIRE(res.snapshot.kind == "snapshot");
  REQUIRE(res.snapshot.has_component("actor"));
  REQUIRE(res.snapshot.has_component("probe"));
  REQUIRE_FALSE(res.snapshot.has_component("critic"));
  REQUIRE_FALSE(res.snapshot.has_component("target"));
  REQUIRE_FALSE(res.snapshot.has_component("temperature"));
  REQUIRE_FALSE(res.snapshot.has_component("optimizer"));

  const std::string path = temp_path("bc_actor.snap");
  save_snapshot(path, res.snapshot);

  SECTION("read_actor reproduces the trained policy bit-for-bit") {
    const auto actor = read_actor<float>(load_snapshot_file(path));
    RngStream unused(0);
    for (int i = 0; i < 5; ++i) {
      const std::vector<float> s{float(i) * 0.3f, 3.3f, 0.1f, -0.1f};
      const auto want = act(res.actor, s, ActMode::Deterministic, unused);
      const auto got = act(actor, s, ActMode::Deterministic, unused);
      REQUIRE(got.action == want.action);
    }
  }

  SECTION("policy-only fine-tuning accepts it") {
    RunConfig rc;
    rc.env = "pointmaze-u";
    rc.mode = "porl";
    rc.seed = 5;
    rc.pre_sample_steps = 5;
    rc.max_env_steps = 10;
    rc.utd = 1;
    rc.batch_size = 8;
    rc.ensemble_size = 2;
    rc.reduction = "min-all";
    rc.actor_hidden = {8};
    rc.critic_hidden = {8};
    rc.replay_capacity = 1024;
    rc.eval_interval = 5;
    rc.eval_episodes = 2;
    rc.actor_snapshot = path;
    const auto run = run_train<float>(rc);
    REQUIRE(run.log.records.size() == 1);
    REQUIRE(run.counters.env_steps == 10);
  }

  SECTION("loading a critic from it fails cleanly") {
    SacConfig sc;
    sc.state_dim = 4;
    sc.action_dim = 2;
    sc.action_low = {-1.0, -1.0};
    sc.action_high = {1.0, 1.0};
    sc.actor_hidden = {8};
    sc.critic_hidden = {8};
    sc.ensemble_size = 2;
    sc.reduce_mode = ReduceMode::MinAll;
    RngStream init(3);
    auto agent = make_sac_agent<float>(sc, init);
    REQUIRE_THROWS_AS(load_snapshot_components(agent, load_snapshot_file(path),
                                               std::vector<std::string>{"critic"}),
                      IoError);
  }

  SECTION("probe tampering is caught on read") {
    auto snap = load_snapshot_file(path);
    bool touched = false;
    for (auto& t : snap.tensors)
      if (t.component == "actor" && t.name == "layer0/W") {
        t.data[0] += 0.5f;
        touched = true;
      }
    REQUIRE(touched);
    REQUIRE_THROWS_MATCHES(read_actor<float>(snap), IoError,
                           Catch::Matchers::MessageMatches(ContainsSubstring("probe mismatch")));
  }

  std::remove(path.c_str());
}

TEST_CASE("agent-snapshot demos replay the saved policy", "[pretrain]") {
  BcConfig cfg;
  cfg.epochs = 1;
  RngStream t(substream_seed(13, "bc"));
  RngStream gs(substream_seed(13, "demo"));
  const auto demos = generate_demos<float>("pointmaze-u", DemoSource{}, 10, gs);
  const auto res = train_bc(demos, ActorArch{}, cfg, t, 0);
  const std::string path = temp_path("bc_source.snap");
  save_snapshot(path, res.snapshot);

  DemoSource src;
  src.kind = "agent-snapshot";
  src.snapshot_path = path;
  RngStream roll(substream_seed(21, "demo"));
  const auto ds = generate_demos<float>("pointmaze-u", src, 3, roll);
  REQUIRE(ds.generator == "agent-snapshot");
  REQUIRE(ds.episodes == 3);

  // Oracle replica: with sigma = 0 the only stream draws are the resets, and
  // every action is the snapshot actor's deterministic output.
  const auto actor = read_actor<float>(load_snapshot_file(path));
  auto env = make_env<float>("pointmaze-u");
  RngStream replica(substream_seed(21, "demo"));
  std::size_t row = 0;
  for (int e = 0; e < 3; ++e) {
    std::vector<float> state = env->reset(replica);
    while (true) {
      for (std::size_t c = 0; c < state.size(); ++c) REQUIRE(ds.states(row, c) == state[c]);
      const auto a = act(actor, state, ActMode::Deterministic, replica);
      for (std::size_t c = 0; c < a.action.size(); ++c) REQUIRE(ds.actions(row, c) == a.action[c]);
      const auto sr = env->step(a.action);
      ++row;
      state = sr.next_state;
      if (sr.terminated || sr.truncated) break;
    }
  }
  REQUIRE(row == ds.size());

  SECTION("a snapshot for the wrong env is refused") {
    RngStream s2(4);
    REQUIRE_THROWS_MATCHES(
        generate_demos<float>("reacher", src, 1, s2), ConfigError,
        Catch::Matchers::MessageMatches(ContainsSubstring("does not match environment")));
  }
  std::remove(path.c_str());
}

TEST_CASE("bc training is a pure function of its stream", "[pretrain]") {
  RngStream gs(substream_seed(17, "demo"));
  const auto demos = generate_demos<float>("pointmaze-u", DemoSource{}, 15, gs);
  BcConfig cfg;
  cfg.epochs = 2;
  cfg.validation_fraction = 0.25;
  ActorArch arch;
  arch.hidden = {16};

  const auto run = [&](std::uint64_t seed) {
    RngStream t(substream_seed(seed, "bc"));
    return train_bc(demos, arch, cfg, t, 4);
  };
  const auto a = run(1), b = run(1), c = run(2);

  REQUIRE(a.report.train_nll == b.report.train_nll);
  REQUIRE(a.report.final_validation_nll == b.report.final_validation_nll);
  REQUIRE(a.report.eval_success_rate == b.report.eval_success_rate);
  REQUIRE(a.report.validation_rows == demos.size() / 4);

  const std::string pa = temp_path("bc_det_a.snap"), pb = temp_path("bc_det_b.snap"),
                    pc = temp_path("bc_det_c.snap");
  save_snapshot(pa, a.snapshot);
  save_snapshot(pb, b.snapshot);
  save_snapshot(pc, c.snapshot);
  REQUIRE(file_bytes(pa) == file_bytes(pb));
  REQUIRE(file_bytes(pa) != file_bytes(pc));
  std::remove(pa.c_str());
  std::remove(pb.c_str());
  std::remove(pc.c_str());
}
