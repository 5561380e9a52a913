#include <catch2/catch_amalgamated.hpp>

#include <deque>
#include <set>
#include <vector>

#include "porl/replay.hpp"
#include "porl/rng.hpp"
#include "support/stats.hpp"

using namespace porl;

namespace {

// Transition whose reward tags its identity.
Transition<float> tagged(int id) {
  Transition<float> t;
  t.state = {float(id), 0.0f};
  t.action = {float(-id)};
  t.reward = float(id);
  t.next_state = {float(id), 1.0f};
  t.done = id % 2 == 0;
  return t;
}

ReplayBuffer<float> make_buffer(std::size_t capacity, std::uint64_t seed = 1) {
  return ReplayBuffer<float>(2, 1, capacity, substream(seed, "replay"));
}

}  // namespace

TEST_CASE("push then sample returns the transition intact", "[replay]") {
  auto buf = make_buffer(8);
  REQUIRE_THROWS_AS(buf.sample_batch(1), UsageError);
  buf.push(tagged(7));
  const Batch<float> b = buf.sample_batch(1);
  REQUIRE(b.size() == 1);
  REQUIRE(b.states(0, 0) == 7.0f);
  REQUIRE(b.actions(0, 0) == -7.0f);
  REQUIRE(b.rewards[0] == 7.0f);
  REQUIRE(b.next_states(0, 1) == 1.0f);
  REQUIRE(b.dones[0] == 0.0f);  // id 7 odd

  const Transition<float> back = buf.get(0);
  REQUIRE(back.state == tagged(7).state);
  REQUIRE(back.done == tagged(7).done);

  Transition<float> bad = tagged(1);
  bad.state = {1.0f};
  REQUIRE_THROWS_AS(buf.push(bad), ShapeError);
  bad = tagged(1);
  bad.action = {1.0f, 2.0f};
  REQUIRE_THROWS_AS(buf.push(bad), ShapeError);
}

TEST_CASE("eviction is FIFO against a reference list model", "[replay]") {
  auto buf = make_buffer(3);
  for (int i = 1; i <= 4; ++i) buf.push(tagged(i));
  std::multiset<float> contents;
  for (std::size_t s = 0; s < buf.size(); ++s) contents.insert(buf.get(s).reward);
  REQUIRE(contents == std::multiset<float>{2.0f, 3.0f, 4.0f});  // 1 evicted

  // Arbitrary lengths against a deque capped at capacity.
  auto buf2 = make_buffer(7);
  std::deque<int> model;
  RngStream s = substream(5, "pushes");
  for (int step = 0; step < 200; ++step) {
    const int id = int(s.uniform_int(1000));
    buf2.push(tagged(id));
    model.push_back(id);
    if (model.size() > 7) model.pop_front();
    std::multiset<int> got, want(model.begin(), model.end());
    for (std::size_t slot = 0; slot < buf2.size(); ++slot)
      got.insert(int(buf2.get(slot).reward));
    REQUIRE(got == want);
  }
}

TEST_CASE("singleton sampling is uniform over contents", "[replay]") {
  const int items = 10000, draws = 100000;
  ReplayBuffer<float> buf(2, 1, std::size_t(items), substream(11, "replay"));
  for (int i = 0; i < items; ++i) buf.push(tagged(i));
  std::vector<int> counts(std::size_t(items), 0);
  for (int d = 0; d < draws; ++d) {
    const Batch<float> b = buf.sample_batch(1);
    counts[std::size_t(b.rewards[0])] += 1;
  }
  REQUIRE(teststats::chi_square_uniform(counts) > 0.01);
}

TEST_CASE("batch draws are deterministic given the stream seed", "[replay]") {
  auto draw = [] {
    auto buf = make_buffer(64, 42);
    for (int i = 0; i < 50; ++i) buf.push(tagged(i));
    std::vector<float> seen;
    for (const auto& b : buf.sample_batches(16, 4))
      seen.insert(seen.end(), b.rewards.begin(), b.rewards.end());
    return seen;
  };
  REQUIRE(draw() == draw());

  // full-size batch over 3 distinct items only contains those items
  auto buf = make_buffer(4);
  for (int i = 1; i <= 3; ++i) buf.push(tagged(i));
  const Batch<float> b = buf.sample_batch(3);
  for (float r : b.rewards) REQUIRE((r == 1.0f || r == 2.0f || r == 3.0f));
}

TEST_CASE("inclusion frequency over many batches matches binomial", "[replay]") {
  const int items = 20000;
  ReplayBuffer<float> buf(2, 1, std::size_t(items), substream(13, "replay"));
  for (int i = 0; i < items; ++i) buf.push(tagged(i));
  std::vector<int> counts(std::size_t(items), 0);
  const auto batches = buf.sample_batches(512, 16);
  std::size_t total = 0;
  for (const auto& b : batches)
    for (float r : b.rewards) {
      counts[std::size_t(r)] += 1;
      total += 1;
    }
  REQUIRE(total == 512 * 16);

  // Each item's occurrence count is Binomial(8192, 1/20000). Virtually all
  // items should sit within 3 sigma; a uniform chi-square must also pass.
  const double p = 1.0 / double(items);
  int outside = 0;
  for (int c : counts)
    if (std::abs(teststats::binomial_z(std::size_t(c), total, p)) > 3.0) outside += 1;
  REQUIRE(double(outside) / double(items) < 0.01);

  // Chi-square needs expected counts >= 5; group items 50 at a time.
  std::vector<int> grouped(400, 0);
  for (int i = 0; i < items; ++i) grouped[std::size_t(i / 50)] += counts[std::size_t(i)];
  REQUIRE(teststats::chi_square_uniform(grouped) > 0.01);
}

TEST_CASE("symmetric sampling takes exactly half from each buffer", "[replay]") {
  ReplayBuffer<float> online(2, 1, 128, substream(3, "on"));
  ReplayBuffer<float> offline(2, 1, 128, substream(3, "off"));
  for (int i = 0; i < 100; ++i) {
    Transition<float> t = tagged(i);
    t.reward = 1.0f;  // online marker
    online.push(t);
    t.reward = 0.0f;  // offline marker
    offline.push(t);
  }

  const Batch<float> two = sample_symmetric(online, offline, 2);
  REQUIRE(two.rewards[0] + two.rewards[1] == 1.0f);

  const Batch<float> big = sample_symmetric(online, offline, 256);
  float sum = 0;
  for (float r : big.rewards) sum += r;
  REQUIRE(sum == 128.0f);  // exactly half ones

  REQUIRE_THROWS_AS(sample_symmetric(online, offline, 5), ConfigError);
  ReplayBuffer<float> empty(2, 1, 8, substream(3, "e"));
  REQUIRE_THROWS_AS(sample_symmetric(online, empty, 4), UsageError);
  REQUIRE_THROWS_AS(sample_symmetric(empty, offline, 4), UsageError);
}

TEST_CASE("symmetric draws are uniform within each buffer", "[replay]") {
  const int items = 50;
  ReplayBuffer<float> online(2, 1, std::size_t(items), substream(29, "on"));
  ReplayBuffer<float> offline(2, 1, std::size_t(items), substream(29, "off"));
  for (int i = 0; i < items; ++i) {
    online.push(tagged(i));
    Transition<float> t = tagged(i);
    t.reward = float(1000 + i);
    offline.push(t);
  }
  std::vector<int> on_counts(items, 0), off_counts(items, 0);
  for (int rep = 0; rep < 500; ++rep) {
    const Batch<float> b = sample_symmetric(online, offline, 40);
    for (float r : b.rewards) {
      if (r >= 1000)
        off_counts[std::size_t(r) - 1000] += 1;
      else
        on_counts[std::size_t(r)] += 1;
    }
  }
  REQUIRE(teststats::chi_square_uniform(on_counts) > 0.01);
  REQUIRE(teststats::chi_square_uniform(off_counts) > 0.01);
}

TEST_CASE("latest window follows insertion order through wraparound", "[replay]") {
  auto buf = make_buffer(5);
  buf.push(tagged(1));
  buf.push(tagged(2));
  buf.push(tagged(3));
  auto win = buf.latest_window(1);
  REQUIRE(win.size() == 1);
  REQUIRE(buf.get(win[0]).reward == 3.0f);

  win = buf.latest_window(10);  // n >= size -> whole buffer
  REQUIRE(win.size() == 3);
  REQUIRE(buf.get(win[0]).reward == 1.0f);
  REQUIRE(buf.get(win[2]).reward == 3.0f);

  // Wraparound against an exhaustive insertion-order simulation.
  auto buf2 = make_buffer(5);
  std::deque<int> model;
  for (int i = 1; i <= 8; ++i) {
    buf2.push(tagged(i));
    model.push_back(i);
    if (model.size() > 5) model.pop_front();
  }
  win = buf2.latest_window(2);
  REQUIRE(buf2.get(win[0]).reward == float(model[model.size() - 2]));
  REQUIRE(buf2.get(win[1]).reward == float(model[model.size() - 1]));

  for (std::size_t n = 1; n <= 8; ++n) {
    win = buf2.latest_window(n);
    REQUIRE(win.size() == std::min<std::size_t>(n, 5));
    for (std::size_t k = 0; k < win.size(); ++k) {
      const float want = float(model[model.size() - win.size() + k]);
      REQUIRE(buf2.get(win[k]).reward == want);
    }
  }

  // Sampling restricted to a window only yields window members.
  const auto pool = buf2.latest_window(2);
  const Batch<float> b = buf2.sample_batch_from(pool, 64);
  for (float r : b.rewards) REQUIRE((r == 7.0f || r == 8.0f));
}

TEST_CASE("done flags survive storage exactly", "[replay]") {
  auto buf = make_buffer(16);
  for (int i = 0; i < 10; ++i) buf.push(tagged(i));
  for (std::size_t s = 0; s < buf.size(); ++s)
    REQUIRE(buf.get(s).done == (int(buf.get(s).reward) % 2 == 0));
}
