// Ring-buffer transition storage with uniform minibatch sampling.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "porl/common.hpp"
#include "porl/rng.hpp"

namespace porl {

template <class T>
struct Transition {
  std::vector<T> state;
  std::vector<T> action;
  T reward = 0;
  std::vector<T> next_state;
  bool done = false;  // terminal (goal/failure), never horizon truncation
};

// Column-major minibatch ready for network forward passes.
template <class T>
struct Batch {
  Mat<T> states, actions, next_states;
  std::vector<T> rewards;
  std::vector<T> dones;  // 0/1 mask

  std::size_t size() const { return states.rows(); }
};

template <class T>
class ReplayBuffer {
 public:
  ReplayBuffer(int state_dim, int action_dim, std::size_t capacity, RngStream stream)
      : sd_(state_dim), ad_(action_dim), cap_(capacity), stream_(std::move(stream)) {
    require_shape(state_dim > 0 && action_dim > 0, "replay: dims must be positive");
    require_shape(capacity >= 1, "replay: capacity must be at least 1");
    states_.resize(cap_ * std::size_t(sd_));
    actions_.resize(cap_ * std::size_t(ad_));
    next_states_.resize(cap_ * std::size_t(sd_));
    rewards_.resize(cap_);
    dones_.resize(cap_);
  }

  std::size_t size() const { return std::min(counter_, cap_); }
  std::size_t capacity() const { return cap_; }
  std::uint64_t pushes() const { return counter_; }
  int state_dim() const { return sd_; }
  int action_dim() const { return ad_; }

  void push(const Transition<T>& t) {
    require_shape(int(t.state.size()) == sd_ && int(t.next_state.size()) == sd_,
                  "replay: state dimension mismatch");
    require_shape(int(t.action.size()) == ad_, "replay: action dimension mismatch");
    const std::size_t at = std::size_t(counter_ % cap_);
    std::copy(t.state.begin(), t.state.end(), states_.begin() + long(at * std::size_t(sd_)));
    std::copy(t.action.begin(), t.action.end(), actions_.begin() + long(at * std::size_t(ad_)));
    std::copy(t.next_state.begin(), t.next_state.end(),
              next_states_.begin() + long(at * std::size_t(sd_)));
    rewards_[at] = t.reward;
    dones_[at] = t.done ? 1 : 0;
    counter_ += 1;
  }

  Transition<T> get(std::size_t slot) const {
    require_shape(slot < size(), "replay: slot out of range");
    Transition<T> t;
    t.state.assign(states_.begin() + long(slot * std::size_t(sd_)),
                   states_.begin() + long((slot + 1) * std::size_t(sd_)));
    t.action.assign(actions_.begin() + long(slot * std::size_t(ad_)),
                    actions_.begin() + long((slot + 1) * std::size_t(ad_)));
    t.next_state.assign(next_states_.begin() + long(slot * std::size_t(sd_)),
                        next_states_.begin() + long((slot + 1) * std::size_t(sd_)));
    t.reward = rewards_[slot];
    t.done = dones_[slot] != 0;
    return t;
  }

  // Storage slots of the most recent n transitions, oldest first.
  std::vector<std::size_t> latest_window(std::size_t n) const {
    require_shape(n >= 1, "replay: window must be at least 1");
    const std::size_t have = std::min(n, size());
    std::vector<std::size_t> slots(have);
    for (std::size_t i = 0; i < have; ++i)
      slots[i] = std::size_t((counter_ - have + i) % cap_);
    return slots;
  }

  Batch<T> sample_batch(std::size_t batch_size) {
    if (size() == 0) throw UsageError("replay: sample from empty buffer");
    require_shape(batch_size >= 1, "replay: batch size must be at least 1");
    Batch<T> b = make_batch(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i)
      fill_row(b, i, std::size_t(stream_.uniform_int(size())));
    return b;
  }

  std::vector<Batch<T>> sample_batches(std::size_t batch_size, std::size_t count) {
    std::vector<Batch<T>> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(sample_batch(batch_size));
    return out;
  }

  // Uniform batch over an explicit slot pool (e.g. a latest_window view).
  Batch<T> sample_batch_from(const std::vector<std::size_t>& pool, std::size_t batch_size) {
    if (pool.empty()) throw UsageError("replay: sample from empty slot pool");
    Batch<T> b = make_batch(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i)
      fill_row(b, i, pool[std::size_t(stream_.uniform_int(pool.size()))]);
    return b;
  }

  Batch<T> make_batch(std::size_t batch_size) const {
    Batch<T> b;
    b.states = Mat<T>(batch_size, std::size_t(sd_));
    b.actions = Mat<T>(batch_size, std::size_t(ad_));
    b.next_states = Mat<T>(batch_size, std::size_t(sd_));
    b.rewards.assign(batch_size, T(0));
    b.dones.assign(batch_size, T(0));
    return b;
  }

  void fill_row(Batch<T>& b, std::size_t row, std::size_t slot) const {
    std::copy(states_.begin() + long(slot * std::size_t(sd_)),
              states_.begin() + long((slot + 1) * std::size_t(sd_)), b.states.row(row));
    std::copy(actions_.begin() + long(slot * std::size_t(ad_)),
              actions_.begin() + long((slot + 1) * std::size_t(ad_)), b.actions.row(row));
    std::copy(next_states_.begin() + long(slot * std::size_t(sd_)),
              next_states_.begin() + long((slot + 1) * std::size_t(sd_)), b.next_states.row(row));
    b.rewards[row] = rewards_[slot];
    b.dones[row] = T(dones_[slot]);
  }

 private:
  int sd_, ad_;
  std::size_t cap_;
  RngStream stream_;
  std::uint64_t counter_ = 0;
  std::vector<T> states_, actions_, next_states_, rewards_;
  std::vector<std::uint8_t> dones_;
};

// Half online, half offline, each half uniform over its buffer.
template <class T>
Batch<T> sample_symmetric(ReplayBuffer<T>& online, ReplayBuffer<T>& offline,
                          std::size_t batch_size) {
  if (batch_size % 2 != 0) throw ConfigError("symmetric sampling needs an even batch size");
  if (online.size() == 0 || offline.size() == 0)
    throw UsageError("symmetric sampling from an empty buffer");
  require_shape(online.state_dim() == offline.state_dim() &&
                    online.action_dim() == offline.action_dim(),
                "symmetric sampling: buffer dimension mismatch");
  const std::size_t half = batch_size / 2;
  const Batch<T> a = online.sample_batch(half);
  const Batch<T> b = offline.sample_batch(half);
  Batch<T> out = online.make_batch(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const Batch<T>& src = i < half ? a : b;
    const std::size_t j = i < half ? i : i - half;
    std::copy(src.states.row(j), src.states.row(j) + src.states.cols(), out.states.row(i));
    std::copy(src.actions.row(j), src.actions.row(j) + src.actions.cols(), out.actions.row(i));
    std::copy(src.next_states.row(j), src.next_states.row(j) + src.next_states.cols(),
              out.next_states.row(i));
    out.rewards[i] = src.rewards[j];
    out.dones[i] = src.dones[j];
  }
  return out;
}

// Concatenation helper (the policy step trains on the union of the TD batches).
template <class T>
Batch<T> concat_batches(const std::vector<Batch<T>>& batches) {
  require_shape(!batches.empty(), "concat_batches: nothing to concatenate");
  std::size_t rows = 0;
  for (const auto& b : batches) rows += b.size();
  Batch<T> out;
  out.states = Mat<T>(rows, batches[0].states.cols());
  out.actions = Mat<T>(rows, batches[0].actions.cols());
  out.next_states = Mat<T>(rows, batches[0].next_states.cols());
  out.rewards.assign(rows, T(0));
  out.dones.assign(rows, T(0));
  std::size_t at = 0;
  for (const auto& b : batches) {
    for (std::size_t i = 0; i < b.size(); ++i, ++at) {
      std::copy(b.states.row(i), b.states.row(i) + b.states.cols(), out.states.row(at));
      std::copy(b.actions.row(i), b.actions.row(i) + b.actions.cols(), out.actions.row(at));
      std::copy(b.next_states.row(i), b.next_states.row(i) + b.next_states.cols(),
                out.next_states.row(at));
      out.rewards[at] = b.rewards[i];
      out.dones[at] = b.dones[i];
    }
  }
  return out;
}

}  // namespace porl
