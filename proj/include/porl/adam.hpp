// Adam with bias correction, for Mlp parameters and for lone scalars.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "porl/common.hpp"
#include "porl/mlp.hpp"

namespace porl {

template <class T>
struct AdamConfig {
  T learning_rate = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

template <class T>
struct AdamState {
  AdamConfig<T> cfg;
  std::vector<std::vector<T>> m, v;  // aligned with for_each_tensor order
  std::uint64_t step = 0;
};

template <class T>
AdamState<T> make_adam_state(const Mlp<T>& net, AdamConfig<T> cfg) {
  AdamState<T> st;
  st.cfg = cfg;
  for_each_tensor(net, [&](const std::string&, const T*, std::size_t n) {
    st.m.emplace_back(n, T(0));
    st.v.emplace_back(n, T(0));
  });
  return st;
}

template <class T>
void adam_step(Mlp<T>& params, const Gradients<T>& grads, AdamState<T>& st) {
  struct Slot {
    std::string name;
    T* data;
    std::size_t n;
  };
  std::vector<Slot> ps, gs;
  for_each_tensor(params, [&](const std::string& name, T* p, std::size_t n) {
    ps.push_back({name, p, n});
  });
  auto& g = const_cast<Gradients<T>&>(grads);
  for_each_tensor(g, params, [&](const std::string& name, T* p, std::size_t n) {
    gs.push_back({name, p, n});
  });
  require_shape(ps.size() == gs.size() && ps.size() == st.m.size(),
                "adam_step: tensor count mismatch between params, grads and state");

  st.step += 1;
  const T b1 = st.cfg.beta1, b2 = st.cfg.beta2;
  const T bc1 = T(1) - std::pow(b1, T(st.step));
  const T bc2 = T(1) - std::pow(b2, T(st.step));
  const T lr = st.cfg.learning_rate, eps = st.cfg.eps;
  for (std::size_t ti = 0; ti < ps.size(); ++ti) {
    require_shape(ps[ti].n == gs[ti].n && ps[ti].name == gs[ti].name,
                  "adam_step: gradient shape mismatch at " + ps[ti].name);
    if (!all_finite(gs[ti].data, gs[ti].n))
      throw NumericError("adam_step: non-finite gradient in tensor " + ps[ti].name);
    T* p = ps[ti].data;
    const T* gm = gs[ti].data;
    T* ms = st.m[ti].data();
    T* vs = st.v[ti].data();
    for (std::size_t i = 0; i < ps[ti].n; ++i) {
      const T gr = gm[i];
      ms[i] = b1 * ms[i] + (T(1) - b1) * gr;
      vs[i] = b2 * vs[i] + (T(1) - b2) * gr * gr;
      const T mhat = ms[i] / bc1;
      const T vhat = vs[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// Scalar variant (temperature's log-alpha).
template <class T>
struct AdamScalar {
  AdamConfig<T> cfg;
  T m = 0, v = 0;
  std::uint64_t step = 0;

  void update(T& param, T grad) {
    if (!std::isfinite(grad)) throw NumericError("adam: non-finite scalar gradient");
    step += 1;
    m = cfg.beta1 * m + (T(1) - cfg.beta1) * grad;
    v = cfg.beta2 * v + (T(1) - cfg.beta2) * grad * grad;
    const T mhat = m / (T(1) - std::pow(cfg.beta1, T(step)));
    const T vhat = v / (T(1) - std::pow(cfg.beta2, T(step)));
    param -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
  }
};

}  // namespace porl
