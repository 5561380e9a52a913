// Minimal differentiable MLP: ReLU hidden layers, optional LayerNorm on hidden
// pre-activations, identity output. Reverse-mode gradients are exact; the
// scalar type is a template parameter so tests can run the same code in 64-bit.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "porl/common.hpp"
#include "porl/rng.hpp"

namespace porl {

template <class T>
struct Mlp {
  static constexpr T layer_norm_eps = T(1e-5);

  std::vector<int> layer_sizes;             // input, hidden..., output
  std::vector<Mat<T>> weights;              // per layer, out x in
  std::vector<std::vector<T>> biases;       // per layer, out
  std::vector<std::uint8_t> layer_norm;     // per hidden layer
  std::vector<std::vector<T>> ln_gain;      // per hidden layer (empty when off)
  std::vector<std::vector<T>> ln_bias;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
      n += std::size_t(layer_sizes[i + 1]) * std::size_t(layer_sizes[i]) + layer_sizes[i + 1];
      if (i + 2 < layer_sizes.size() && layer_norm[i]) n += 2 * std::size_t(layer_sizes[i + 1]);
    }
    return n;
  }
};

// Gradient arrays, shape-congruent with the owning Mlp.
template <class T>
struct Gradients {
  std::vector<Mat<T>> weights;
  std::vector<std::vector<T>> biases;
  std::vector<std::vector<T>> ln_gain;
  std::vector<std::vector<T>> ln_bias;
};

template <class T>
Mlp<T> make_mlp(std::vector<int> layer_sizes, bool use_layer_norm) {
  if (layer_sizes.size() < 2) throw ShapeError("mlp: need at least input and output sizes");
  for (int s : layer_sizes)
    if (s <= 0) throw ShapeError("mlp: layer sizes must be positive");
  Mlp<T> net;
  net.layer_sizes = std::move(layer_sizes);
  const std::size_t layers = net.layer_sizes.size() - 1;
  net.weights.reserve(layers);
  for (std::size_t i = 0; i < layers; ++i) {
    net.weights.emplace_back(net.layer_sizes[i + 1], net.layer_sizes[i]);
    net.biases.emplace_back(net.layer_sizes[i + 1], T(0));
  }
  const std::size_t hidden = layers - 1;
  net.layer_norm.assign(hidden, use_layer_norm ? 1 : 0);
  net.ln_gain.resize(hidden);
  net.ln_bias.resize(hidden);
  for (std::size_t i = 0; i < hidden; ++i) {
    if (net.layer_norm[i]) {
      net.ln_gain[i].assign(net.layer_sizes[i + 1], T(1));
      net.ln_bias[i].assign(net.layer_sizes[i + 1], T(0));
    }
  }
  return net;
}

// Fan-in-scaled uniform init (He-style for ReLU). final_scale shrinks the last
// layer; critics use 1e-2 so Q starts near zero.
template <class T>
void init_mlp(Mlp<T>& net, RngStream& stream, double final_scale = 1.0) {
  const std::size_t layers = net.num_layers();
  for (std::size_t i = 0; i < layers; ++i) {
    const double bound = std::sqrt(6.0 / double(net.layer_sizes[i])) *
                         (i + 1 == layers ? final_scale : 1.0);
    Mat<T>& w = net.weights[i];
    for (std::size_t j = 0; j < w.size(); ++j) w.data()[j] = T(stream.uniform(-bound, bound));
    std::fill(net.biases[i].begin(), net.biases[i].end(), T(0));
  }
}

template <class T>
Gradients<T> make_gradients(const Mlp<T>& net) {
  Gradients<T> g;
  const std::size_t layers = net.num_layers();
  for (std::size_t i = 0; i < layers; ++i) {
    g.weights.emplace_back(net.weights[i].rows(), net.weights[i].cols());
    g.biases.emplace_back(net.biases[i].size(), T(0));
  }
  g.ln_gain.resize(net.ln_gain.size());
  g.ln_bias.resize(net.ln_bias.size());
  for (std::size_t i = 0; i < net.ln_gain.size(); ++i) {
    g.ln_gain[i].assign(net.ln_gain[i].size(), T(0));
    g.ln_bias[i].assign(net.ln_bias[i].size(), T(0));
  }
  return g;
}

template <class T>
void zero_gradients(Gradients<T>& g) {
  for (auto& w : g.weights) w.fill(T(0));
  for (auto& b : g.biases) std::fill(b.begin(), b.end(), T(0));
  for (auto& v : g.ln_gain) std::fill(v.begin(), v.end(), T(0));
  for (auto& v : g.ln_bias) std::fill(v.begin(), v.end(), T(0));
}

// Enumerates parameter tensors in a fixed order shared by Mlp, Gradients and
// optimizer state. fn(name, data, size).
template <class T, class Fn>
void for_each_tensor(Mlp<T>& net, Fn&& fn) {
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const std::string p = "layer" + std::to_string(i);
    fn(p + "/W", net.weights[i].data(), net.weights[i].size());
    fn(p + "/b", net.biases[i].data(), net.biases[i].size());
    if (i < net.layer_norm.size() && net.layer_norm[i]) {
      fn(p + "/ln_gain", net.ln_gain[i].data(), net.ln_gain[i].size());
      fn(p + "/ln_bias", net.ln_bias[i].data(), net.ln_bias[i].size());
    }
  }
}

template <class T, class Fn>
void for_each_tensor(const Mlp<T>& net, Fn&& fn) {
  for_each_tensor(const_cast<Mlp<T>&>(net), [&](const std::string& n, T* d, std::size_t s) {
    fn(n, const_cast<const T*>(d), s);
  });
}

template <class T, class Fn>
void for_each_tensor(Gradients<T>& g, const Mlp<T>& net, Fn&& fn) {
  for (std::size_t i = 0; i < g.weights.size(); ++i) {
    const std::string p = "layer" + std::to_string(i);
    fn(p + "/W", g.weights[i].data(), g.weights[i].size());
    fn(p + "/b", g.biases[i].data(), g.biases[i].size());
    if (i < net.layer_norm.size() && net.layer_norm[i]) {
      fn(p + "/ln_gain", g.ln_gain[i].data(), g.ln_gain[i].size());
      fn(p + "/ln_bias", g.ln_bias[i].data(), g.ln_bias[i].size());
    }
  }
}

// Intermediates for one forward pass, reused by the matching backward.
template <class T>
struct ForwardCache {
  std::vector<Mat<T>> acts;      // activations entering each layer; back() is the output
  std::vector<Mat<T>> zhat;      // normalized pre-activations (LN layers only)
  std::vector<std::vector<T>> inv_std;  // per row (LN layers only)
};

template <class T>
Mat<T> forward(const Mlp<T>& net, const Mat<T>& input, ForwardCache<T>* cache = nullptr) {
  require_shape(int(input.cols()) == net.input_dim(),
                "forward: input width " + std::to_string(input.cols()) + " != layer_sizes[0] " +
                    std::to_string(net.input_dim()));
  const std::size_t layers = net.num_layers();
  const std::size_t b = input.rows();
  if (cache) {
    cache->acts.assign(layers + 1, Mat<T>());
    cache->zhat.assign(layers > 0 ? layers - 1 : 0, Mat<T>());
    cache->inv_std.assign(layers > 0 ? layers - 1 : 0, {});
    cache->acts[0] = input;
  }
  Mat<T> x = input;
  for (std::size_t i = 0; i < layers; ++i) {
    const std::size_t h = net.weights[i].rows();
    Mat<T> z(b, h);
    matmul_nt(x, net.weights[i], z);
    for (std::size_t r = 0; r < b; ++r) {
      T* zr = z.row(r);
      const T* bias = net.biases[i].data();
      for (std::size_t j = 0; j < h; ++j) zr[j] += bias[j];
    }
    const bool is_hidden = i + 1 < layers;
    if (is_hidden) {
      if (net.layer_norm[i]) {
        Mat<T> zh(b, h);
        std::vector<T> isd(b);
        for (std::size_t r = 0; r < b; ++r) {
          T* zr = z.row(r);
          T mu = 0;
          for (std::size_t j = 0; j < h; ++j) mu += zr[j];
          mu /= T(h);
          T var = 0;
          for (std::size_t j = 0; j < h; ++j) {
            const T d = zr[j] - mu;
            var += d * d;
          }
          var /= T(h);
          const T inv = T(1) / std::sqrt(var + Mlp<T>::layer_norm_eps);
          isd[r] = inv;
          T* zhr = zh.row(r);
          const T* g = net.ln_gain[i].data();
          const T* lb = net.ln_bias[i].data();
          for (std::size_t j = 0; j < h; ++j) {
            zhr[j] = (zr[j] - mu) * inv;
            zr[j] = g[j] * zhr[j] + lb[j];
          }
        }
        if (cache) {
          cache->zhat[i] = std::move(zh);
          cache->inv_std[i] = std::move(isd);
        }
      }
      for (std::size_t j = 0; j < z.size(); ++j)
        z.data()[j] = z.data()[j] > T(0) ? z.data()[j] : T(0);
    }
    x = std::move(z);
    if (cache) cache->acts[i + 1] = x;
  }
  return x;
}

// Exact reverse-mode gradients of the scalar loss whose output-gradient is
// upstream. When input_grad is non-null the gradient w.r.t. the input batch is
// produced as well (needed for dQ/da paths). accumulate_params=false skips the
// parameter gradients entirely.
template <class T>
void backward(const Mlp<T>& net, const ForwardCache<T>& cache, const Mat<T>& upstream,
              Gradients<T>* grads, Mat<T>* input_grad = nullptr, bool accumulate_params = true) {
  const std::size_t layers = net.num_layers();
  require_shape(upstream.rows() == cache.acts[0].rows() &&
                    int(upstream.cols()) == net.output_dim(),
                "backward: upstream shape mismatch with forward output");
  const std::size_t b = upstream.rows();
  Mat<T> g = upstream;
  for (std::size_t li = layers; li-- > 0;) {
    const bool is_hidden = li + 1 < layers;
    const std::size_t h = net.weights[li].rows();
    if (is_hidden) {
      // through ReLU: post-activation stored in acts[li+1]
      const Mat<T>& post = cache.acts[li + 1];
      for (std::size_t j = 0; j < g.size(); ++j)
        if (!(post.data()[j] > T(0))) g.data()[j] = T(0);
      if (net.layer_norm[li]) {
        const Mat<T>& zh = cache.zhat[li];
        const std::vector<T>& isd = cache.inv_std[li];
        const T* gain = net.ln_gain[li].data();
        for (std::size_t r = 0; r < b; ++r) {
          T* gr = g.row(r);
          const T* zr = zh.row(r);
          if (grads && accumulate_params) {
            T* dgain = grads->ln_gain[li].data();
            T* dbias = grads->ln_bias[li].data();
            for (std::size_t j = 0; j < h; ++j) {
              dgain[j] += gr[j] * zr[j];
              dbias[j] += gr[j];
            }
          }
          T m1 = 0, m2 = 0;  // mean(dzhat), mean(dzhat*zhat)
          for (std::size_t j = 0; j < h; ++j) {
            const T dzh = gr[j] * gain[j];
            m1 += dzh;
            m2 += dzh * zr[j];
          }
          m1 /= T(h);
          m2 /= T(h);
          for (std::size_t j = 0; j < h; ++j)
            gr[j] = isd[r] * (gr[j] * gain[j] - m1 - zr[j] * m2);
        }
      }
    }
    if (grads && accumulate_params) {
      matmul_tn_acc(g, cache.acts[li], grads->weights[li]);
      T* db = grads->biases[li].data();
      for (std::size_t r = 0; r < b; ++r) {
        const T* gr = g.row(r);
        for (std::size_t j = 0; j < h; ++j) db[j] += gr[j];
      }
    }
    const bool need_dx = li > 0 || input_grad != nullptr;
    if (need_dx) {
      Mat<T> dx(b, net.weights[li].cols());
      matmul_nn(g, net.weights[li], dx);
      if (li == 0) {
        if (input_grad) *input_grad = std::move(dx);
        return;
      }
      g = std::move(dx);
    }
  }
}

// Convenience single-shot form matching the operation contract.
template <class T>
Gradients<T> backward(const Mlp<T>& net, const Mat<T>& input, const Mat<T>& upstream) {
  ForwardCache<T> cache;
  forward(net, input, &cache);
  Gradients<T> grads = make_gradients(net);
  backward(net, cache, upstream, &grads);
  return grads;
}

}  // namespace porl
