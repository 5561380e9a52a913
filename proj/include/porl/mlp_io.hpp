// Store and restore Mlp parameters inside a TensorFile. Payloads are always
// f32 on disk; the in-memory scalar type converts on the way through.
#pragma once

#include <sstream>
#include <string>

#include "porl/mlp.hpp"
#include "porl/tensor_file.hpp"

namespace porl {

template <class T>
void append_mlp(TensorFile& tf, const std::string& component, const Mlp<T>& net) {
  {
    std::ostringstream arch;
    for (std::size_t i = 0; i < net.layer_sizes.size(); ++i) {
      if (i) arch << " ";
      arch << net.layer_sizes[i];
    }
    tf.set_meta("arch." + component, arch.str());
  }
  {
    std::ostringstream ln;
    for (std::size_t i = 0; i < net.layer_norm.size(); ++i) {
      if (i) ln << " ";
      ln << (net.layer_norm[i] ? 1 : 0);
    }
    tf.set_meta("layernorm." + component, ln.str());
  }
  for_each_tensor(net, [&](const std::string& name, const T* data, std::size_t n) {
    std::vector<std::size_t> dims{n};
    // Keep 2-d shape for weight matrices so manifests stay self-describing.
    if (name.size() > 2 && name.substr(name.size() - 2) == "/W") {
      std::size_t layer = std::size_t(std::stoi(name.substr(5)));
      dims = {std::size_t(net.layer_sizes[layer + 1]), std::size_t(net.layer_sizes[layer])};
    }
    TensorEntry& e = tf.add(component, name, dims);
    for (std::size_t i = 0; i < n; ++i) e.data[i] = float(data[i]);
  });
}

template <class T>
Mlp<T> read_mlp(const TensorFile& tf, const std::string& component) {
  const std::string* arch = tf.meta_value("arch." + component);
  if (!arch) throw IoError("snapshot missing architecture for component " + component);
  std::vector<int> sizes;
  {
    std::istringstream ls(*arch);
    int v;
    while (ls >> v) sizes.push_back(v);
  }
  if (sizes.size() < 2) throw IoError("bad architecture metadata for component " + component);
  bool use_ln = false;
  std::vector<int> ln_flags;
  if (const std::string* ln = tf.meta_value("layernorm." + component)) {
    std::istringstream ls(*ln);
    int v;
    while (ls >> v) ln_flags.push_back(v);
    for (int f : ln_flags) use_ln = use_ln || f != 0;
  }
  Mlp<T> net = make_mlp<T>(sizes, use_ln);
  if (!ln_flags.empty()) {
    if (ln_flags.size() != net.layer_norm.size())
      throw IoError("layernorm metadata length mismatch for component " + component);
    for (std::size_t i = 0; i < ln_flags.size(); ++i) {
      net.layer_norm[i] = ln_flags[i] != 0;
      if (net.layer_norm[i] && net.ln_gain[i].empty()) {
        net.ln_gain[i].assign(std::size_t(net.layer_sizes[i + 1]), T(1));
        net.ln_bias[i].assign(std::size_t(net.layer_sizes[i + 1]), T(0));
      }
    }
  }
  for_each_tensor(net, [&](const std::string& name, T* data, std::size_t n) {
    const TensorEntry* e = tf.find(component, name);
    if (!e) throw IoError("snapshot missing tensor " + component + "/" + name);
    if (e->numel() != n)
      throw ShapeError("snapshot tensor " + component + "/" + name + " has wrong size");
    for (std::size_t i = 0; i < n; ++i) data[i] = T(e->data[i]);
  });
  return net;
}

}  // namespace porl
