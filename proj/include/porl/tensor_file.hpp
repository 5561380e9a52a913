// Manifest + payload container used by both parameter snapshots and columnar
// datasets: a text manifest (names, shapes, dtype, component tags, metadata)
// followed by raw little-endian f32 payloads in manifest order.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "porl/common.hpp"

namespace porl {

constexpr const char* kTensorFileMagic = "porl-tensor-file";
constexpr int kTensorFileVersion = 1;

struct TensorEntry {
  std::string component;  // actor | critic | target | temperature | optimizer | probe | data
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<float> data;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

struct TensorFile {
  std::string kind;  // "snapshot" or "dataset"
  std::vector<std::pair<std::string, std::string>> meta;  // ordered; keys unique
  std::vector<TensorEntry> tensors;

  void set_meta(const std::string& key, const std::string& value) {
    for (auto& kv : meta)
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    meta.emplace_back(key, value);
  }

  const std::string* meta_value(const std::string& key) const {
    for (const auto& kv : meta)
      if (kv.first == key) return &kv.second;
    return nullptr;
  }

  TensorEntry& add(std::string component, std::string name, std::vector<std::size_t> dims) {
    TensorEntry e;
    e.component = std::move(component);
    e.name = std::move(name);
    e.dims = std::move(dims);
    e.data.assign(e.numel(), 0.0f);
    tensors.push_back(std::move(e));
    return tensors.back();
  }

  const TensorEntry* find(const std::string& component, const std::string& name) const {
    for (const auto& t : tensors)
      if (t.component == component && t.name == name) return &t;
    return nullptr;
  }

  bool has_component(const std::string& component) const {
    for (const auto& t : tensors)
      if (t.component == component) return true;
    return false;
  }
};

inline void save_tensor_file(const std::string& path, const TensorFile& tf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  std::ostringstream head;
  head << kTensorFileMagic << " v" << kTensorFileVersion << "\n";
  head << "kind " << tf.kind << "\n";
  for (const auto& kv : tf.meta) head << "meta " << kv.first << " " << kv.second << "\n";
  for (const auto& t : tf.tensors) {
    head << "tensor " << t.component << " " << t.name << " f32 " << t.dims.size();
    for (auto d : t.dims) head << " " << d;
    head << "\n";
  }
  head << "end\n";
  out << head.str();
  for (const auto& t : tf.tensors) {
    if (t.data.size() != t.numel())
      throw ShapeError("tensor " + t.name + ": payload size does not match dims");
    out.write(reinterpret_cast<const char*>(t.data.data()),
              std::streamsize(t.data.size() * sizeof(float)));
  }
  if (!out) throw IoError("short write: " + path);
}

inline TensorFile load_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  TensorFile tf;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty tensor file: " + path);
  {
    std::istringstream ls(line);
    std::string magic, ver;
    ls >> magic >> ver;
    if (magic != kTensorFileMagic) throw IoError(path + ": not a porl tensor file");
    if (ver != "v" + std::to_string(kTensorFileVersion))
      throw IoError(path + ": unsupported format version '" + ver + "'");
  }
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      saw_end = true;
      break;
    }
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "kind") {
      ls >> tf.kind;
    } else if (tag == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      tf.meta.emplace_back(key, value);
    } else if (tag == "tensor") {
      TensorEntry e;
      std::string dtype;
      std::size_t rank = 0;
      ls >> e.component >> e.name >> dtype >> rank;
      if (!ls || dtype != "f32") throw IoError(path + ": bad tensor line: " + line);
      e.dims.resize(rank);
      for (auto& d : e.dims) ls >> d;
      if (!ls) throw IoError(path + ": bad tensor dims: " + line);
      tf.tensors.push_back(std::move(e));
    } else {
      throw IoError(path + ": unknown manifest line: " + line);
    }
  }
  if (!saw_end) throw IoError(path + ": truncated manifest (no end marker)");
  for (auto& t : tf.tensors) {
    t.data.resize(t.numel());
    in.read(reinterpret_cast<char*>(t.data.data()), std::streamsize(t.data.size() * sizeof(float)));
    if (std::size_t(in.gcount()) != t.data.size() * sizeof(float))
      throw IoError(path + ": truncated payload for tensor " + t.name);
  }
  return tf;
}

}  // namespace porl
