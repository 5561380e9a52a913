// Shared basics: dense row-major matrices, error types, small utilities.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace porl {

static_assert(std::endian::native == std::endian::little,
              "serialized payloads are little-endian; big-endian hosts are unsupported");

// Configuration errors name the offending key/constraint; the CLI maps each
// class to a distinct exit code.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

// Dense row-major matrix. Value semantics; zero-initialized.
template <class T>
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), d_(rows * cols, T(0)) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return d_.size(); }
  bool empty() const { return d_.empty(); }

  T* data() { return d_.data(); }
  const T* data() const { return d_.data(); }
  T* row(std::size_t i) { return d_.data() + i * cols_; }
  const T* row(std::size_t i) const { return d_.data() + i * cols_; }
  T& operator()(std::size_t i, std::size_t j) { return d_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return d_[i * cols_ + j]; }

  void fill(T v) { std::fill(d_.begin(), d_.end(), v); }

  bool operator==(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_ && d_ == o.d_; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<T> d_;
};

// y = x . w^T, w stored out-major (out x in). The hot loop of every forward pass.
template <class T>
inline void matmul_nt(const Mat<T>& x, const Mat<T>& w, Mat<T>& y) {
  const std::size_t b = x.rows(), k = x.cols(), n = w.rows();
  for (std::size_t i = 0; i < b; ++i) {
    const T* xi = x.row(i);
    T* yi = y.row(i);
    for (std::size_t o = 0; o < n; ++o) {
      const T* wo = w.row(o);
      T s = 0;
      for (std::size_t j = 0; j < k; ++j) s += wo[j] * xi[j];
      yi[o] = s;
    }
  }
}

// dx = dy . w  (b x n) * (n x k)
template <class T>
inline void matmul_nn(const Mat<T>& dy, const Mat<T>& w, Mat<T>& dx) {
  const std::size_t b = dy.rows(), n = dy.cols(), k = w.cols();
  dx.fill(T(0));
  for (std::size_t i = 0; i < b; ++i) {
    const T* gi = dy.row(i);
    T* di = dx.row(i);
    for (std::size_t o = 0; o < n; ++o) {
      const T g = gi[o];
      if (g == T(0)) continue;
      const T* wo = w.row(o);
      for (std::size_t j = 0; j < k; ++j) di[j] += g * wo[j];
    }
  }
}

// dw += dy^T . x  (n x b) * (b x k)
template <class T>
inline void matmul_tn_acc(const Mat<T>& dy, const Mat<T>& x, Mat<T>& dw) {
  const std::size_t b = dy.rows(), n = dy.cols(), k = x.cols();
  for (std::size_t i = 0; i < b; ++i) {
    const T* gi = dy.row(i);
    const T* xi = x.row(i);
    for (std::size_t o = 0; o < n; ++o) {
      const T g = gi[o];
      if (g == T(0)) continue;
      T* wo = dw.row(o);
      for (std::size_t j = 0; j < k; ++j) wo[j] += g * xi[j];
    }
  }
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

template <class T>
inline bool all_finite(const T* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

}  // namespace porl
