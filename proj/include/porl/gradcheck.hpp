// Central finite-difference verification of the analytic gradients.
#pragma once

#include <string>
#include <vector>

#include "porl/common.hpp"
#include "porl/mlp.hpp"

namespace porl {

template <class T>
struct SquaredErrorLoss {
  Mat<T> target;

  T value(const Mat<T>& y) const {
    T s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const T d = y.data()[i] - target.data()[i];
      s += d * d;
    }
    return s / T(y.rows());
  }

  Mat<T> grad(const Mat<T>& y) const {
    Mat<T> g(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.size(); ++i)
      g.data()[i] = T(2) * (y.data()[i] - target.data()[i]) / T(y.rows());
    return g;
  }
};

template <class T>
struct GradCheckReport {
  struct TensorEntry {
    std::string name;
    T max_rel_error;
  };
  std::vector<TensorEntry> tensors;
  T max_rel_error = 0;
  bool pass = false;
};

// Probes every parameter with a central difference of the given loss and
// reports the worst relative discrepancy per tensor. O(P) loss evaluations;
// meant for small nets.
template <class T, class Loss>
GradCheckReport<T> gradient_check(Mlp<T>& net, const Mat<T>& input, const Loss& loss,
                                  T tolerance, T h = T(1e-5)) {
  ForwardCache<T> cache;
  const Mat<T> y = forward(net, input, &cache);
  Gradients<T> analytic = make_gradients(net);
  backward(net, cache, loss.grad(y), &analytic);

  GradCheckReport<T> report;
  std::vector<std::pair<T*, std::size_t>> ptensors;
  std::vector<std::string> names;
  for_each_tensor(net, [&](const std::string& n, T* p, std::size_t sz) {
    ptensors.push_back({p, sz});
    names.push_back(n);
  });
  std::vector<std::pair<T*, std::size_t>> gtensors;
  for_each_tensor(analytic, net, [&](const std::string&, T* p, std::size_t sz) {
    gtensors.push_back({p, sz});
  });

  for (std::size_t ti = 0; ti < ptensors.size(); ++ti) {
    T worst = 0;
    auto [p, n] = ptensors[ti];
    for (std::size_t i = 0; i < n; ++i) {
      const T keep = p[i];
      p[i] = keep + h;
      const T up = loss.value(forward(net, input));
      p[i] = keep - h;
      const T dn = loss.value(forward(net, input));
      p[i] = keep;
      const T fd = (up - dn) / (T(2) * h);
      const T an = gtensors[ti].first[i];
      const T denom = std::max({std::abs(fd), std::abs(an), T(1e-6)});
      worst = std::max(worst, std::abs(fd - an) / denom);
    }
    report.tensors.push_back({names[ti], worst});
    report.max_rel_error = std::max(report.max_rel_error, worst);
  }
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace porl
