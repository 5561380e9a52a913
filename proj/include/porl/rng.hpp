// Seeded random streams. One master seed splits into named substreams so each
// consumer (env, replay sampling, init, epsilon branch, ...) draws from its own
// deterministic sequence regardless of what the others consume.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "porl/common.hpp"

namespace porl {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : gen_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1); 53-bit resolution, identical across standard library versions.
  double uniform01() { return double(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller; second value cached, so draws come in deterministic pairs.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01(), u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw NumericError("uniform_int: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return x % n;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Derives the seed of a named substream from the master seed.
inline std::uint64_t substream_seed(std::uint64_t master, std::string_view name) {
  return splitmix64(master ^ fnv1a(name));
}

inline RngStream substream(std::uint64_t master, std::string_view name) {
  return RngStream(substream_seed(master, name));
}

}  // namespace porl
