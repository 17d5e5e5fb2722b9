#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "revsnn/tensor.hpp"

namespace revsnn {

/// Deterministic random source. Wraps std::mt19937_64 (whose output stream is
/// pinned by the standard) and derives uniform/normal variates with our own
/// arithmetic, so identical seeds give identical streams on every platform.
class Rng {
public:
  explicit Rng(u64 seed) : gen_(seed) {}

  u64 next_u64() { return gen_(); }

  /// Uniform in [0, 1), 53 bits of entropy.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; two uniforms consumed per variate.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  i64 below(i64 n) { return static_cast<i64>(gen_() % static_cast<u64>(n)); }

  template <typename S>
  void fill_normal(Tensor<S>& t, double mean, double stddev) {
    for (i64 i = 0; i < t.numel(); ++i) t[i] = static_cast<S>(mean + stddev * normal());
  }

  template <typename S>
  void fill_uniform(Tensor<S>& t, double lo, double hi) {
    for (i64 i = 0; i < t.numel(); ++i) t[i] = static_cast<S>(uniform(lo, hi));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (i64 i = static_cast<i64>(v.size()) - 1; i > 0; --i) {
      i64 j = below(i + 1);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

private:
  std::mt19937_64 gen_;
};

}  // namespace revsnn
