#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "travelgan/tensor.hpp"

namespace travelgan {

// splitmix64; used to derive independent sub-seeds from one run seed so that
// e.g. the domain-X sampler and the weight init never share a stream.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double normal(double mean, double stddev) {
    std::normal_distribution<double> d(mean, stddev);
    return d(engine_);
  }

  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(engine_);
  }

  // Uniform integer in [0, n); n > 0.
  int64_t below(int64_t n) {
    std::uniform_int_distribution<int64_t> d(0, n - 1);
    return d(engine_);
  }

  uint64_t raw() { return engine_(); }

  template <typename T>
  void fill_normal(Tensor<T>& t, double mean, double stddev) {
    for (T& v : t.data) v = static_cast<T>(normal(mean, stddev));
  }

  template <typename T>
  void fill_uniform(Tensor<T>& t, double lo, double hi) {
    for (T& v : t.data) v = static_cast<T>(uniform(lo, hi));
  }

  // Fisher-Yates; our own loop so the permutation for a given seed is pinned
  // by this code alone, not by the library's std::shuffle implementation.
  std::vector<int64_t> permutation(int64_t n) {
    std::vector<int64_t> p(static_cast<std::size_t>(n));
    for (int64_t i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    for (int64_t i = n - 1; i > 0; --i) {
      int64_t j = below(i + 1);
      std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    return p;
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace travelgan
