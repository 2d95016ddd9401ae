// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.
#pragma once

#include <cstdint>
#include <random>

#include "gspn/tensor.hpp"

namespace gspn {

// mt19937_64 with hand-rolled value mappings. std::uniform_real_distribution
// is implementation-defined, which would break byte-stable outputs across
// standard libraries; the raw engine stream is portable.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [lo, hi].
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(gen_() % static_cast<uint64_t>(hi - lo + 1));
  }

 private:
  std::mt19937_64 gen_;
};

template <typename T>
void fill_uniform(Tensor4<T>& t, Rng& rng, double lo, double hi) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
}

template <typename T>
Tensor4<T> random_tensor(Dims4 dims, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor4<T> t(dims);
  fill_uniform(t, rng, lo, hi);
  return t;
}

}  // namespace gspn
