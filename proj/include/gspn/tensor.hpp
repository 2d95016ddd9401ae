// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.
//
// Minimal dense 4D tensor. Layout is fixed: row-major with the width axis
// fastest-varying, i.e. element (b,c,h,w) lives at ((b*C + c)*H + h)*W + w.
// The scan engine, the dense oracle and the serialization format all assume
// exactly this layout; there are no strides or views.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gspn/errors.hpp"

namespace gspn {

enum class DType : uint8_t { kF32 = 0, kF64 = 1 };

template <typename T>
struct dtype_of;
template <>
struct dtype_of<float> {
  static constexpr DType value = DType::kF32;
};
template <>
struct dtype_of<double> {
  static constexpr DType value = DType::kF64;
};

struct Dims4 {
  int64_t b = 0;
  int64_t c = 0;
  int64_t h = 0;
  int64_t w = 0;

  bool operator==(const Dims4&) const = default;

  std::string str() const {
    return "(" + std::to_string(b) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

// Checked B*C*H*W; throws AllocError on negative dims or overflow.
inline int64_t checked_element_count(const Dims4& d) {
  if (d.b < 0 || d.c < 0 || d.h < 0 || d.w < 0) {
    throw AllocError("tensor dims must be non-negative, got " + d.str());
  }
  __int128 n = static_cast<__int128>(d.b) * d.c * d.h * d.w;
  if (n > std::numeric_limits<int64_t>::max() / 8) {
    throw AllocError("tensor of dims " + d.str() + " overflows index arithmetic");
  }
  return static_cast<int64_t>(n);
}

template <typename T>
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Dims4 dims, T fill = T(0))
      : dims_(dims), data_(static_cast<size_t>(checked_element_count(dims)), fill) {}

  const Dims4& dims() const { return dims_; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  int64_t index(int64_t b, int64_t c, int64_t h, int64_t w) const {
    return ((b * dims_.c + c) * dims_.h + h) * dims_.w + w;
  }
  T& operator()(int64_t b, int64_t c, int64_t h, int64_t w) {
    return data_[static_cast<size_t>(index(b, c, h, w))];
  }
  T operator()(int64_t b, int64_t c, int64_t h, int64_t w) const {
    return data_[static_cast<size_t>(index(b, c, h, w))];
  }
  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  T operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_dims(const Tensor4& o) const { return dims_ == o.dims_; }

 private:
  Dims4 dims_;
  std::vector<T> data_;
};

// alloc() mirrors the construction path but keeps the call sites explicit
// about the fill value.
template <typename T>
Tensor4<T> alloc(Dims4 dims, T fill) {
  return Tensor4<T>(dims, fill);
}

template <typename T>
void check_same_dims(const Tensor4<T>& a, const Tensor4<T>& b, const char* ctx) {
  if (!a.same_dims(b)) {
    throw ShapeError(std::string(ctx) + ": dims " + a.dims().str() + " vs " +
                     b.dims().str());
  }
}

// out(b,c,h,w) = in(b,c,h,W-1-w). Involution.
template <typename T>
Tensor4<T> flip_w(const Tensor4<T>& t) {
  const Dims4 d = t.dims();
  Tensor4<T> out(d);
  for (int64_t b = 0; b < d.b; ++b)
    for (int64_t c = 0; c < d.c; ++c)
      for (int64_t h = 0; h < d.h; ++h) {
        const T* src = t.data() + t.index(b, c, h, 0);
        T* dst = out.data() + out.index(b, c, h, 0);
        for (int64_t w = 0; w < d.w; ++w) dst[w] = src[d.w - 1 - w];
      }
  return out;
}

// out(b,c,h,w) = in(b,c,H-1-h,w). Involution.
template <typename T>
Tensor4<T> flip_h(const Tensor4<T>& t) {
  const Dims4 d = t.dims();
  Tensor4<T> out(d);
  for (int64_t b = 0; b < d.b; ++b)
    for (int64_t c = 0; c < d.c; ++c)
      for (int64_t h = 0; h < d.h; ++h) {
        const T* src = t.data() + t.index(b, c, d.h - 1 - h, 0);
        T* dst = out.data() + out.index(b, c, h, 0);
        std::copy(src, src + d.w, dst);
      }
  return out;
}

// out dims (B,C,W,H); out(b,c,w,h) = in(b,c,h,w). Involution.
template <typename T>
Tensor4<T> transpose_hw(const Tensor4<T>& t) {
  const Dims4 d = t.dims();
  Tensor4<T> out(Dims4{d.b, d.c, d.w, d.h});
  for (int64_t b = 0; b < d.b; ++b)
    for (int64_t c = 0; c < d.c; ++c)
      for (int64_t h = 0; h < d.h; ++h) {
        const T* src = t.data() + t.index(b, c, h, 0);
        for (int64_t w = 0; w < d.w; ++w) out(b, c, w, h) = src[w];
      }
  return out;
}

template <typename T>
Tensor4<T> hadamard(const Tensor4<T>& a, const Tensor4<T>& b) {
  check_same_dims(a, b, "hadamard");
  Tensor4<T> out(a.dims());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b) {
  check_same_dims(a, b, "add");
  Tensor4<T> out(a.dims());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
void add_inplace(Tensor4<T>& a, const Tensor4<T>& b) {
  check_same_dims(a, b, "add_inplace");
  for (int64_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <typename T>
Tensor4<T> scale(const Tensor4<T>& a, T s) {
  Tensor4<T> out(a.dims());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

template <typename T>
T max_abs(const Tensor4<T>& a) {
  T m = T(0);
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

template <typename T>
T max_abs_diff(const Tensor4<T>& a, const Tensor4<T>& b) {
  check_same_dims(a, b, "max_abs_diff");
  T m = T(0);
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename T>
bool bit_equal(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (!a.same_dims(b)) return false;
  for (int64_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace gspn
