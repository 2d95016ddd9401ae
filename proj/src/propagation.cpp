// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.

#include "gspn/propagation.hpp"

#include <cmath>
#include <vector>

#include "gspn/threading.hpp"

namespace gspn {
namespace {

// The canonical kernel scans top-to-bottom. Other directions are conjugated
// into it: flips/transposes are involutive permutations, so applying the
// same transform to inputs and inverting it on outputs is exact. Gate roles
// (g1 = orthogonal offset -1, g2 = 0, g3 = +1) are preserved by all four
// mappings.
template <typename T>
Tensor4<T> to_canonical(const Tensor4<T>& t, Direction d) {
  switch (d) {
    case Direction::kTopToBottom:
      return t;
    case Direction::kBottomToTop:
      return flip_h(t);
    case Direction::kLeftToRight:
      return transpose_hw(t);
    case Direction::kRightToLeft:
      return flip_h(transpose_hw(t));
  }
  return t;
}

template <typename T>
Tensor4<T> from_canonical(const Tensor4<T>& t, Direction d) {
  switch (d) {
    case Direction::kTopToBottom:
      return t;
    case Direction::kBottomToTop:
      return flip_h(t);
    case Direction::kLeftToRight:
      return transpose_hw(t);
    case Direction::kRightToLeft:
      return transpose_hw(flip_h(t));
  }
  return t;
}

template <typename T>
T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

// Shared scalar core of the gate normalization: sigmoid each present gate,
// divide by the sum over present neighbors.
template <typename T>
struct PixelWeights {
  T s1, s2, s3, sum;
  T w1, w2, w3;
};

template <typename T>
PixelWeights<T> pixel_weights(T g1, T g2, T g3, bool present1, bool present3) {
  PixelWeights<T> p;
  p.s1 = present1 ? sigmoid(g1) : T(0);
  p.s2 = sigmoid(g2);
  p.s3 = present3 ? sigmoid(g3) : T(0);
  p.sum = p.s1 + p.s2 + p.s3;
  p.w1 = present1 ? p.s1 / p.sum : T(0);
  p.w2 = p.s2 / p.sum;
  p.w3 = present3 ? p.s3 / p.sum : T(0);
  return p;
}

void validate_config(const Dims4& dims, const ScanConfig& cfg) {
  const int64_t axis = scan_axis_length(cfg.direction, dims);
  if (cfg.groups < 1) throw ShapeError("groups must be >= 1");
  if (dims.b * dims.c * dims.h * dims.w == 0) return;  // empty tensors scan to empty
  if (cfg.groups > axis) {
    throw ShapeError("groups " + std::to_string(cfg.groups) + " exceeds scan axis length " +
                     std::to_string(axis));
  }
}

template <typename T>
void validate_gates(const Tensor4<T>& x, const GateField<T>& g) {
  check_same_dims(x, g.g1, "scan gates g1");
  check_same_dims(x, g.g2, "scan gates g2");
  check_same_dims(x, g.g3, "scan gates g3");
  check_same_dims(x, g.lam, "scan lam");
  check_same_dims(x, g.u, "scan u");
}

// Forward over one (batch, channel, group) slice in canonical orientation.
// Rows [r0, r1) of the HxW plane starting at `base`. Gate normalization is
// fused per pixel; pixel_weights is the same scalar core normalize_gates
// uses, so the fused path stays bit-identical to materializing the weights
// first.
template <typename T>
void forward_rows(const T* x, const T* g1, const T* g2, const T* g3, const T* lam,
                  const T* u, T* h, T* y, int64_t base, int64_t W, int64_t r0, int64_t r1,
                  bool identity_first) {
  const int64_t first = base + r0 * W;
  for (int64_t w = 0; w < W; ++w) {
    const T hv = identity_first ? x[first + w] : lam[first + w] * x[first + w];
    h[first + w] = hv;
    y[first + w] = u[first + w] * hv;
  }
  for (int64_t r = r0 + 1; r < r1; ++r) {
    const int64_t cur = base + r * W;
    const int64_t prev = cur - W;
    for (int64_t w = 0; w < W; ++w) {
      const auto p = pixel_weights(g1[cur + w], g2[cur + w], g3[cur + w], w > 0, w + 1 < W);
      T acc = T(0);
      if (w > 0) acc += p.w1 * h[prev + w - 1];
      acc += p.w2 * h[prev + w];
      if (w + 1 < W) acc += p.w3 * h[prev + w + 1];
      const T hv = acc + lam[cur + w] * x[cur + w];
      h[cur + w] = hv;
      y[cur + w] = u[cur + w] * hv;
    }
  }
}

// Reverse sweep over one (batch, channel, group) slice. dh accumulates
// u*dy plus the three weighted contributions from the line below; gate
// gradients chain through the normalization Jacobian
//   d g_k = s_k (1 - s_k) / sum * (dW_k - sum_j dW_j w_j).
template <typename T>
void backward_rows(const T* x, const T* g1, const T* g2, const T* g3, const T* lam,
                   const T* u, const T* h, const T* dy, T* dh, T* dx, T* dlam, T* dg1,
                   T* dg2, T* dg3, T* du, int64_t base, int64_t W, int64_t r0, int64_t r1,
                   bool identity_first) {
  std::vector<T> w1_below(W), w2_below(W), w3_below(W);
  std::vector<T> w1_row(W), w2_row(W), w3_row(W);
  for (int64_t r = r1 - 1; r >= r0; --r) {
    const int64_t cur = base + r * W;
    const bool line_start = (r == r0);
    const bool has_next = (r + 1 < r1);
    if (!line_start) {
      for (int64_t w = 0; w < W; ++w) {
        const auto p = pixel_weights(g1[cur + w], g2[cur + w], g3[cur + w], w > 0, w + 1 < W);
        w1_row[w] = p.w1;
        w2_row[w] = p.w2;
        w3_row[w] = p.w3;
      }
    }
    const int64_t next = cur + W;
    for (int64_t w = 0; w < W; ++w) {
      T d = u[cur + w] * dy[cur + w];
      if (has_next) {
        if (w + 1 < W) d += w1_below[w + 1] * dh[next + w + 1];
        d += w2_below[w] * dh[next + w];
        if (w > 0) d += w3_below[w - 1] * dh[next + w - 1];
      }
      dh[cur + w] = d;
      du[cur + w] = dy[cur + w] * h[cur + w];
      if (line_start && identity_first) {
        dx[cur + w] = d;
        dlam[cur + w] = T(0);
      } else {
        dx[cur + w] = lam[cur + w] * d;
        dlam[cur + w] = x[cur + w] * d;
      }
    }
    if (!line_start) {
      const int64_t prev = cur - W;
      for (int64_t w = 0; w < W; ++w) {
        const bool p1 = w > 0;
        const bool p3 = w + 1 < W;
        const auto p = pixel_weights(g1[cur + w], g2[cur + w], g3[cur + w], p1, p3);
        const T dW1 = p1 ? dh[cur + w] * h[prev + w - 1] : T(0);
        const T dW2 = dh[cur + w] * h[prev + w];
        const T dW3 = p3 ? dh[cur + w] * h[prev + w + 1] : T(0);
        const T dot = dW1 * p.w1 + dW2 * p.w2 + dW3 * p.w3;
        dg1[cur + w] = p1 ? p.s1 * (T(1) - p.s1) / p.sum * (dW1 - dot) : T(0);
        dg2[cur + w] = p.s2 * (T(1) - p.s2) / p.sum * (dW2 - dot);
        dg3[cur + w] = p3 ? p.s3 * (T(1) - p.s3) / p.sum * (dW3 - dot) : T(0);
      }
    }
    std::swap(w1_below, w1_row);
    std::swap(w2_below, w2_row);
    std::swap(w3_below, w3_row);
  }
}

}  // namespace

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::kLeftToRight:
      return "left-to-right";
    case Direction::kRightToLeft:
      return "right-to-left";
    case Direction::kTopToBottom:
      return "top-to-bottom";
    case Direction::kBottomToTop:
      return "bottom-to-top";
  }
  return "?";
}

int64_t scan_axis_length(Direction d, const Dims4& dims) {
  return (d == Direction::kTopToBottom || d == Direction::kBottomToTop) ? dims.h : dims.w;
}

std::vector<int64_t> group_starts(int64_t axis_len, int64_t groups) {
  std::vector<int64_t> starts;
  const int64_t base = axis_len / groups;
  for (int64_t k = 0; k < groups; ++k) starts.push_back(k * base);
  return starts;
}

template <typename T>
NormalizedGates<T> normalize_gates(const Tensor4<T>& g1, const Tensor4<T>& g2,
                                   const Tensor4<T>& g3, const ScanConfig& cfg) {
  check_same_dims(g1, g2, "normalize_gates");
  check_same_dims(g1, g3, "normalize_gates");
  const Dims4 d = g1.dims();
  validate_config(d, cfg);
  NormalizedGates<T> out{Tensor4<T>(d), Tensor4<T>(d), Tensor4<T>(d)};
  if (g1.size() == 0) return out;

  const bool vertical =
      cfg.direction == Direction::kTopToBottom || cfg.direction == Direction::kBottomToTop;
  const int64_t axis = vertical ? d.h : d.w;
  const int64_t orth = vertical ? d.w : d.h;
  const int64_t base = axis / cfg.groups;
  for (int64_t b = 0; b < d.b; ++b)
    for (int64_t c = 0; c < d.c; ++c)
      for (int64_t h = 0; h < d.h; ++h)
        for (int64_t w = 0; w < d.w; ++w) {
          int64_t step;  // position along the scan order
          switch (cfg.direction) {
            case Direction::kTopToBottom:
              step = h;
              break;
            case Direction::kBottomToTop:
              step = d.h - 1 - h;
              break;
            case Direction::kLeftToRight:
              step = w;
              break;
            default:
              step = d.w - 1 - w;
              break;
          }
          const int64_t o = vertical ? w : h;
          const bool group_start = (step % base == 0 && step / base < cfg.groups);
          const int64_t i = g1.index(b, c, h, w);
          if (group_start) continue;  // all neighbors absent, weights stay 0
          const auto p = pixel_weights(g1[i], g2[i], g3[i], o > 0, o + 1 < orth);
          out.w1[i] = p.w1;
          out.w2[i] = p.w2;
          out.w3[i] = p.w3;
        }
  return out;
}

namespace {

// Canonical-frame scan over already-canonicalized tensors.
template <typename T>
ScanOutput<T> scan_canonical(const Tensor4<T>& cx, const Tensor4<T>& cg1,
                             const Tensor4<T>& cg2, const Tensor4<T>& cg3,
                             const Tensor4<T>& clam, const Tensor4<T>& cu, int64_t groups,
                             bool identity_first) {
  const Dims4 cd = cx.dims();
  Tensor4<T> ch(cd);
  Tensor4<T> cy(cd);
  const std::vector<int64_t> starts = group_starts(cd.h, groups);
  const int64_t tasks = cd.b * cd.c * groups;

  parallel_for(tasks, [&](int64_t t0, int64_t t1) {
    for (int64_t t = t0; t < t1; ++t) {
      const int64_t g = t % groups;
      const int64_t bc = t / groups;
      const int64_t base = bc * cd.h * cd.w;
      const int64_t r0 = starts[g];
      const int64_t r1 = (g + 1 < groups) ? starts[g + 1] : cd.h;
      forward_rows(cx.data(), cg1.data(), cg2.data(), cg3.data(), clam.data(), cu.data(),
                   ch.data(), cy.data(), base, cd.w, r0, r1, identity_first);
    }
  });
  return {std::move(ch), std::move(cy)};
}

}  // namespace

template <typename T>
ScanOutput<T> scan_forward(const Tensor4<T>& x, const GateField<T>& gates,
                           const ScanConfig& cfg) {
  validate_gates(x, gates);
  validate_config(x.dims(), cfg);
  if (x.size() == 0) return {Tensor4<T>(x.dims()), Tensor4<T>(x.dims())};

  const bool identity_first = cfg.first_line == FirstLineMode::kIdentityLambda;
  if (cfg.direction == Direction::kTopToBottom) {
    return scan_canonical(x, gates.g1, gates.g2, gates.g3, gates.lam, gates.u, cfg.groups,
                          identity_first);
  }
  const Tensor4<T> cx = to_canonical(x, cfg.direction);
  const Tensor4<T> cg1 = to_canonical(gates.g1, cfg.direction);
  const Tensor4<T> cg2 = to_canonical(gates.g2, cfg.direction);
  const Tensor4<T> cg3 = to_canonical(gates.g3, cfg.direction);
  const Tensor4<T> clam = to_canonical(gates.lam, cfg.direction);
  const Tensor4<T> cu = to_canonical(gates.u, cfg.direction);
  ScanOutput<T> out =
      scan_canonical(cx, cg1, cg2, cg3, clam, cu, cfg.groups, identity_first);
  return {from_canonical(out.h, cfg.direction), from_canonical(out.y, cfg.direction)};
}

namespace {

template <typename T>
ScanGradients<T> backward_canonical(const Tensor4<T>& cx, const Tensor4<T>& cg1,
                                    const Tensor4<T>& cg2, const Tensor4<T>& cg3,
                                    const Tensor4<T>& clam, const Tensor4<T>& cu,
                                    const Tensor4<T>& ch, const Tensor4<T>& cdy,
                                    int64_t groups, bool identity_first) {
  const Dims4 cd = cx.dims();
  Tensor4<T> dh(cd), dx(cd), dlam(cd), dg1(cd), dg2(cd), dg3(cd), du(cd);
  const std::vector<int64_t> starts = group_starts(cd.h, groups);
  const int64_t tasks = cd.b * cd.c * groups;

  parallel_for(tasks, [&](int64_t t0, int64_t t1) {
    for (int64_t t = t0; t < t1; ++t) {
      const int64_t g = t % groups;
      const int64_t bc = t / groups;
      const int64_t base = bc * cd.h * cd.w;
      const int64_t r0 = starts[g];
      const int64_t r1 = (g + 1 < groups) ? starts[g + 1] : cd.h;
      backward_rows(cx.data(), cg1.data(), cg2.data(), cg3.data(), clam.data(), cu.data(),
                    ch.data(), cdy.data(), dh.data(), dx.data(), dlam.data(), dg1.data(),
                    dg2.data(), dg3.data(), du.data(), base, cd.w, r0, r1, identity_first);
    }
  });
  return {std::move(dx), std::move(dlam), std::move(dg1), std::move(dg2), std::move(dg3),
          std::move(du)};
}

}  // namespace

template <typename T>
ScanGradients<T> scan_backward(const Tensor4<T>& x, const GateField<T>& gates,
                               const ScanConfig& cfg, const Tensor4<T>& h,
                               const Tensor4<T>& dy) {
  validate_gates(x, gates);
  validate_config(x.dims(), cfg);
  check_same_dims(x, h, "scan_backward h");
  check_same_dims(x, dy, "scan_backward dy");
  if (x.size() == 0) {
    Tensor4<T> z(x.dims());
    return {z, z, z, z, z, z};
  }

  const bool identity_first = cfg.first_line == FirstLineMode::kIdentityLambda;
  if (cfg.direction == Direction::kTopToBottom) {
    return backward_canonical(x, gates.g1, gates.g2, gates.g3, gates.lam, gates.u, h, dy,
                              cfg.groups, identity_first);
  }
  const Tensor4<T> cx = to_canonical(x, cfg.direction);
  const Tensor4<T> cg1 = to_canonical(gates.g1, cfg.direction);
  const Tensor4<T> cg2 = to_canonical(gates.g2, cfg.direction);
  const Tensor4<T> cg3 = to_canonical(gates.g3, cfg.direction);
  const Tensor4<T> clam = to_canonical(gates.lam, cfg.direction);
  const Tensor4<T> cu = to_canonical(gates.u, cfg.direction);
  const Tensor4<T> ch = to_canonical(h, cfg.direction);
  const Tensor4<T> cdy = to_canonical(dy, cfg.direction);

  ScanGradients<T> g = backward_canonical(cx, cg1, cg2, cg3, clam, cu, ch, cdy, cfg.groups,
                                          identity_first);
  return {from_canonical(g.dx, cfg.direction),  from_canonical(g.dlam, cfg.direction),
          from_canonical(g.dg1, cfg.direction), from_canonical(g.dg2, cfg.direction),
          from_canonical(g.dg3, cfg.direction), from_canonical(g.du, cfg.direction)};
}

template <typename T>
std::array<ScanOutput<T>, 4> scan_all_directions(const Tensor4<T>& x,
                                                 const std::array<GateField<T>, 4>& gates,
                                                 int64_t groups, FirstLineMode first_line) {
  std::array<ScanOutput<T>, 4> out;
  parallel_for(4, [&](int64_t d0, int64_t d1) {
    for (int64_t d = d0; d < d1; ++d) {
      const ScanConfig cfg{kAllDirections[static_cast<size_t>(d)], groups, first_line};
      out[static_cast<size_t>(d)] = scan_forward(x, gates[static_cast<size_t>(d)], cfg);
    }
  });
  return out;
}

template NormalizedGates<float> normalize_gates(const Tensor4<float>&, const Tensor4<float>&,
                                                const Tensor4<float>&, const ScanConfig&);
template NormalizedGates<double> normalize_gates(const Tensor4<double>&, const Tensor4<double>&,
                                                 const Tensor4<double>&, const ScanConfig&);
template ScanOutput<float> scan_forward(const Tensor4<float>&, const GateField<float>&,
                                        const ScanConfig&);
template ScanOutput<double> scan_forward(const Tensor4<double>&, const GateField<double>&,
                                         const ScanConfig&);
template ScanGradients<float> scan_backward(const Tensor4<float>&, const GateField<float>&,
                                            const ScanConfig&, const Tensor4<float>&,
                                            const Tensor4<float>&);
template ScanGradients<double> scan_backward(const Tensor4<double>&, const GateField<double>&,
                                             const ScanConfig&, const Tensor4<double>&,
                                             const Tensor4<double>&);
template std::array<ScanOutput<float>, 4> scan_all_directions(const Tensor4<float>&,
                                                              const std::array<GateField<float>, 4>&,
                                                              int64_t, FirstLineMode);
template std::array<ScanOutput<double>, 4> scan_all_directions(const Tensor4<double>&,
                                                               const std::array<GateField<double>, 4>&,
                                                               int64_t, FirstLineMode);

}  // namespace gspn
