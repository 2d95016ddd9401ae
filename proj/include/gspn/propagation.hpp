// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.
//
// Gated 2D linear line-scan propagation.
//
// One scan advances line by line along the scan axis; every target pixel
// takes a convex combination of three neighbors from the previous line
// (orthogonal offsets -1, 0, +1) plus a gated copy of its own input:
//
//     h[line 0]  = lam * x            (per group)
//     h[line i]  = w1*h[i-1, o-1] + w2*h[i-1, o] + w3*h[i-1, o+1] + lam*x
//     y          = u * h
//
// w1..w3 come from sigmoid(gate) renormalized over the neighbors that are
// actually present (image edge or group boundary), which makes every line
// step a row-stochastic tridiagonal operator. Vertical scans are the
// canonical kernel; the other directions reduce to it by flip/transpose.
// Group counts > 1 split the scan axis into independent segments that never
// exchange information.

#pragma once

#include <array>

#include "gspn/tensor.hpp"

namespace gspn {

enum class Direction { kLeftToRight = 0, kRightToLeft = 1, kTopToBottom = 2, kBottomToTop = 3 };

constexpr std::array<Direction, 4> kAllDirections = {
    Direction::kLeftToRight, Direction::kRightToLeft, Direction::kTopToBottom,
    Direction::kBottomToTop};

const char* direction_name(Direction d);

// How the first line of each group treats lambda. The learned variant gates
// the first line like every other line; the identity variant copies the
// input through unscaled.
enum class FirstLineMode { kLearnedLambda = 0, kIdentityLambda = 1 };

struct ScanConfig {
  Direction direction = Direction::kTopToBottom;
  int64_t groups = 1;
  FirstLineMode first_line = FirstLineMode::kLearnedLambda;
};

// Per-target-pixel raw (pre-sigmoid) gate values plus the input scale (lam)
// and output modulation (u) maps. All five tensors share the input's dims.
// g1 refers to the previous-line neighbor at orthogonal offset -1, g2 to the
// aligned neighbor, g3 to offset +1.
template <typename T>
struct GateField {
  Tensor4<T> g1, g2, g3, lam, u;
};

template <typename T>
struct NormalizedGates {
  Tensor4<T> w1, w2, w3;
};

template <typename T>
struct ScanOutput {
  Tensor4<T> h, y;
};

template <typename T>
struct ScanGradients {
  Tensor4<T> dx, dlam, dg1, dg2, dg3, du;
};

int64_t scan_axis_length(Direction d, const Dims4& dims);

// Group k covers scan steps [k*floor(L/g), (k+1)*floor(L/g)), the last group
// absorbing the remainder. Returns the start step of each group.
std::vector<int64_t> group_starts(int64_t axis_len, int64_t groups);

// sigmoid(g_k) / sum over present neighbors; absent neighbors get weight 0.
// On the first line of every group all three neighbors are absent.
template <typename T>
NormalizedGates<T> normalize_gates(const Tensor4<T>& g1, const Tensor4<T>& g2,
                                   const Tensor4<T>& g3, const ScanConfig& cfg);

template <typename T>
ScanOutput<T> scan_forward(const Tensor4<T>& x, const GateField<T>& gates,
                           const ScanConfig& cfg);

// Exact gradients of a scalar loss with dL/dy == dy, given the forward
// hidden states h. Nothing is recomputed along the scan axis: the reverse
// sweep consumes the saved h and local re-evaluated gate weights.
template <typename T>
ScanGradients<T> scan_backward(const Tensor4<T>& x, const GateField<T>& gates,
                               const ScanConfig& cfg, const Tensor4<T>& h,
                               const Tensor4<T>& dy);

// Four independent scans, one per direction, same group count. Results are
// indexed by static_cast<int>(Direction).
template <typename T>
std::array<ScanOutput<T>, 4> scan_all_directions(const Tensor4<T>& x,
                                                 const std::array<GateField<T>, 4>& gates,
                                                 int64_t groups,
                                                 FirstLineMode first_line = FirstLineMode::kLearnedLambda);

}  // namespace gspn
