// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.
//
// The full propagation block: a shared 1x1 reduction followed by three 1x1
// heads generating the input-dependent parameters (u, gates, lam), a scan in
// all four directions, and a learnable 1x1 merge over the concatenated
// per-direction outputs. Output modulation u is applied per direction before
// the merge. There is no positional term anywhere; position enters only
// through the scan order itself.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gspn/propagation.hpp"
#include "gspn/tensor.hpp"

namespace gspn {

// Per-pixel channel-mixing projection (1x1 convolution).
struct Conv1x1 {
  Eigen::MatrixXd weight;  // out_channels x in_channels
  Eigen::VectorXd bias;    // out_channels
};

Tensor4<double> apply_conv1x1(const Conv1x1& conv, const Tensor4<double>& in);

struct GspnBlockParams {
  Conv1x1 reduce;    // C -> C_r, shared reduction
  Conv1x1 proj_u;    // C_r -> C
  Conv1x1 proj_lam;  // C_r -> C
  Conv1x1 proj_w;    // C_r -> 12*C; channel ((d*3 + k)*C + c) is gate k+1 of
                     // direction d for channel c, directions in enum order
  Conv1x1 merge;     // 4*C -> C over the direction-concatenated outputs

  int64_t channels() const { return reduce.weight.cols(); }
  int64_t reduced_channels() const { return reduce.weight.rows(); }
};

// Reduction ratio C_r = max(1, C/4) unless `reduced` overrides it; weights
// uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
GspnBlockParams init_block_params(int64_t channels, uint64_t seed, int64_t reduced = 0);

// Everything the backward pass needs from the forward pass.
struct BlockState {
  Tensor4<double> z, u, lam, gate_maps;
  std::array<GateField<double>, 4> gates;
  std::array<ScanOutput<double>, 4> scans;
  Tensor4<double> concat;
};

Tensor4<double> block_forward(const Tensor4<double>& x, const GspnBlockParams& params,
                              int64_t groups, BlockState* state = nullptr);

struct BlockGradients {
  Tensor4<double> dx;
  GspnBlockParams dparams;
};

BlockGradients block_backward(const Tensor4<double>& x, const GspnBlockParams& params,
                              int64_t groups, const BlockState& state,
                              const Tensor4<double>& dout);

// Checkpoint: one GSPN-T file per projection (bias stored as the last
// column) plus a plain-text manifest (name, dims, dtype per line).
void save_checkpoint(const GspnBlockParams& params, const std::string& dir);
GspnBlockParams load_checkpoint(const std::string& dir);

enum class ToyTask { kIdentity = 0, kFixedBlur = 1 };

// Fixed 1x4x8x8 batch; identity targets the input itself, fixed-blur a 3x3
// uniform blur (boundary mean over present neighbors).
struct ToyData {
  Tensor4<double> x;
  Tensor4<double> target;
};
ToyData make_toy_task(ToyTask task, uint64_t seed);

struct TrainResult {
  std::vector<double> losses;  // losses[k] = MSE after k steps
  bool diverged = false;
  int64_t diverged_step = -1;

  bool converged() const {
    return !diverged && !losses.empty() && losses.back() <= 0.1 * losses.front();
  }
};

// Tuned step size per task.
double default_toy_lr(ToyTask task);

// Plain gradient descent on the MSE; deterministic for a fixed seed
// regardless of worker count.
TrainResult train_toy(ToyTask task, int64_t steps, double lr, uint64_t seed);

}  // namespace gspn
