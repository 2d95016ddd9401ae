// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.
//
// Dense ground truth for the line scan. A whole scan is one lower
// block-triangular N x N matrix G (N = H*W pixels): h_vec = G x_vec, with
// diagonal blocks diag(lam) and off-diagonal blocks given by products of the
// per-line tridiagonal operators. Deliberately O(N^2) memory with a hard
// size guard; exists to pin the scan engine down, not to be fast.

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gspn/propagation.hpp"

namespace gspn {

constexpr int64_t kOracleScaleGuard = 4096;  // max H*W

// One scan step for one channel: row r holds the weights connecting target
// position r to source positions r-1, r, r+1 of the previous line.
struct TridiagonalLine {
  int64_t n = 0;
  Eigen::VectorXd sub;    // size n-1, entry r-1 = weight of (r, r-1)
  Eigen::VectorXd diag;   // size n
  Eigen::VectorXd super;  // size n-1, entry r = weight of (r, r+1)

  Eigen::MatrixXd dense() const;
};

// w1[r], w2[r], w3[r] are the already-normalized weights of target r toward
// source r-1, r, r+1 (0 where absent).
TridiagonalLine build_line_matrix(std::span<const double> w1, std::span<const double> w2,
                                  std::span<const double> w3);

// Extracts one canonical (top-to-bottom) line from normalized gate tensors.
TridiagonalLine line_from_normalized(const NormalizedGates<double>& ng, int64_t batch,
                                     int64_t channel, int64_t row);

// kIdentity bypasses the gates entirely and injects the identity as every
// inter-line operator; the scan then degenerates to a causal cumulative sum
// per column, i.e. non-normalized linear attention with unit features.
enum class WeightInjection { kNormalized = 0, kIdentity = 1 };

// The full N x N affinity for one (batch, channel) slice, indexed by the
// canonical pixel order p = h*W + w regardless of scan direction.
Eigen::MatrixXd expand_dense_G(const GateField<double>& gates, const ScanConfig& cfg,
                               int64_t batch, int64_t channel,
                               WeightInjection injection = WeightInjection::kNormalized);

// Flattens x(batch, channel, :, :) into the canonical pixel order.
Eigen::VectorXd vectorize_plane(const Tensor4<double>& t, int64_t batch, int64_t channel);

struct StochasticProductReport {
  bool row_stochastic = false;
  double max_row_sum_deviation = 0.0;  // over every intermediate product
  double min_entry = 0.0;
  int64_t first_violation_step = -1;   // -1 when clean
  int64_t zero_entries_in_final = 0;
};

// Explicitly multiplies the chain (later lines applied on the left) and
// checks every intermediate product for non-negativity and unit row sums.
StochasticProductReport check_row_stochastic_product(const std::vector<TridiagonalLine>& lines,
                                                     double tol = 1e-12);

struct SpectralReport {
  double gershgorin_bound = 0.0;         // max absolute row sum
  double spectral_radius = 0.0;          // power iteration on W
  double largest_singular_value = 0.0;   // power iteration on W^T W
  bool stable = false;
};

// Gershgorin localizes the eigenvalues inside the max row sum, which is
// exactly 1 for stochastic rows, so the spectral radius is bounded by 1.
// The largest singular value is reported alongside for diagnostics; for a
// row-stochastic matrix it is >= 1 and generally strictly above it, so it
// is not part of the stability assertion.
SpectralReport check_spectral_stability(const TridiagonalLine& line);

// Linear combination of the four per-direction affinities, all in the
// canonical pixel order. With strictly positive weights the union of the
// four reachability cones covers every (target, source) pair, so the result
// is structurally dense.
Eigen::MatrixXd merged_affinity(const std::array<GateField<double>, 4>& gates,
                                const std::array<double, 4>& weights, int64_t batch,
                                int64_t channel, int64_t groups = 1,
                                FirstLineMode first_line = FirstLineMode::kLearnedLambda);

// Query row of an affinity matrix reshaped to H x W (heatmap extraction).
std::vector<double> affinity_row_image(const Eigen::MatrixXd& g, int64_t query_h,
                                       int64_t query_w, int64_t height, int64_t width);

}  // namespace gspn
