// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.
//
// Minimal single-head attention baselines: dense softmax attention and the
// non-normalized causal linear form y_i = Q_i * (sum_{j<=i} K_j^T V_j).

#pragma once

#include <Eigen/Dense>

namespace gspn {

// Token sequences are N x d, row-major (d fastest).
using SeqBatch = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rowwise softmax(Q K^T / sqrt(d)) * V. Max-subtraction is always applied.
// Materializes the N x N score matrix.
SeqBatch softmax_attention(const SeqBatch& q, const SeqBatch& k, const SeqBatch& v);

// Causal prefix recurrence over the running d x d state K^T V; O(N d^2) time,
// no normalization and no 1/sqrt(d) scale.
SeqBatch linear_attention_causal(const SeqBatch& q, const SeqBatch& k, const SeqBatch& v);

}  // namespace gspn
