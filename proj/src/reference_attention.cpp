// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.

#include "gspn/reference_attention.hpp"

#include <cmath>

#include "gspn/errors.hpp"

namespace gspn {
namespace {

void validate(const SeqBatch& q, const SeqBatch& k, const SeqBatch& v) {
  if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols() ||
      q.cols() != v.cols()) {
    throw ShapeError("attention operands must share N x d dims");
  }
}

}  // namespace

SeqBatch softmax_attention(const SeqBatch& q, const SeqBatch& k, const SeqBatch& v) {
  validate(q, k, v);
  const Eigen::Index n = q.rows();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  SeqBatch scores(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Row-wise GEMV fill; a single (N x d) * (d x N) product hits Eigen's
    // degenerate-GEMM path for small d and runs far below memory speed.
    auto row = scores.row(i);
    row.noalias() = (k * q.row(i).transpose()).transpose() * inv_sqrt_d;
    const double m = row.maxCoeff();
    row = (row.array() - m).exp();
    row /= row.sum();
  }
  return scores * v;
}

SeqBatch linear_attention_causal(const SeqBatch& q, const SeqBatch& k, const SeqBatch& v) {
  validate(q, k, v);
  const Eigen::Index n = q.rows();
  const Eigen::Index d = q.cols();
  SeqBatch out(n, d);
  Eigen::MatrixXd state = Eigen::MatrixXd::Zero(d, d);  // running K^T V
  for (Eigen::Index i = 0; i < n; ++i) {
    state.noalias() += k.row(i).transpose() * v.row(i);
    out.row(i).noalias() = q.row(i) * state;
  }
  return out;
}

}  // namespace gspn
