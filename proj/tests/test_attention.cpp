// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.

#include <doctest.h>

#include <cmath>

#include "gspn/rng.hpp"
#include "gspn/reference_attention.hpp"
#include "gspn/verify.hpp"

using namespace gspn;

namespace {

SeqBatch random_seq(Rng& rng, int64_t n, int64_t d) {
  SeqBatch m(n, d);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

// Brute-force softmax attention with per-element exponentiation loops.
SeqBatch naive_softmax(const SeqBatch& q, const SeqBatch& k, const SeqBatch& v) {
  const int64_t n = q.rows(), d = q.cols();
  SeqBatch out(n, d);
  for (int64_t i = 0; i < n; ++i) {
    std::vector<double> logits(n);
    double m = -1e300;
    for (int64_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int64_t c = 0; c < d; ++c) dot += q(i, c) * k(j, c);
      logits[j] = dot / std::sqrt(double(d));
      m = std::max(m, logits[j]);
    }
    double z = 0.0;
    for (int64_t j = 0; j < n; ++j) z += std::exp(logits[j] - m);
    for (int64_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) acc += std::exp(logits[j] - m) / z * v(j, c);
      out(i, c) = acc;
    }
  }
  return out;
}

// Masked (Q K^T) V without normalization or scaling.
SeqBatch masked_qkv(const SeqBatch& q, const SeqBatch& k, const SeqBatch& v) {
  const int64_t n = q.rows(), d = q.cols();
  SeqBatch out = SeqBatch::Zero(n, d);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j <= i; ++j) {
      double dot = 0.0;
      for (int64_t c = 0; c < d; ++c) dot += q(i, c) * k(j, c);
      for (int64_t c = 0; c < d; ++c) out(i, c) += dot * v(j, c);
    }
  return out;
}

}  // namespace

TEST_CASE("softmax attention: single token returns V") {
  Rng rng(50);
  SeqBatch q = random_seq(rng, 1, 3), k = random_seq(rng, 1, 3), v = random_seq(rng, 1, 3);
  SeqBatch out = softmax_attention(q, k, v);
  for (int64_t c = 0; c < 3; ++c) CHECK(out(0, c) == doctest::Approx(v(0, c)).epsilon(1e-14));
}

TEST_CASE("softmax attention: identical keys average V uniformly") {
  Rng rng(51);
  const int64_t n = 5, d = 2;
  SeqBatch q = random_seq(rng, n, d);
  SeqBatch k(n, d);
  for (int64_t i = 0; i < n; ++i) {
    k(i, 0) = 0.3;
    k(i, 1) = -0.7;
  }
  SeqBatch v = random_seq(rng, n, d);
  SeqBatch out = softmax_attention(q, k, v);
  for (int64_t c = 0; c < d; ++c) {
    const double mean = v.col(c).mean();
    for (int64_t i = 0; i < n; ++i) CHECK(out(i, c) == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("softmax attention matches the brute-force script") {
  Rng rng(52);
  SeqBatch q = random_seq(rng, 3, 2), k = random_seq(rng, 3, 2), v = random_seq(rng, 3, 2);
  SeqBatch out = softmax_attention(q, k, v);
  SeqBatch ref = naive_softmax(q, k, v);
  CHECK((out - ref).cwiseAbs().maxCoeff() <= 1e-12);

  SeqBatch big_q = random_seq(rng, 24, 4), big_k = random_seq(rng, 24, 4),
           big_v = random_seq(rng, 24, 4);
  CHECK((softmax_attention(big_q, big_k, big_v) - naive_softmax(big_q, big_k, big_v))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
}

TEST_CASE("softmax rows sum to one") {
  // With V = I the output rows are exactly the attention probabilities.
  Rng rng(53);
  const int64_t n = 8;
  SeqBatch q = random_seq(rng, n, n), k = random_seq(rng, n, n);
  SeqBatch v = SeqBatch::Identity(n, n);
  SeqBatch out = softmax_attention(q, k, v);
  for (int64_t i = 0; i < n; ++i) {
    CHECK(std::abs(out.row(i).sum() - 1.0) <= 1e-12);
    for (int64_t j = 0; j < n; ++j) CHECK(out(i, j) > 0.0);
  }
}

TEST_CASE("causal linear attention: single token") {
  Rng rng(54);
  SeqBatch q = random_seq(rng, 1, 2), k = random_seq(rng, 1, 2), v = random_seq(rng, 1, 2);
  SeqBatch out = linear_attention_causal(q, k, v);
  // y_1 = Q_1 (K_1^T V_1)
  Eigen::MatrixXd state = k.row(0).transpose() * v.row(0);
  Eigen::RowVectorXd expect = q.row(0) * state;
  CHECK((out.row(0) - expect).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("causal linear attention: unit features give prefix sums") {
  Rng rng(55);
  const int64_t n = 9;
  SeqBatch q = SeqBatch::Ones(n, 1), k = SeqBatch::Ones(n, 1);
  SeqBatch v = random_seq(rng, n, 1);
  SeqBatch out = linear_attention_causal(q, k, v);
  double prefix = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    prefix += v(i, 0);
    CHECK(out(i, 0) == doctest::Approx(prefix).epsilon(1e-14));
  }
}

TEST_CASE("causal linear attention equals materialized masked QKV") {
  Rng rng(56);
  for (int64_t n : {2, 17, 64}) {
    const int64_t d = rng.uniform_int(1, 4);
    SeqBatch q = random_seq(rng, n, d), k = random_seq(rng, n, d), v = random_seq(rng, n, d);
    SeqBatch fast = linear_attention_causal(q, k, v);
    SeqBatch ref = masked_qkv(q, k, v);
    CHECK((fast - ref).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("attention operands must agree in shape") {
  Rng rng(57);
  SeqBatch q = random_seq(rng, 4, 2), k = random_seq(rng, 4, 3), v = random_seq(rng, 4, 2);
  CHECK_THROWS_AS(softmax_attention(q, k, v), ShapeError);
  CHECK_THROWS_AS(linear_attention_causal(q, k, v), ShapeError);
}

TEST_CASE("identity-injected scan oracle reproduces causal linear attention") {
  Rng rng(58);
  CheckStats stats = check_linear_attention_reduction(rng, 10, 64, 1e-10);
  CHECK(stats.passed);
  CHECK(stats.max_error <= 1e-10);
}
