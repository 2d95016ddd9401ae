// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "gspn/oracle.hpp"
#include "gspn/rng.hpp"
#include "gspn/verify.hpp"

using namespace gspn;

namespace {

// Normalized weights for one interior line from raw gates, written here with
// plain loops, independent of the library's normalization path.
void naive_line_weights(const std::vector<double>& g1, const std::vector<double>& g2,
                        const std::vector<double>& g3, std::vector<double>& w1,
                        std::vector<double>& w2, std::vector<double>& w3) {
  const size_t n = g2.size();
  w1.assign(n, 0.0);
  w2.assign(n, 0.0);
  w3.assign(n, 0.0);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (size_t r = 0; r < n; ++r) {
    const bool p1 = r > 0, p3 = r + 1 < n;
    const double s1 = p1 ? sig(g1[r]) : 0.0;
    const double s2 = sig(g2[r]);
    const double s3 = p3 ? sig(g3[r]) : 0.0;
    const double sum = s1 + s2 + s3;
    if (p1) w1[r] = s1 / sum;
    w2[r] = s2 / sum;
    if (p3) w3[r] = s3 / sum;
  }
}

TridiagonalLine random_line(Rng& rng, int64_t n) {
  std::vector<double> g1(n), g2(n), g3(n), w1, w2, w3;
  for (int64_t i = 0; i < n; ++i) {
    g1[i] = rng.uniform(-2, 2);
    g2[i] = rng.uniform(-2, 2);
    g3[i] = rng.uniform(-2, 2);
  }
  naive_line_weights(g1, g2, g3, w1, w2, w3);
  return build_line_matrix(w1, w2, w3);
}

}  // namespace

TEST_CASE("build_line_matrix: zero gates give the symmetric stencil") {
  std::vector<double> g0(3, 0.0), w1, w2, w3;
  naive_line_weights(g0, g0, g0, w1, w2, w3);
  TridiagonalLine line = build_line_matrix(w1, w2, w3);
  Eigen::MatrixXd m = line.dense();
  CHECK(m(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(m(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(m(0, 2) == 0.0);
  CHECK(m(1, 0) == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(m(1, 1) == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(m(1, 2) == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(m(2, 0) == 0.0);
  CHECK(m(2, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(m(2, 2) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("build_line_matrix: width 1 collapses to [1]") {
  std::vector<double> g(1, 0.7), w1, w2, w3;
  naive_line_weights(g, g, g, w1, w2, w3);
  TridiagonalLine line = build_line_matrix(w1, w2, w3);
  CHECK(line.n == 1);
  CHECK(line.dense()(0, 0) == 1.0);
}

TEST_CASE("build_line_matrix: random rows sum to one") {
  Rng rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    TridiagonalLine line = random_line(rng, rng.uniform_int(2, 12));
    Eigen::VectorXd sums = line.dense().rowwise().sum();
    for (int64_t r = 0; r < line.n; ++r) CHECK(std::abs(sums(r) - 1.0) <= 1e-12);
  }
}

TEST_CASE("expand_dense_G: diagonal blocks are diag(lam)") {
  Rng rng(32);
  const Dims4 dims{1, 1, 3, 4};
  GateField<double> g = random_gate_field(dims, rng);
  ScanConfig cfg{Direction::kTopToBottom, 1, FirstLineMode::kLearnedLambda};
  Eigen::MatrixXd g_mat = expand_dense_G(g, cfg, 0, 0);
  for (int64_t p = 0; p < 12; ++p) {
    const int64_t h = p / 4, w = p % 4;
    CHECK(g_mat(p, p) == g.lam(0, 0, h, w));
    // same-line off-diagonal entries vanish
    for (int64_t q = h * 4; q < (h + 1) * 4; ++q) {
      if (q != p) CHECK(g_mat(p, q) == 0.0);
    }
    // strictly above the current line everything is zero
    for (int64_t q = (h + 1) * 4; q < 12; ++q) CHECK(g_mat(p, q) == 0.0);
  }
}

TEST_CASE("expand_dense_G: identity injection is a causal prefix sum") {
  Rng rng(33);
  const Dims4 dims{1, 1, 5, 3};
  GateField<double> g = random_gate_field(dims, rng);
  g.lam.fill(1.0);
  Tensor4<double> x = random_tensor<double>(dims, rng);
  ScanConfig cfg{Direction::kTopToBottom, 1, FirstLineMode::kLearnedLambda};
  Eigen::MatrixXd g_id = expand_dense_G(g, cfg, 0, 0, WeightInjection::kIdentity);
  Eigen::VectorXd hv = g_id * vectorize_plane(x, 0, 0);
  for (int64_t h = 0; h < dims.h; ++h)
    for (int64_t w = 0; w < dims.w; ++w) {
      double prefix = 0.0;
      for (int64_t j = 0; j <= h; ++j) prefix += x(0, 0, j, w);
      CHECK(hv(h * dims.w + w) == doctest::Approx(prefix).epsilon(1e-14));
    }
}

TEST_CASE("expand_dense_G reproduces the 2x2 worked example") {
  Tensor4<double> x(Dims4{1, 1, 2, 2});
  x(0, 0, 0, 0) = 1;
  x(0, 0, 0, 1) = 2;
  x(0, 0, 1, 0) = 3;
  x(0, 0, 1, 1) = 4;
  GateField<double> g{Tensor4<double>(x.dims(), 0.0), Tensor4<double>(x.dims(), 0.0),
                      Tensor4<double>(x.dims(), 0.0), Tensor4<double>(x.dims(), 1.0),
                      Tensor4<double>(x.dims(), 1.0)};
  ScanConfig cfg{Direction::kTopToBottom, 1, FirstLineMode::kLearnedLambda};
  Eigen::VectorXd hv = expand_dense_G(g, cfg, 0, 0) * vectorize_plane(x, 0, 0);
  CHECK(hv(0) == doctest::Approx(1.0));
  CHECK(hv(1) == doctest::Approx(2.0));
  CHECK(hv(2) == doctest::Approx(4.5));
  CHECK(hv(3) == doctest::Approx(5.5));
}

TEST_CASE("expand_dense_G enforces the scale guard") {
  const Dims4 dims{1, 1, 65, 65};  // 4225 > 4096
  GateField<double> g{Tensor4<double>(dims), Tensor4<double>(dims), Tensor4<double>(dims),
                      Tensor4<double>(dims), Tensor4<double>(dims)};
  ScanConfig cfg{Direction::kTopToBottom, 1, FirstLineMode::kLearnedLambda};
  CHECK_THROWS_AS(expand_dense_G(g, cfg, 0, 0), ScaleGuardError);
}

TEST_CASE("products of row-stochastic lines stay row-stochastic") {
  Rng rng(34);
  std::vector<TridiagonalLine> two{random_line(rng, 5), random_line(rng, 5)};
  StochasticProductReport r2 = check_row_stochastic_product(two);
  CHECK(r2.row_stochastic);
  CHECK(r2.max_row_sum_deviation <= 1e-12);
  CHECK(r2.min_entry >= 0.0);

  std::vector<TridiagonalLine> chain;
  for (int i = 0; i < 30; ++i) chain.push_back(random_line(rng, 8));
  StochasticProductReport r30 = check_row_stochastic_product(chain);
  CHECK(r30.row_stochastic);
  CHECK(r30.zero_entries_in_final == 0);  // long tridiagonal chains fill in

  std::vector<double> one(6, 1.0), zero(6, 0.0);
  std::vector<TridiagonalLine> ident{build_line_matrix(zero, one, zero),
                                     build_line_matrix(zero, one, zero)};
  StochasticProductReport ri = check_row_stochastic_product(ident);
  CHECK(ri.row_stochastic);
  CHECK(ri.max_row_sum_deviation == 0.0);
}

TEST_CASE("check_row_stochastic_product flags a broken line") {
  Rng rng(35);
  std::vector<TridiagonalLine> chain{random_line(rng, 5), random_line(rng, 5)};
  chain[1].diag(2) += 0.05;  // row sum now 1.05
  StochasticProductReport r = check_row_stochastic_product(chain);
  CHECK_FALSE(r.row_stochastic);
  CHECK(r.first_violation_step == 1);
}

TEST_CASE("spectral stability: Gershgorin bound 1, spectral radius <= 1") {
  Rng rng(36);
  for (int rep = 0; rep < 10; ++rep) {
    TridiagonalLine line = random_line(rng, 16);
    SpectralReport report = check_spectral_stability(line);
    CHECK(std::abs(report.gershgorin_bound - 1.0) <= 1e-12);
    CHECK(report.spectral_radius <= 1.0 + 1e-10);
    CHECK(report.stable);
    // The singular value is only a diagnostic; for row-stochastic operators
    // it sits at or above 1.
    CHECK(report.largest_singular_value >= 1.0 - 1e-9);
  }
}

TEST_CASE("spectral stability: identity line") {
  std::vector<double> one(7, 1.0), zero(7, 0.0);
  SpectralReport report = check_spectral_stability(build_line_matrix(zero, one, zero));
  CHECK(report.gershgorin_bound == 1.0);
  CHECK(report.spectral_radius == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(report.largest_singular_value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("merged affinity: one direction with unit weight is that direction") {
  Rng rng(37);
  const Dims4 dims{1, 1, 4, 4};
  std::array<GateField<double>, 4> gates;
  for (auto& g : gates) g = random_gate_field(dims, rng);
  Eigen::MatrixXd merged = merged_affinity(gates, {0.0, 0.0, 1.0, 0.0}, 0, 0);
  ScanConfig cfg{Direction::kTopToBottom, 1, FirstLineMode::kLearnedLambda};
  Eigen::MatrixXd direct = expand_dense_G(gates[2], cfg, 0, 0);
  CHECK(((merged - direct).cwiseAbs().maxCoeff()) == 0.0);
}

TEST_CASE("merged affinity with positive weights is structurally dense") {
  Rng rng(38);
  std::vector<int64_t> sides{4, 8};
  CheckStats stats = check_merged_density(rng, sides);
  CHECK(stats.passed);
  CHECK(stats.cases == 2);
}

TEST_CASE("affinity rows respect causal structure and reshape to heatmaps") {
  Rng rng(39);
  const Dims4 dims{1, 1, 6, 6};
  GateField<double> g = random_gate_field(dims, rng);
  ScanConfig cfg{Direction::kTopToBottom, 1, FirstLineMode::kLearnedLambda};
  Eigen::MatrixXd g_ttb = expand_dense_G(g, cfg, 0, 0);
  std::vector<double> img = affinity_row_image(g_ttb, 2, 3, 6, 6);
  // strictly below the query row the mass is zero
  for (int64_t h = 3; h < 6; ++h)
    for (int64_t w = 0; w < 6; ++w) CHECK(img[static_cast<size_t>(h * 6 + w)] == 0.0);
  // inside the cone it is nonzero
  CHECK(img[2 * 6 + 3] != 0.0);

  // left-to-right scan queried at (0,0): only column 0 can carry mass
  ScanConfig ltr{Direction::kLeftToRight, 1, FirstLineMode::kLearnedLambda};
  std::vector<double> img2 = affinity_row_image(expand_dense_G(g, ltr, 0, 0), 0, 0, 6, 6);
  for (int64_t h = 0; h < 6; ++h)
    for (int64_t w = 1; w < 6; ++w) CHECK(img2[static_cast<size_t>(h * 6 + w)] == 0.0);
  CHECK(img2[0] != 0.0);

  CHECK_THROWS_AS(affinity_row_image(g_ttb, 7, 0, 6, 6), ShapeError);
}

TEST_CASE("scan equals dense oracle across directions, groups, first-line modes") {
  Rng rng(40);
  std::vector<int64_t> sides{3, 5};
  CheckStats stats = check_oracle_equivalence(rng, sides, 16, 1e-10);
  CHECK(stats.passed);
  CHECK(stats.max_error <= 1e-10);
}
