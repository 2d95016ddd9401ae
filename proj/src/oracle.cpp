// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.

#include "gspn/oracle.hpp"

#include <cmath>
#include <string>

#include "gspn/errors.hpp"

namespace gspn {
namespace {

// Local sigmoid/normalization on purpose: the oracle must not share the scan
// engine's arithmetic path.
double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct LineRef {
  int64_t r0, r1;  // canonical scan rows of this group, [r0, r1)
};

// Canonical scan coordinates: lines indexed by r in scan order, positions by
// o across the line. Maps back to original (h, w).
struct ScanFrame {
  int64_t lines, width;
  Direction dir;
  int64_t img_h, img_w;

  void to_image(int64_t r, int64_t o, int64_t& h, int64_t& w) const {
    switch (dir) {
      case Direction::kTopToBottom:
        h = r;
        w = o;
        break;
      case Direction::kBottomToTop:
        h = img_h - 1 - r;
        w = o;
        break;
      case Direction::kLeftToRight:
        h = o;
        w = r;
        break;
      case Direction::kRightToLeft:
        h = o;
        w = img_w - 1 - r;
        break;
    }
  }

  int64_t pixel(int64_t r, int64_t o) const {
    int64_t h = 0, w = 0;
    to_image(r, o, h, w);
    return h * img_w + w;
  }
};

}  // namespace

Eigen::MatrixXd TridiagonalLine::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int64_t r = 0; r < n; ++r) {
    m(r, r) = diag(r);
    if (r > 0) m(r, r - 1) = sub(r - 1);
    if (r + 1 < n) m(r, r + 1) = super(r);
  }
  return m;
}

TridiagonalLine build_line_matrix(std::span<const double> w1, std::span<const double> w2,
                                  std::span<const double> w3) {
  const int64_t n = static_cast<int64_t>(w2.size());
  if (static_cast<int64_t>(w1.size()) != n || static_cast<int64_t>(w3.size()) != n) {
    throw ShapeError("build_line_matrix: weight spans must have equal length");
  }
  TridiagonalLine line;
  line.n = n;
  line.diag = Eigen::VectorXd(n);
  line.sub = Eigen::VectorXd(std::max<int64_t>(n - 1, 0));
  line.super = Eigen::VectorXd(std::max<int64_t>(n - 1, 0));
  for (int64_t r = 0; r < n; ++r) {
    line.diag(r) = w2[r];
    if (r > 0) line.sub(r - 1) = w1[r];
    if (r + 1 < n) line.super(r) = w3[r];
  }
  return line;
}

TridiagonalLine line_from_normalized(const NormalizedGates<double>& ng, int64_t batch,
                                     int64_t channel, int64_t row) {
  const Dims4 d = ng.w1.dims();
  std::vector<double> w1(d.w), w2(d.w), w3(d.w);
  for (int64_t w = 0; w < d.w; ++w) {
    w1[w] = ng.w1(batch, channel, row, w);
    w2[w] = ng.w2(batch, channel, row, w);
    w3[w] = ng.w3(batch, channel, row, w);
  }
  return build_line_matrix(w1, w2, w3);
}

Eigen::VectorXd vectorize_plane(const Tensor4<double>& t, int64_t batch, int64_t channel) {
  const Dims4 d = t.dims();
  Eigen::VectorXd v(d.h * d.w);
  for (int64_t h = 0; h < d.h; ++h)
    for (int64_t w = 0; w < d.w; ++w) v(h * d.w + w) = t(batch, channel, h, w);
  return v;
}

Eigen::MatrixXd expand_dense_G(const GateField<double>& gates, const ScanConfig& cfg,
                               int64_t batch, int64_t channel, WeightInjection injection) {
  const Dims4 d = gates.lam.dims();
  const int64_t n_pixels = d.h * d.w;
  if (n_pixels > kOracleScaleGuard) {
    throw ScaleGuardError("dense oracle limited to H*W <= " + std::to_string(kOracleScaleGuard) +
                          ", got " + std::to_string(n_pixels));
  }
  const bool vertical =
      cfg.direction == Direction::kTopToBottom || cfg.direction == Direction::kBottomToTop;
  ScanFrame frame{vertical ? d.h : d.w, vertical ? d.w : d.h, cfg.direction, d.h, d.w};
  if (cfg.groups < 1 || cfg.groups > frame.lines) {
    throw ShapeError("expand_dense_G: invalid group count");
  }
  const bool identity_first = cfg.first_line == FirstLineMode::kIdentityLambda;

  Eigen::MatrixXd g_mat = Eigen::MatrixXd::Zero(n_pixels, n_pixels);
  const int64_t base = frame.lines / cfg.groups;
  for (int64_t r = 0; r < frame.lines; ++r) {
    const bool group_start = (r % base == 0 && r / base < cfg.groups);
    for (int64_t o = 0; o < frame.width; ++o) {
      int64_t h = 0, w = 0;
      frame.to_image(r, o, h, w);
      const int64_t p = h * d.w + w;
      const double lam = gates.lam(batch, channel, h, w);
      if (group_start) {
        g_mat(p, p) = identity_first ? 1.0 : lam;
        continue;
      }
      double w1 = 0.0, w2 = 0.0, w3 = 0.0;
      if (injection == WeightInjection::kIdentity) {
        w2 = 1.0;
      } else {
        const bool p1 = o > 0;
        const bool p3 = o + 1 < frame.width;
        const double s1 = p1 ? sig(gates.g1(batch, channel, h, w)) : 0.0;
        const double s2 = sig(gates.g2(batch, channel, h, w));
        const double s3 = p3 ? sig(gates.g3(batch, channel, h, w)) : 0.0;
        const double sum = s1 + s2 + s3;
        if (p1) w1 = s1 / sum;
        w2 = s2 / sum;
        if (p3) w3 = s3 / sum;
      }
      // Row of the target pixel = weighted rows of its three previous-line
      // neighbors plus lam on its own column.
      if (o > 0) g_mat.row(p).noalias() += w1 * g_mat.row(frame.pixel(r - 1, o - 1));
      g_mat.row(p).noalias() += w2 * g_mat.row(frame.pixel(r - 1, o));
      if (o + 1 < frame.width) g_mat.row(p).noalias() += w3 * g_mat.row(frame.pixel(r - 1, o + 1));
      g_mat(p, p) += lam;
    }
  }
  return g_mat;
}

StochasticProductReport check_row_stochastic_product(const std::vector<TridiagonalLine>& lines,
                                                     double tol) {
  StochasticProductReport report;
  report.row_stochastic = true;
  if (lines.empty()) return report;
  Eigen::MatrixXd product = lines.front().dense();
  for (size_t step = 0; step < lines.size(); ++step) {
    if (step > 0) {
      if (lines[step].n != product.rows()) {
        throw ShapeError("check_row_stochastic_product: mixed line sizes");
      }
      product = (lines[step].dense() * product).eval();
    }
    const double min_entry = product.minCoeff();
    const double dev = (product.rowwise().sum().array() - 1.0).abs().maxCoeff();
    report.max_row_sum_deviation = std::max(report.max_row_sum_deviation, dev);
    report.min_entry = (step == 0) ? min_entry : std::min(report.min_entry, min_entry);
    if ((dev > tol || min_entry < -tol) && report.first_violation_step < 0) {
      report.first_violation_step = static_cast<int64_t>(step);
      report.row_stochastic = false;
    }
  }
  report.zero_entries_in_final = static_cast<int64_t>((product.array() == 0.0).count());
  return report;
}

SpectralReport check_spectral_stability(const TridiagonalLine& line) {
  SpectralReport report;
  const Eigen::MatrixXd w = line.dense();
  const int64_t n = line.n;
  if (n == 0) return report;

  report.gershgorin_bound = w.cwiseAbs().rowwise().sum().maxCoeff();

  // Dominant eigenvalue magnitude. The all-ones start vector is already the
  // Perron vector for stochastic rows, so this settles immediately there.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  double rho = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::VectorXd next = w * v;
    const double norm = next.norm();
    if (norm == 0.0) {
      rho = 0.0;
      break;
    }
    const double est = norm / v.norm();
    next /= norm;
    if (iter > 0 && std::abs(est - rho) <= 1e-13 * std::max(1.0, std::abs(est))) {
      rho = est;
      break;
    }
    rho = est;
    v = next;
  }
  report.spectral_radius = rho;

  // Largest singular value via power iteration on W^T W.
  Eigen::VectorXd s = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  double sigma_sq = 0.0;
  for (int iter = 0; iter < 300; ++iter) {
    const Eigen::VectorXd av = w.transpose() * (w * s);
    const double est = s.dot(av);  // Rayleigh quotient of the PSD operator
    const double norm = av.norm();
    if (norm == 0.0) {
      sigma_sq = 0.0;
      break;
    }
    s = av / norm;
    if (iter > 0 && std::abs(est - sigma_sq) <= 1e-13 * std::max(1.0, std::abs(est))) {
      sigma_sq = est;
      break;
    }
    sigma_sq = est;
  }
  report.largest_singular_value = std::sqrt(std::max(0.0, sigma_sq));

  report.stable = report.gershgorin_bound <= 1.0 + 1e-12 && report.spectral_radius <= 1.0 + 1e-10;
  return report;
}

Eigen::MatrixXd merged_affinity(const std::array<GateField<double>, 4>& gates,
                                const std::array<double, 4>& weights, int64_t batch,
                                int64_t channel, int64_t groups, FirstLineMode first_line) {
  Eigen::MatrixXd merged;
  for (size_t d = 0; d < 4; ++d) {
    ScanConfig cfg{kAllDirections[d], groups, first_line};
    Eigen::MatrixXd g_mat = expand_dense_G(gates[d], cfg, batch, channel);
    if (merged.size() == 0) {
      merged = weights[d] * g_mat;
    } else {
      merged += weights[d] * g_mat;
    }
  }
  return merged;
}

std::vector<double> affinity_row_image(const Eigen::MatrixXd& g, int64_t query_h,
                                       int64_t query_w, int64_t height, int64_t width) {
  if (g.rows() != height * width || g.cols() != height * width) {
    throw ShapeError("affinity_row_image: matrix does not match the grid");
  }
  if (query_h < 0 || query_h >= height || query_w < 0 || query_w >= width) {
    throw ShapeError("affinity_row_image: query out of bounds");
  }
  const int64_t q = query_h * width + query_w;
  std::vector<double> img(static_cast<size_t>(height * width));
  for (int64_t p = 0; p < height * width; ++p) img[static_cast<size_t>(p)] = g(q, p);
  return img;
}

}  // namespace gspn
