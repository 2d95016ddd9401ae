// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.

#include "gspn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gspn/oracle.hpp"
#include "gspn/reference_attention.hpp"
#include "gspn/tensor_io.hpp"

namespace gspn {
namespace {

// Position of (h, w) along the scan order, mirroring the engine's rule.
int64_t scan_step(Direction dir, const Dims4& d, int64_t h, int64_t w) {
  switch (dir) {
    case Direction::kTopToBottom:
      return h;
    case Direction::kBottomToTop:
      return d.h - 1 - h;
    case Direction::kLeftToRight:
      return w;
    case Direction::kRightToLeft:
      return d.w - 1 - w;
  }
  return 0;
}

int64_t orth_index(Direction dir, int64_t h, int64_t w) {
  return (dir == Direction::kTopToBottom || dir == Direction::kBottomToTop) ? w : h;
}

bool is_group_start(int64_t step, int64_t axis, int64_t groups) {
  const int64_t base = axis / groups;
  return step % base == 0 && step / base < groups;
}

void fail(CheckStats& stats, FailureCapture* cap, const std::string& note) {
  stats.passed = false;
  if (cap != nullptr && cap->note.empty()) cap->note = note;
}

void capture_tensor(FailureCapture* cap, const std::string& name, const Tensor4<double>& t) {
  if (cap != nullptr) cap->tensors.emplace_back(name, t);
}

Dims4 random_dims(Rng& rng, int64_t max_b, int64_t max_c, int64_t min_hw, int64_t max_hw) {
  return Dims4{rng.uniform_int(1, max_b), rng.uniform_int(1, max_c),
               rng.uniform_int(min_hw, max_hw), rng.uniform_int(min_hw, max_hw)};
}

struct ScanInstance {
  Tensor4<double> x;
  GateField<double> gates;
  ScanConfig cfg;
};

ScanInstance random_scan_instance(Rng& rng, Dims4 dims, Direction dir, int64_t groups,
                                  FirstLineMode mode) {
  ScanInstance inst;
  inst.x = random_tensor<double>(dims, rng, -1.0, 1.0);
  inst.gates = random_gate_field(dims, rng);
  inst.cfg = ScanConfig{dir, groups, mode};
  return inst;
}

}  // namespace

GateField<double> random_gate_field(Dims4 dims, Rng& rng, double gate_range) {
  GateField<double> g;
  g.g1 = random_tensor<double>(dims, rng, -gate_range, gate_range);
  g.g2 = random_tensor<double>(dims, rng, -gate_range, gate_range);
  g.g3 = random_tensor<double>(dims, rng, -gate_range, gate_range);
  g.lam = random_tensor<double>(dims, rng, -1.0, 1.0);
  g.u = random_tensor<double>(dims, rng, -1.0, 1.0);
  return g;
}

CheckStats fd_check_scan(const Tensor4<double>& x, const GateField<double>& gates,
                         const ScanConfig& cfg, const Tensor4<double>& dy,
                         const FdTolerance& tol) {
  CheckStats stats;
  Tensor4<double> xm = x;
  GateField<double> gm = gates;
  const auto loss = [&]() {
    const ScanOutput<double> out = scan_forward(xm, gm, cfg);
    double acc = 0.0;
    for (int64_t i = 0; i < dy.size(); ++i) acc += dy[i] * out.y[i];
    return acc;
  };
  const ScanOutput<double> out = scan_forward(x, gates, cfg);
  const ScanGradients<double> analytic = scan_backward(x, gates, cfg, out.h, dy);

  const std::array<std::pair<Tensor4<double>*, const Tensor4<double>*>, 6> items = {{
      {&xm, &analytic.dx},
      {&gm.lam, &analytic.dlam},
      {&gm.g1, &analytic.dg1},
      {&gm.g2, &analytic.dg2},
      {&gm.g3, &analytic.dg3},
      {&gm.u, &analytic.du},
  }};
  for (const auto& [param, grad] : items) {
    for (int64_t i = 0; i < param->size(); ++i) {
      const double saved = (*param)[i];
      (*param)[i] = saved + tol.eps;
      const double lp = loss();
      (*param)[i] = saved - tol.eps;
      const double lm = loss();
      (*param)[i] = saved;
      const double fd = (lp - lm) / (2.0 * tol.eps);
      const double a = (*grad)[i];
      const double err = std::abs(a - fd);
      const double scale = std::max(std::abs(a), std::abs(fd));
      if (scale >= tol.solid_scale) stats.max_error = std::max(stats.max_error, err / scale);
      if (err > tol.atol + tol.rtol * scale) stats.passed = false;
      ++stats.cases;
    }
  }
  return stats;
}

CheckStats fd_check_block(const Tensor4<double>& x, const GspnBlockParams& params,
                          int64_t groups, const Tensor4<double>& dout,
                          const FdTolerance& tol) {
  CheckStats stats;
  Tensor4<double> xm = x;
  GspnBlockParams pm = params;
  const auto loss = [&]() {
    const Tensor4<double> out = block_forward(xm, pm, groups);
    double acc = 0.0;
    for (int64_t i = 0; i < dout.size(); ++i) acc += dout[i] * out[i];
    return acc;
  };
  BlockState state;
  block_forward(x, params, groups, &state);
  const BlockGradients analytic = block_backward(x, params, groups, state, dout);

  struct Item {
    double* values;
    const double* grads;
    int64_t count;
  };
  std::vector<Item> items;
  items.push_back({xm.data(), analytic.dx.data(), xm.size()});
  const std::array<std::pair<Conv1x1*, const Conv1x1*>, 5> convs = {{
      {&pm.reduce, &analytic.dparams.reduce},
      {&pm.proj_u, &analytic.dparams.proj_u},
      {&pm.proj_lam, &analytic.dparams.proj_lam},
      {&pm.proj_w, &analytic.dparams.proj_w},
      {&pm.merge, &analytic.dparams.merge},
  }};
  for (const auto& [conv, grad] : convs) {
    items.push_back({conv->weight.data(), grad->weight.data(),
                     static_cast<int64_t>(conv->weight.size())});
    items.push_back({conv->bias.data(), grad->bias.data(), static_cast<int64_t>(conv->bias.size())});
  }
  for (const Item& item : items) {
    for (int64_t i = 0; i < item.count; ++i) {
      const double saved = item.values[i];
      item.values[i] = saved + tol.eps;
      const double lp = loss();
      item.values[i] = saved - tol.eps;
      const double lm = loss();
      item.values[i] = saved;
      const double fd = (lp - lm) / (2.0 * tol.eps);
      const double a = item.grads[i];
      const double err = std::abs(a - fd);
      const double scale = std::max(std::abs(a), std::abs(fd));
      if (scale >= tol.solid_scale) stats.max_error = std::max(stats.max_error, err / scale);
      if (err > tol.atol + tol.rtol * scale) stats.passed = false;
      ++stats.cases;
    }
  }
  return stats;
}

CheckStats check_tensor_ops(Rng& rng, int64_t instances, FailureCapture* cap) {
  CheckStats stats;
  for (int64_t k = 0; k < instances; ++k) {
    Dims4 dims = random_dims(rng, 2, 3, 0, 5);
    if (k % 4 != 0) dims.h = std::max<int64_t>(dims.h, 1), dims.w = std::max<int64_t>(dims.w, 1);
    Tensor4<double> t = random_tensor<double>(dims, rng);
    Tensor4<double> s = random_tensor<double>(dims, rng);

    // Layout law: the linear index formula is the construction order.
    bool layout_ok = true;
    for (int64_t b = 0; b < dims.b && layout_ok; ++b)
      for (int64_t c = 0; c < dims.c && layout_ok; ++c)
        for (int64_t h = 0; h < dims.h && layout_ok; ++h)
          for (int64_t w = 0; w < dims.w && layout_ok; ++w) {
            const int64_t idx = ((b * dims.c + c) * dims.h + h) * dims.w + w;
            if (t.index(b, c, h, w) != idx || t(b, c, h, w) != t[idx]) layout_ok = false;
          }
    const bool involutions = bit_equal(flip_w(flip_w(t)), t) &&
                             bit_equal(flip_h(flip_h(t)), t) &&
                             bit_equal(transpose_hw(transpose_hw(t)), t);
    const bool commute = bit_equal(flip_w(hadamard(t, s)), hadamard(flip_w(t), flip_w(s))) &&
                         bit_equal(transpose_hw(add(t, s)), add(transpose_hw(t), transpose_hw(s)));
    bool transpose_ok = transpose_hw(t).dims() == Dims4{dims.b, dims.c, dims.w, dims.h};
    for (int64_t b = 0; b < dims.b && transpose_ok; ++b)
      for (int64_t h = 0; h < dims.h && transpose_ok; ++h)
        for (int64_t w = 0; w < dims.w && transpose_ok; ++w) {
          if (transpose_hw(t)(b, 0, w, h) != t(b, 0, h, w)) transpose_ok = false;
        }
    if (!(layout_ok && involutions && commute && transpose_ok)) {
      fail(stats, cap, "tensor op identity violated on dims " + dims.str());
      capture_tensor(cap, "tensor", t);
    }
    ++stats.cases;
  }
  return stats;
}

CheckStats check_serialization(Rng& rng, int64_t instances, FailureCapture* cap) {
  CheckStats stats;
  for (int64_t k = 0; k < instances; ++k) {
    const Dims4 dims = random_dims(rng, 2, 3, 1, 5);
    if (k % 2 == 0) {
      Tensor4<double> t = random_tensor<double>(dims, rng, -100.0, 100.0);
      std::stringstream ss;
      save(t, ss);
      const Tensor4<double> back = std::get<Tensor4<double>>(load(ss));
      if (!bit_equal(t, back)) {
        fail(stats, cap, "f64 round trip not bit-exact on " + dims.str());
        capture_tensor(cap, "tensor", t);
      }
    } else {
      Tensor4<float> t(dims);
      for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(-100.0, 100.0));
      std::stringstream ss;
      save(t, ss);
      const Tensor4<float> back = std::get<Tensor4<float>>(load(ss));
      if (!bit_equal(t, back)) fail(stats, cap, "f32 round trip not bit-exact on " + dims.str());
    }
    ++stats.cases;
  }

  // Negative cases: each malformed stream must raise its own parse error.
  Tensor4<double> t(Dims4{1, 1, 2, 2}, 1.5);
  std::stringstream good;
  save(t, good);
  const std::string bytes = good.str();
  const auto expect_kind = [&](std::string data, ParseError::Kind kind, const char* what) {
    std::stringstream ss(data);
    try {
      load(ss);
    } catch (const ParseError& e) {
      if (e.kind() == kind) return true;
    } catch (...) {
    }
    fail(stats, cap, std::string("parse error not raised: ") + what);
    return false;
  };
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_kind(bad_magic, ParseError::Kind::kBadMagic, "bad magic");
  std::string bad_version = bytes;
  bad_version[4] = 0x7f;
  expect_kind(bad_version, ParseError::Kind::kBadVersion, "bad version");
  std::string bad_dtype = bytes;
  bad_dtype[5] = 0x09;
  expect_kind(bad_dtype, ParseError::Kind::kBadDtype, "bad dtype");
  expect_kind(bytes.substr(0, bytes.size() - 3), ParseError::Kind::kTruncated, "truncated payload");
  expect_kind(bytes.substr(0, 10), ParseError::Kind::kTruncated, "truncated header");
  stats.cases += 5;
  return stats;
}

CheckStats check_row_stochasticity(Rng& rng, int64_t instances, bool inject_corruption,
                                   FailureCapture* cap) {
  CheckStats stats;
  for (int64_t k = 0; k < instances; ++k) {
    const Dims4 dims = random_dims(rng, 2, 3, 2, 8);
    const Direction dir = kAllDirections[static_cast<size_t>(k % 4)];
    const int64_t groups = (k % 2 == 0) ? 1 : 2;
    const GateField<double> gates = random_gate_field(dims, rng);
    const ScanConfig cfg{dir, groups, FirstLineMode::kLearnedLambda};
    NormalizedGates<double> norm = normalize_gates(gates.g1, gates.g2, gates.g3, cfg);
    if (inject_corruption && k == 0) {
      // Negative-control hook: break one normalized weight.
      norm.w2(0, 0, dims.h - 1, dims.w / 2) += 0.05;
    }
    const int64_t axis = scan_axis_length(dir, dims);
    for (int64_t b = 0; b < dims.b; ++b)
      for (int64_t c = 0; c < dims.c; ++c)
        for (int64_t h = 0; h < dims.h; ++h)
          for (int64_t w = 0; w < dims.w; ++w) {
            const int64_t i = norm.w1.index(b, c, h, w);
            const double w1 = norm.w1[i], w2 = norm.w2[i], w3 = norm.w3[i];
            const int64_t step = scan_step(dir, dims, h, w);
            const int64_t o = orth_index(dir, h, w);
            const int64_t orth_len = (dir == Direction::kTopToBottom ||
                                      dir == Direction::kBottomToTop)
                                         ? dims.w
                                         : dims.h;
            bool ok = true;
            if (is_group_start(step, axis, groups)) {
              ok = (w1 == 0.0 && w2 == 0.0 && w3 == 0.0);
            } else {
              const bool p1 = o > 0, p3 = o + 1 < orth_len;
              double sum = w2;
              ok = ok && w2 > 0.0 && w2 < 1.0 + 1e-12;
              ok = ok && (p1 ? (w1 > 0.0) : (w1 == 0.0));
              ok = ok && (p3 ? (w3 > 0.0) : (w3 == 0.0));
              sum += w1 + w3;
              const double dev = std::abs(sum - 1.0);
              stats.max_error = std::max(stats.max_error, dev);
              ok = ok && dev <= 1e-12;
            }
            if (!ok) {
              fail(stats, cap,
                   "row-stochastic violation at " + dims.str() + " pixel (" + std::to_string(h) +
                       "," + std::to_string(w) + ") direction " + direction_name(dir));
              capture_tensor(cap, "g1", gates.g1);
              capture_tensor(cap, "g2", gates.g2);
              capture_tensor(cap, "g3", gates.g3);
              return stats;
            }
          }
    ++stats.cases;
  }
  return stats;
}

CheckStats check_oracle_equivalence(Rng& rng, const std::vector<int64_t>& sides,
                                    int64_t instances, double tol, FailureCapture* cap) {
  CheckStats stats;
  for (int64_t k = 0; k < instances; ++k) {
    const int64_t side = sides[static_cast<size_t>(k % static_cast<int64_t>(sides.size()))];
    Dims4 dims{rng.uniform_int(1, 2), rng.uniform_int(1, 4), side, side};
    if (k % 3 == 2 && side > 2) dims.w = side - 1;  // non-square coverage
    const Direction dir = kAllDirections[static_cast<size_t>(k % 4)];
    const int64_t axis = scan_axis_length(dir, dims);
    const int64_t groups = (k % 2 == 1 && axis >= 2) ? 2 : 1;
    const FirstLineMode mode =
        (k % 5 == 4) ? FirstLineMode::kIdentityLambda : FirstLineMode::kLearnedLambda;
    const ScanInstance inst =
        random_scan_instance(rng, dims, dir, groups, mode);
    const ScanOutput<double> out = scan_forward(inst.x, inst.gates, inst.cfg);
    for (int64_t b = 0; b < dims.b; ++b)
      for (int64_t c = 0; c < dims.c; ++c) {
        const Eigen::MatrixXd g_mat = expand_dense_G(inst.gates, inst.cfg, b, c);
        const Eigen::VectorXd hv = g_mat * vectorize_plane(inst.x, b, c);
        double err = 0.0;
        for (int64_t h = 0; h < dims.h; ++h)
          for (int64_t w = 0; w < dims.w; ++w) {
            const int64_t p = h * dims.w + w;
            err = std::max(err, std::abs(out.h(b, c, h, w) - hv(p)));
            err = std::max(err,
                           std::abs(out.y(b, c, h, w) - inst.gates.u(b, c, h, w) * hv(p)));
          }
        stats.max_error = std::max(stats.max_error, err);
        if (err > tol) {
          fail(stats, cap,
               "scan/oracle mismatch " + std::to_string(err) + " on " + dims.str() +
                   " direction " + direction_name(dir) + " groups " + std::to_string(groups));
          capture_tensor(cap, "x", inst.x);
          capture_tensor(cap, "g1", inst.gates.g1);
          capture_tensor(cap, "g2", inst.gates.g2);
          capture_tensor(cap, "g3", inst.gates.g3);
          capture_tensor(cap, "lam", inst.gates.lam);
          capture_tensor(cap, "u", inst.gates.u);
          return stats;
        }
      }
    ++stats.cases;
  }
  return stats;
}

CheckStats check_stochastic_products(Rng& rng, int64_t chains, int64_t max_len,
                                     int64_t max_width, FailureCapture* cap) {
  CheckStats stats;
  for (int64_t k = 0; k < chains; ++k) {
    const int64_t width = rng.uniform_int(2, max_width);
    const int64_t len = rng.uniform_int(2, max_len);
    const Dims4 dims{1, 1, len + 1, width};
    const GateField<double> gates = random_gate_field(dims, rng);
    const ScanConfig cfg{Direction::kTopToBottom, 1, FirstLineMode::kLearnedLambda};
    const NormalizedGates<double> norm = normalize_gates(gates.g1, gates.g2, gates.g3, cfg);
    std::vector<TridiagonalLine> lines;
    for (int64_t r = 1; r <= len; ++r) lines.push_back(line_from_normalized(norm, 0, 0, r));
    const StochasticProductReport report = check_row_stochastic_product(lines);
    stats.max_error = std::max(stats.max_error, report.max_row_sum_deviation);
    bool ok = report.row_stochastic && report.min_entry >= 0.0;
    // Tridiagonal products fill in one band per factor; a chain at least as
    // long as the width must be structurally dense.
    if (len >= width && report.zero_entries_in_final != 0) ok = false;
    if (!ok) {
      fail(stats, cap,
           "stochastic product violation, chain " + std::to_string(len) + " width " +
               std::to_string(width) + " first bad step " +
               std::to_string(report.first_violation_step));
      capture_tensor(cap, "g1", gates.g1);
      capture_tensor(cap, "g2", gates.g2);
      capture_tensor(cap, "g3", gates.g3);
      return stats;
    }
    ++stats.cases;
  }
  return stats;
}

CheckStats check_spectral_stability_random(Rng& rng, int64_t instances, int64_t max_width,
                                           FailureCapture* cap) {
  CheckStats stats;
  double max_singular = 0.0;
  for (int64_t k = 0; k < instances; ++k) {
    const int64_t width = rng.uniform_int(1, max_width);
    const Dims4 dims{1, 1, 2, width};
    const GateField<double> gates = random_gate_field(dims, rng);
    const ScanConfig cfg{Direction::kTopToBottom, 1, FirstLineMode::kLearnedLambda};
    const NormalizedGates<double> norm = normalize_gates(gates.g1, gates.g2, gates.g3, cfg);
    const TridiagonalLine line = line_from_normalized(norm, 0, 0, 1);
    const SpectralReport report = check_spectral_stability(line);
    stats.max_error = std::max(stats.max_error, std::abs(report.gershgorin_bound - 1.0));
    stats.max_error = std::max(stats.max_error, std::max(0.0, report.spectral_radius - 1.0));
    max_singular = std::max(max_singular, report.largest_singular_value);
    if (!report.stable || std::abs(report.gershgorin_bound - 1.0) > 1e-12) {
      fail(stats, cap,
           "spectral stability violated at width " + std::to_string(width) + ": gershgorin " +
               std::to_string(report.gershgorin_bound) + ", rho " +
               std::to_string(report.spectral_radius));
      capture_tensor(cap, "g1", gates.g1);
      capture_tensor(cap, "g2", gates.g2);
      capture_tensor(cap, "g3", gates.g3);
      return stats;
    }
    ++stats.cases;
  }
  std::ostringstream detail;
  detail << "max singular value observed " << max_singular << " (diagnostic, >= 1 expected)";
  stats.detail = detail.str();
  return stats;
}

CheckStats check_scan_gradients(Rng& rng, int64_t instances, FailureCapture* cap) {
  CheckStats stats;
  for (int64_t k = 0; k < instances; ++k) {
    const Dims4 dims = random_dims(rng, 2, 3, 2, 6);
    const Direction dir = kAllDirections[static_cast<size_t>(k % 4)];
    const int64_t groups = (k % 2 == 1) ? 2 : 1;
    const FirstLineMode mode =
        (k % 3 == 2) ? FirstLineMode::kIdentityLambda : FirstLineMode::kLearnedLambda;
    const ScanInstance inst = random_scan_instance(rng, dims, dir, groups, mode);
    const Tensor4<double> dy = random_tensor<double>(dims, rng);
    const CheckStats one = fd_check_scan(inst.x, inst.gates, inst.cfg, dy);
    stats.max_error = std::max(stats.max_error, one.max_error);
    stats.cases += 1;
    if (!one.passed) {
      fail(stats, cap,
           "scan gradient mismatch (max floored rel err " + std::to_string(one.max_error) +
               ") on " + dims.str() + " direction " + direction_name(dir));
      capture_tensor(cap, "x", inst.x);
      capture_tensor(cap, "dy", dy);
      return stats;
    }
  }
  return stats;
}

CheckStats check_block_gradients(Rng& rng, int64_t instances, FailureCapture* cap) {
  CheckStats stats;
  for (int64_t k = 0; k < instances; ++k) {
    const Dims4 dims{1, 4, 6, 6};
    const Tensor4<double> x = random_tensor<double>(dims, rng);
    const GspnBlockParams params = init_block_params(4, rng.next_u64(), 2);
    const Tensor4<double> dout = random_tensor<double>(dims, rng);
    const int64_t groups = (k % 2 == 1) ? 2 : 1;
    const CheckStats one = fd_check_block(x, params, groups, dout);
    stats.max_error = std::max(stats.max_error, one.max_error);
    stats.cases += 1;
    if (!one.passed) {
      fail(stats, cap,
           "block gradient mismatch (max floored rel err " + std::to_string(one.max_error) + ")");
      capture_tensor(cap, "x", x);
      capture_tensor(cap, "dout", dout);
      return stats;
    }
  }
  return stats;
}

CheckStats check_group_isolation(Rng& rng, int64_t instances, FailureCapture* cap) {
  CheckStats stats;
  for (int64_t k = 0; k < instances; ++k) {
    const Dims4 dims = random_dims(rng, 2, 2, 4, 8);
    const Direction dir = kAllDirections[static_cast<size_t>(k % 4)];
    const ScanInstance inst =
        random_scan_instance(rng, dims, dir, 2, FirstLineMode::kLearnedLambda);
    const int64_t axis = scan_axis_length(dir, dims);
    const int64_t base = axis / 2;

    Tensor4<double> perturbed = inst.x;
    for (int64_t b = 0; b < dims.b; ++b)
      for (int64_t c = 0; c < dims.c; ++c)
        for (int64_t h = 0; h < dims.h; ++h)
          for (int64_t w = 0; w < dims.w; ++w) {
            if (scan_step(dir, dims, h, w) < base) {
              perturbed(b, c, h, w) += rng.uniform(0.5, 1.5);
            }
          }
    const ScanOutput<double> a = scan_forward(inst.x, inst.gates, inst.cfg);
    const ScanOutput<double> b = scan_forward(perturbed, inst.gates, inst.cfg);
    bool ok = true;
    for (int64_t bb = 0; bb < dims.b && ok; ++bb)
      for (int64_t c = 0; c < dims.c && ok; ++c)
        for (int64_t h = 0; h < dims.h && ok; ++h)
          for (int64_t w = 0; w < dims.w && ok; ++w) {
            if (scan_step(dir, dims, h, w) >= base) {
              ok = a.h(bb, c, h, w) == b.h(bb, c, h, w) && a.y(bb, c, h, w) == b.y(bb, c, h, w);
            }
          }
    if (!ok) {
      fail(stats, cap,
           std::string("group leak across the boundary, direction ") + direction_name(dir));
      capture_tensor(cap, "x", inst.x);
      capture_tensor(cap, "x_perturbed", perturbed);
      return stats;
    }
    ++stats.cases;
  }
  return stats;
}

CheckStats check_direction_metamorphism(Rng& rng, int64_t instances, FailureCapture* cap) {
  CheckStats stats;
  const auto flip_gates = [](const GateField<double>& g, auto&& op) {
    return GateField<double>{op(g.g1), op(g.g2), op(g.g3), op(g.lam), op(g.u)};
  };
  for (int64_t k = 0; k < instances; ++k) {
    const Dims4 dims = random_dims(rng, 2, 2, 2, 6);
    const int64_t groups = (k % 2 == 1) ? 2 : 1;
    const ScanInstance inst = random_scan_instance(rng, dims, Direction::kRightToLeft, groups,
                                                   FirstLineMode::kLearnedLambda);

    // Reversal: right-to-left == flip_w o left-to-right o flip_w.
    const ScanOutput<double> rtl = scan_forward(inst.x, inst.gates, inst.cfg);
    const auto fw = [](const Tensor4<double>& t) { return flip_w(t); };
    const ScanOutput<double> ltr_flipped =
        scan_forward(flip_w(inst.x), flip_gates(inst.gates, fw),
                     ScanConfig{Direction::kLeftToRight, groups, inst.cfg.first_line});
    bool ok = bit_equal(rtl.h, flip_w(ltr_flipped.h)) && bit_equal(rtl.y, flip_w(ltr_flipped.y));

    // Transpose reduction: top-to-bottom == T o left-to-right o T.
    const auto tr = [](const Tensor4<double>& t) { return transpose_hw(t); };
    const ScanOutput<double> ttb =
        scan_forward(inst.x, inst.gates,
                     ScanConfig{Direction::kTopToBottom, std::min(groups, dims.h), inst.cfg.first_line});
    const ScanOutput<double> ltr_t =
        scan_forward(transpose_hw(inst.x), flip_gates(inst.gates, tr),
                     ScanConfig{Direction::kLeftToRight, std::min(groups, dims.h), inst.cfg.first_line});
    ok = ok && bit_equal(ttb.h, transpose_hw(ltr_t.h)) && bit_equal(ttb.y, transpose_hw(ltr_t.y));

    // Symmetric instance: left-to-right output is flip_w of right-to-left.
    const auto sym = [](const Tensor4<double>& t) {
      Tensor4<double> f = flip_w(t);
      Tensor4<double> out(t.dims());
      for (int64_t i = 0; i < t.size(); ++i) out[i] = 0.5 * (t[i] + f[i]);
      return out;
    };
    const Tensor4<double> xs = sym(inst.x);
    const GateField<double> gs = flip_gates(inst.gates, sym);
    const ScanOutput<double> sym_ltr =
        scan_forward(xs, gs, ScanConfig{Direction::kLeftToRight, groups, inst.cfg.first_line});
    const ScanOutput<double> sym_rtl =
        scan_forward(xs, gs, ScanConfig{Direction::kRightToLeft, groups, inst.cfg.first_line});
    ok = ok && bit_equal(sym_ltr.y, flip_w(sym_rtl.y));

    if (!ok) {
      fail(stats, cap, "direction metamorphic identity broken on " + dims.str());
      capture_tensor(cap, "x", inst.x);
      return stats;
    }
    ++stats.cases;
  }
  return stats;
}

CheckStats check_linear_attention_reduction(Rng& rng, int64_t instances, int64_t max_tokens,
                                            double tol, FailureCapture* cap) {
  CheckStats stats;
  for (int64_t k = 0; k < instances; ++k) {
    const int64_t n = rng.uniform_int(1, max_tokens);
    const int64_t cols = (k % 2 == 0) ? 1 : rng.uniform_int(2, 4);
    const Dims4 dims{1, 1, n, cols};
    const GateField<double> gates = random_gate_field(dims, rng);
    const ScanConfig cfg{Direction::kTopToBottom, 1, FirstLineMode::kLearnedLambda};
    const Tensor4<double> x = random_tensor<double>(dims, rng);
    const Eigen::MatrixXd g_id = expand_dense_G(gates, cfg, 0, 0, WeightInjection::kIdentity);
    const Eigen::VectorXd hv = g_id * vectorize_plane(x, 0, 0);

    // Identity inter-line weights turn每 column into an independent causal
    // chain: y_i = u_i * sum_{j<=i} lam_j x_j, i.e. d=1 linear attention with
    // Q = u, K = lam, V = x.
    double err = 0.0;
    for (int64_t col = 0; col < cols; ++col) {
      SeqBatch q(n, 1), key(n, 1), val(n, 1);
      for (int64_t i = 0; i < n; ++i) {
        q(i, 0) = gates.u(0, 0, i, col);
        key(i, 0) = gates.lam(0, 0, i, col);
        val(i, 0) = x(0, 0, i, col);
      }
      const SeqBatch y_att = linear_attention_causal(q, key, val);
      for (int64_t i = 0; i < n; ++i) {
        const double y_oracle = gates.u(0, 0, i, col) * hv(i * cols + col);
        err = std::max(err, std::abs(y_oracle - y_att(i, 0)));
      }
    }
    stats.max_error = std::max(stats.max_error, err);
    if (err > tol) {
      fail(stats, cap, "identity-injection oracle disagrees with causal linear attention");
      capture_tensor(cap, "x", x);
      capture_tensor(cap, "lam", gates.lam);
      capture_tensor(cap, "u", gates.u);
      return stats;
    }
    ++stats.cases;
  }
  return stats;
}

CheckStats check_boundedness(Rng& rng, int64_t instances, FailureCapture* cap) {
  CheckStats stats;
  for (int64_t k = 0; k < instances; ++k) {
    const Dims4 dims = random_dims(rng, 2, 2, 2, 8);
    const Direction dir = kAllDirections[static_cast<size_t>(k % 4)];
    const int64_t axis = scan_axis_length(dir, dims);
    const int64_t groups = (k % 2 == 1 && axis >= 2) ? 2 : 1;
    const ScanInstance inst =
        random_scan_instance(rng, dims, dir, groups, FirstLineMode::kLearnedLambda);
    const ScanOutput<double> out = scan_forward(inst.x, inst.gates, inst.cfg);
    const int64_t orth_len =
        (dir == Direction::kTopToBottom || dir == Direction::kBottomToTop) ? dims.w : dims.h;

    bool ok = true;
    for (int64_t b = 0; b < dims.b && ok; ++b)
      for (int64_t c = 0; c < dims.c && ok; ++c) {
        double bound = 0.0;
        for (int64_t step = 0; step < axis && ok; ++step) {
          if (is_group_start(step, axis, groups)) bound = 0.0;
          double line_input = 0.0, line_h = 0.0;
          for (int64_t o = 0; o < orth_len; ++o) {
            int64_t h, w;
            if (dir == Direction::kTopToBottom) h = step, w = o;
            else if (dir == Direction::kBottomToTop) h = dims.h - 1 - step, w = o;
            else if (dir == Direction::kLeftToRight) h = o, w = step;
            else h = o, w = dims.w - 1 - step;
            line_input = std::max(line_input, std::abs(inst.gates.lam(b, c, h, w) *
                                                       inst.x(b, c, h, w)));
            line_h = std::max(line_h, std::abs(out.h(b, c, h, w)));
          }
          bound += line_input;
          if (line_h > bound * (1.0 + 1e-12) + 1e-15) ok = false;
          stats.max_error = std::max(stats.max_error, line_h - bound);
        }
      }
    if (!ok) {
      fail(stats, cap, std::string("line norm exceeded the cumulative input bound, direction ") +
                           direction_name(dir));
      capture_tensor(cap, "x", inst.x);
      return stats;
    }
    ++stats.cases;
  }
  return stats;
}

CheckStats check_merged_density(Rng& rng, const std::vector<int64_t>& sides,
                                FailureCapture* cap) {
  CheckStats stats;
  for (int64_t side : sides) {
    const Dims4 dims{1, 1, side, side};
    std::array<GateField<double>, 4> gates;
    for (auto& g : gates) g = random_gate_field(dims, rng);
    const Eigen::MatrixXd merged = merged_affinity(gates, {0.25, 0.25, 0.25, 0.25}, 0, 0);
    const int64_t zeros = static_cast<int64_t>((merged.array() == 0.0).count());
    stats.max_error = std::max(stats.max_error, static_cast<double>(zeros));
    if (zeros != 0) {
      fail(stats, cap,
           "merged affinity on " + std::to_string(side) + "x" + std::to_string(side) + " has " +
               std::to_string(zeros) + " structural zeros");
      capture_tensor(cap, "lam", gates[0].lam);
      return stats;
    }
    ++stats.cases;
  }
  return stats;
}

std::vector<FamilyResult> run_verify(const VerifyOptions& options) {
  std::vector<FamilyResult> results;
  std::vector<std::pair<std::string, FailureCapture>> failures;

  const auto run = [&](const std::string& family, auto&& fn) {
    Rng rng(options.seed ^ (0x9E3779B97F4A7C15ull * (results.size() + 1)));
    FailureCapture cap;
    CheckStats stats = fn(rng, &cap);
    results.push_back(FamilyResult{family, stats});
    if (!stats.passed) failures.emplace_back(family, std::move(cap));
  };

  run("tensor-ops", [&](Rng& r, FailureCapture* c) { return check_tensor_ops(r, 20, c); });
  run("serialization", [&](Rng& r, FailureCapture* c) { return check_serialization(r, 12, c); });
  run("row-stochastic", [&](Rng& r, FailureCapture* c) {
    return check_row_stochasticity(r, 12, options.inject_bad_normalization, c);
  });
  run("oracle-equivalence", [&](Rng& r, FailureCapture* c) {
    CheckStats stats = check_oracle_equivalence(r, options.sizes, 24, 1e-10, c);
    std::string sides;
    for (int64_t s : options.sizes) sides += (sides.empty() ? "" : ",") + std::to_string(s);
    stats.detail = "grid sides " + sides + (stats.detail.empty() ? "" : "; " + stats.detail);
    return stats;
  });
  run("stochastic-product", [&](Rng& r, FailureCapture* c) {
    return check_stochastic_products(r, 20, 48, 12, c);
  });
  run("spectral-stability", [&](Rng& r, FailureCapture* c) {
    return check_spectral_stability_random(r, 24, 16, c);
  });
  run("gradient-fd-scan", [&](Rng& r, FailureCapture* c) { return check_scan_gradients(r, 4, c); });
  run("gradient-fd-block", [&](Rng& r, FailureCapture* c) { return check_block_gradients(r, 2, c); });
  run("group-isolation", [&](Rng& r, FailureCapture* c) { return check_group_isolation(r, 8, c); });
  run("direction-metamorphism",
      [&](Rng& r, FailureCapture* c) { return check_direction_metamorphism(r, 8, c); });
  run("linear-attention-reduction", [&](Rng& r, FailureCapture* c) {
    return check_linear_attention_reduction(r, 12, 64, 1e-10, c);
  });
  run("boundedness", [&](Rng& r, FailureCapture* c) { return check_boundedness(r, 8, c); });
  run("merged-density", [&](Rng& r, FailureCapture* c) {
    std::vector<int64_t> sides = {4, 8};
    return check_merged_density(r, sides, c);
  });

  for (const auto& [family, cap] : failures) {
    namespace fs = std::filesystem;
    const fs::path dir = options.reproducer_dir + "-" + family;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) continue;
    std::ofstream note(dir / "note.txt");
    note << "family: " << family << "\n"
         << "seed: " << options.seed << "\n"
         << "note: " << cap.note << "\n";
    for (const auto& [name, tensor] : cap.tensors) {
      save_file(tensor, (dir / (name + ".gspnt")).string());
    }
  }
  return results;
}

}  // namespace gspn
