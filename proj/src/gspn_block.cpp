// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.

#include "gspn/gspn_block.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gspn/errors.hpp"
#include "gspn/rng.hpp"
#include "gspn/tensor_io.hpp"

namespace gspn {
namespace {

using RowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

struct Conv1x1Grads {
  Eigen::MatrixXd dweight;
  Eigen::VectorXd dbias;
};

// din computed alongside the parameter gradients; all reductions are Eigen
// products with a fixed evaluation order, so results do not depend on the
// worker count.
Conv1x1Grads conv1x1_backward(const Conv1x1& conv, const Tensor4<double>& in,
                              const Tensor4<double>& dout, Tensor4<double>* din) {
  const Dims4 di = in.dims();
  const int64_t pixels = di.h * di.w;
  Conv1x1Grads grads{Eigen::MatrixXd::Zero(conv.weight.rows(), conv.weight.cols()),
                     Eigen::VectorXd::Zero(conv.bias.size())};
  if (din != nullptr) *din = Tensor4<double>(di);
  for (int64_t b = 0; b < di.b; ++b) {
    ConstRowMajorMap in_m(in.data() + b * di.c * pixels, di.c, pixels);
    ConstRowMajorMap dout_m(dout.data() + b * dout.dims().c * pixels, dout.dims().c, pixels);
    grads.dweight.noalias() += dout_m * in_m.transpose();
    grads.dbias.noalias() += dout_m.rowwise().sum();
    if (din != nullptr) {
      RowMajorMap din_m(din->data() + b * di.c * pixels, di.c, pixels);
      din_m.noalias() = conv.weight.transpose() * dout_m;
    }
  }
  return grads;
}

Tensor4<double> slice_channels(const Tensor4<double>& t, int64_t c0, int64_t c1) {
  const Dims4 d = t.dims();
  Tensor4<double> out(Dims4{d.b, c1 - c0, d.h, d.w});
  const int64_t pixels = d.h * d.w;
  for (int64_t b = 0; b < d.b; ++b)
    for (int64_t c = c0; c < c1; ++c) {
      const double* src = t.data() + (b * d.c + c) * pixels;
      double* dst = out.data() + (b * (c1 - c0) + (c - c0)) * pixels;
      std::copy(src, src + pixels, dst);
    }
  return out;
}

void paste_channels(Tensor4<double>& dst, const Tensor4<double>& src, int64_t c0) {
  const Dims4 ds = src.dims();
  const Dims4 dd = dst.dims();
  const int64_t pixels = dd.h * dd.w;
  for (int64_t b = 0; b < ds.b; ++b)
    for (int64_t c = 0; c < ds.c; ++c) {
      const double* s = src.data() + (b * ds.c + c) * pixels;
      double* d = dst.data() + (b * dd.c + (c0 + c)) * pixels;
      std::copy(s, s + pixels, d);
    }
}

Conv1x1 init_conv(int64_t out_ch, int64_t in_ch, Rng& rng) {
  Conv1x1 conv;
  conv.weight = Eigen::MatrixXd(out_ch, in_ch);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch));
  for (int64_t r = 0; r < out_ch; ++r)
    for (int64_t c = 0; c < in_ch; ++c) conv.weight(r, c) = rng.uniform(-bound, bound);
  conv.bias = Eigen::VectorXd::Zero(out_ch);
  return conv;
}

Tensor4<double> conv_as_tensor(const Conv1x1& conv) {
  const int64_t rows = conv.weight.rows();
  const int64_t cols = conv.weight.cols();
  Tensor4<double> t(Dims4{1, 1, rows, cols + 1});
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) t(0, 0, r, c) = conv.weight(r, c);
    t(0, 0, r, cols) = conv.bias(r);
  }
  return t;
}

Conv1x1 conv_from_tensor(const Tensor4<double>& t) {
  const Dims4 d = t.dims();
  Conv1x1 conv;
  conv.weight = Eigen::MatrixXd(d.h, d.w - 1);
  conv.bias = Eigen::VectorXd(d.h);
  for (int64_t r = 0; r < d.h; ++r) {
    for (int64_t c = 0; c + 1 < d.w; ++c) conv.weight(r, c) = t(0, 0, r, c);
    conv.bias(r) = t(0, 0, r, d.w - 1);
  }
  return conv;
}

const std::array<const char*, 5> kProjNames = {"reduce", "proj_u", "proj_lam", "proj_w", "merge"};

std::array<Conv1x1*, 5> proj_ptrs(GspnBlockParams& p) {
  return {&p.reduce, &p.proj_u, &p.proj_lam, &p.proj_w, &p.merge};
}

std::array<const Conv1x1*, 5> proj_ptrs(const GspnBlockParams& p) {
  return {&p.reduce, &p.proj_u, &p.proj_lam, &p.proj_w, &p.merge};
}

}  // namespace

Tensor4<double> apply_conv1x1(const Conv1x1& conv, const Tensor4<double>& in) {
  const Dims4 d = in.dims();
  if (d.c != conv.weight.cols()) {
    throw ShapeError("conv1x1: input has " + std::to_string(d.c) + " channels, weight expects " +
                     std::to_string(conv.weight.cols()));
  }
  Tensor4<double> out(Dims4{d.b, conv.weight.rows(), d.h, d.w});
  const int64_t pixels = d.h * d.w;
  if (pixels == 0 || d.b == 0) return out;
  for (int64_t b = 0; b < d.b; ++b) {
    ConstRowMajorMap in_m(in.data() + b * d.c * pixels, d.c, pixels);
    RowMajorMap out_m(out.data() + b * conv.weight.rows() * pixels, conv.weight.rows(), pixels);
    out_m.noalias() = conv.weight * in_m;
    out_m.colwise() += conv.bias;
  }
  return out;
}

GspnBlockParams init_block_params(int64_t channels, uint64_t seed, int64_t reduced) {
  if (channels < 1) throw ShapeError("block needs at least one channel");
  if (reduced <= 0) reduced = std::max<int64_t>(1, channels / 4);
  Rng rng(seed);
  GspnBlockParams p;
  p.reduce = init_conv(reduced, channels, rng);
  p.proj_u = init_conv(channels, reduced, rng);
  p.proj_lam = init_conv(channels, reduced, rng);
  p.proj_w = init_conv(12 * channels, reduced, rng);
  p.merge = init_conv(channels, 4 * channels, rng);
  return p;
}

Tensor4<double> block_forward(const Tensor4<double>& x, const GspnBlockParams& params,
                              int64_t groups, BlockState* state) {
  const Dims4 d = x.dims();
  if (d.c != params.channels()) {
    throw ShapeError("block_forward: expected " + std::to_string(params.channels()) +
                     " channels, got " + std::to_string(d.c));
  }
  const int64_t c = d.c;
  Tensor4<double> z = apply_conv1x1(params.reduce, x);
  Tensor4<double> u = apply_conv1x1(params.proj_u, z);
  Tensor4<double> lam = apply_conv1x1(params.proj_lam, z);
  Tensor4<double> gate_maps = apply_conv1x1(params.proj_w, z);

  std::array<GateField<double>, 4> gates;
  for (int64_t dir = 0; dir < 4; ++dir) {
    gates[static_cast<size_t>(dir)] =
        GateField<double>{slice_channels(gate_maps, (dir * 3 + 0) * c, (dir * 3 + 1) * c),
                          slice_channels(gate_maps, (dir * 3 + 1) * c, (dir * 3 + 2) * c),
                          slice_channels(gate_maps, (dir * 3 + 2) * c, (dir * 3 + 3) * c),
                          lam, u};
  }
  std::array<ScanOutput<double>, 4> scans = scan_all_directions(x, gates, groups);

  Tensor4<double> concat(Dims4{d.b, 4 * c, d.h, d.w});
  for (int64_t dir = 0; dir < 4; ++dir) {
    paste_channels(concat, scans[static_cast<size_t>(dir)].y, dir * c);
  }
  Tensor4<double> out = apply_conv1x1(params.merge, concat);

  if (state != nullptr) {
    state->z = std::move(z);
    state->u = std::move(u);
    state->lam = std::move(lam);
    state->gate_maps = std::move(gate_maps);
    state->gates = std::move(gates);
    state->scans = std::move(scans);
    state->concat = std::move(concat);
  }
  return out;
}

BlockGradients block_backward(const Tensor4<double>& x, const GspnBlockParams& params,
                              int64_t groups, const BlockState& state,
                              const Tensor4<double>& dout) {
  const Dims4 d = x.dims();
  const int64_t c = d.c;
  BlockGradients out;

  Tensor4<double> dconcat;
  Conv1x1Grads merge_grads = conv1x1_backward(params.merge, state.concat, dout, &dconcat);

  Tensor4<double> dx(d);
  Tensor4<double> du_total(state.u.dims());
  Tensor4<double> dlam_total(state.lam.dims());
  Tensor4<double> dgate_maps(state.gate_maps.dims());
  for (int64_t dir = 0; dir < 4; ++dir) {
    const ScanConfig cfg{kAllDirections[static_cast<size_t>(dir)], groups,
                         FirstLineMode::kLearnedLambda};
    const Tensor4<double> dy = slice_channels(dconcat, dir * c, (dir + 1) * c);
    const ScanGradients<double> grads = scan_backward(
        x, state.gates[static_cast<size_t>(dir)], cfg, state.scans[static_cast<size_t>(dir)].h, dy);
    add_inplace(dx, grads.dx);
    add_inplace(du_total, grads.du);
    add_inplace(dlam_total, grads.dlam);
    paste_channels(dgate_maps, grads.dg1, (dir * 3 + 0) * c);
    paste_channels(dgate_maps, grads.dg2, (dir * 3 + 1) * c);
    paste_channels(dgate_maps, grads.dg3, (dir * 3 + 2) * c);
  }

  Tensor4<double> dz(state.z.dims());
  Tensor4<double> dz_part;
  Conv1x1Grads u_grads = conv1x1_backward(params.proj_u, state.z, du_total, &dz_part);
  add_inplace(dz, dz_part);
  Conv1x1Grads lam_grads = conv1x1_backward(params.proj_lam, state.z, dlam_total, &dz_part);
  add_inplace(dz, dz_part);
  Conv1x1Grads w_grads = conv1x1_backward(params.proj_w, state.z, dgate_maps, &dz_part);
  add_inplace(dz, dz_part);

  Tensor4<double> dx_reduce;
  Conv1x1Grads reduce_grads = conv1x1_backward(params.reduce, x, dz, &dx_reduce);
  add_inplace(dx, dx_reduce);

  out.dx = std::move(dx);
  out.dparams.reduce = Conv1x1{std::move(reduce_grads.dweight), std::move(reduce_grads.dbias)};
  out.dparams.proj_u = Conv1x1{std::move(u_grads.dweight), std::move(u_grads.dbias)};
  out.dparams.proj_lam = Conv1x1{std::move(lam_grads.dweight), std::move(lam_grads.dbias)};
  out.dparams.proj_w = Conv1x1{std::move(w_grads.dweight), std::move(w_grads.dbias)};
  out.dparams.merge = Conv1x1{std::move(merge_grads.dweight), std::move(merge_grads.dbias)};
  return out;
}

void save_checkpoint(const GspnBlockParams& params, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir);
  const auto projections = proj_ptrs(params);
  for (size_t i = 0; i < projections.size(); ++i) {
    const Tensor4<double> t = conv_as_tensor(*projections[i]);
    const std::string file = std::string(kProjNames[i]) + ".gspnt";
    save_file(t, (fs::path(dir) / file).string());
    const Dims4 dm = t.dims();
    manifest << kProjNames[i] << " " << dm.b << " " << dm.c << " " << dm.h << " " << dm.w
             << " f64\n";
  }
}

GspnBlockParams load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw std::runtime_error("cannot open manifest in " + dir);
  GspnBlockParams params;
  auto projections = proj_ptrs(params);
  std::string line;
  size_t loaded = 0;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string name, dtype;
    Dims4 dm;
    ss >> name >> dm.b >> dm.c >> dm.h >> dm.w >> dtype;
    bool known = false;
    for (size_t i = 0; i < kProjNames.size(); ++i) {
      if (name == kProjNames[i]) {
        const Tensor4<double> t =
            load_file_f64((fs::path(dir) / (name + ".gspnt")).string());
        if (!(t.dims() == dm)) {
          throw ParseError(ParseError::Kind::kBadHeader,
                           "checkpoint dims disagree with manifest for " + name);
        }
        *projections[i] = conv_from_tensor(t);
        known = true;
        ++loaded;
        break;
      }
    }
    if (!known) throw std::runtime_error("unknown projection '" + name + "' in manifest");
  }
  if (loaded != kProjNames.size()) {
    throw std::runtime_error("manifest lists " + std::to_string(loaded) + " of " +
                             std::to_string(kProjNames.size()) + " projections");
  }
  return params;
}

namespace {

// 3x3 uniform blur, boundary pixels averaged over their present neighbors.
Tensor4<double> blur3(const Tensor4<double>& x) {
  const Dims4 d = x.dims();
  Tensor4<double> out(d);
  for (int64_t b = 0; b < d.b; ++b)
    for (int64_t c = 0; c < d.c; ++c)
      for (int64_t h = 0; h < d.h; ++h)
        for (int64_t w = 0; w < d.w; ++w) {
          double sum = 0.0;
          int count = 0;
          for (int64_t dh = -1; dh <= 1; ++dh)
            for (int64_t dw = -1; dw <= 1; ++dw) {
              const int64_t hh = h + dh, ww = w + dw;
              if (hh < 0 || hh >= d.h || ww < 0 || ww >= d.w) continue;
              sum += x(b, c, hh, ww);
              ++count;
            }
          out(b, c, h, w) = sum / count;
        }
  return out;
}

}  // namespace

ToyData make_toy_task(ToyTask task, uint64_t seed) {
  const Dims4 dims{1, 4, 8, 8};
  Rng rng(seed);
  ToyData data;
  // Band-limited input field (smoothed seeded noise) rather than white
  // noise; the mechanism targets image-like signals.
  data.x = blur3(blur3(random_tensor<double>(dims, rng, -1.0, 1.0)));
  data.target = (task == ToyTask::kIdentity) ? data.x : blur3(data.x);
  return data;
}

namespace {

double mse(const Tensor4<double>& a, const Tensor4<double>& b) {
  double sum = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return sum / static_cast<double>(a.size());
}

void sgd_update(Conv1x1& param, const Conv1x1& grad, double lr) {
  param.weight.noalias() -= lr * grad.weight;
  param.bias.noalias() -= lr * grad.bias;
}

}  // namespace

double default_toy_lr(ToyTask task) { return task == ToyTask::kIdentity ? 2.0 : 2.5; }

TrainResult train_toy(ToyTask task, int64_t steps, double lr, uint64_t seed) {
  // Full-width reduction and local scans; short groups suit the desk-scale
  // targets (identity wants little history, blur is a 3x3 neighborhood op).
  GspnBlockParams params = init_block_params(4, seed, 4);
  const ToyData data = make_toy_task(task, seed ^ 0x9E3779B97F4A7C15ull);
  const int64_t groups = task == ToyTask::kIdentity ? 4 : 2;

  TrainResult result;
  BlockState state;
  Tensor4<double> out = block_forward(data.x, params, groups, &state);
  result.losses.push_back(mse(out, data.target));

  for (int64_t step = 1; step <= steps; ++step) {
    Tensor4<double> dout(out.dims());
    const double scale = 2.0 / static_cast<double>(out.size());
    for (int64_t i = 0; i < out.size(); ++i) dout[i] = scale * (out[i] - data.target[i]);
    BlockGradients grads = block_backward(data.x, params, groups, state, dout);
    sgd_update(params.reduce, grads.dparams.reduce, lr);
    sgd_update(params.proj_u, grads.dparams.proj_u, lr);
    sgd_update(params.proj_lam, grads.dparams.proj_lam, lr);
    sgd_update(params.proj_w, grads.dparams.proj_w, lr);
    sgd_update(params.merge, grads.dparams.merge, lr);

    out = block_forward(data.x, params, groups, &state);
    const double loss = mse(out, data.target);
    result.losses.push_back(loss);
    if (!std::isfinite(loss)) {
      result.diverged = true;
      result.diverged_step = step;
      break;
    }
  }
  return result;
}

}  // namespace gspn
