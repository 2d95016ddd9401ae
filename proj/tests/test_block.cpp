// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.

#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "gspn/gspn_block.hpp"
#include "gspn/rng.hpp"
#include "gspn/threading.hpp"
#include "gspn/verify.hpp"

using namespace gspn;

namespace {

GspnBlockParams zero_params(int64_t channels, int64_t reduced) {
  GspnBlockParams p = init_block_params(channels, 0, reduced);
  for (Conv1x1* conv : {&p.reduce, &p.proj_u, &p.proj_lam, &p.proj_w, &p.merge}) {
    conv->weight.setZero();
    conv->bias.setZero();
  }
  return p;
}

}  // namespace

TEST_CASE("all-zero projections produce all-zero output") {
  Rng rng(60);
  Tensor4<double> x = random_tensor<double>(Dims4{1, 4, 5, 5}, rng);
  GspnBlockParams p = zero_params(4, 2);
  Tensor4<double> out = block_forward(x, p, 1);
  CHECK(max_abs(out) == 0.0);
}

TEST_CASE("merge as a direction selector returns that direction's output") {
  Rng rng(61);
  const int64_t c = 3;
  Tensor4<double> x = random_tensor<double>(Dims4{1, c, 4, 4}, rng);
  GspnBlockParams p = init_block_params(c, 7);
  // select direction 1 (right-to-left) with an identity channel map
  p.merge.weight.setZero();
  p.merge.bias.setZero();
  for (int64_t ch = 0; ch < c; ++ch) p.merge.weight(ch, 1 * c + ch) = 1.0;

  BlockState state;
  Tensor4<double> out = block_forward(x, p, 1, &state);
  CHECK(bit_equal(out, state.scans[1].y));
}

TEST_CASE("block_forward rejects channel mismatches") {
  Rng rng(62);
  Tensor4<double> x = random_tensor<double>(Dims4{1, 3, 4, 4}, rng);
  GspnBlockParams p = init_block_params(4, 1);
  CHECK_THROWS_AS(block_forward(x, p, 1), ShapeError);
}

TEST_CASE("zero upstream gradient zeroes every parameter gradient") {
  Rng rng(63);
  Tensor4<double> x = random_tensor<double>(Dims4{1, 4, 4, 4}, rng);
  GspnBlockParams p = init_block_params(4, 3);
  BlockState state;
  block_forward(x, p, 1, &state);
  Tensor4<double> dout(x.dims());  // zeros
  BlockGradients g = block_backward(x, p, 1, state, dout);
  CHECK(max_abs(g.dx) == 0.0);
  for (const Conv1x1* conv :
       {&g.dparams.reduce, &g.dparams.proj_u, &g.dparams.proj_lam, &g.dparams.proj_w,
        &g.dparams.merge}) {
    CHECK(conv->weight.cwiseAbs().maxCoeff() == 0.0);
    CHECK(conv->bias.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("block gradients match central finite differences (C_r = 2)") {
  Rng rng(64);
  Tensor4<double> x = random_tensor<double>(Dims4{1, 4, 6, 6}, rng);
  GspnBlockParams p = init_block_params(4, rng.next_u64(), 2);
  Tensor4<double> dout = random_tensor<double>(x.dims(), rng);
  CheckStats stats = fd_check_block(x, p, 1, dout);
  CHECK(stats.passed);
}

TEST_CASE("merge weight gradient equals the dout/concat correlation") {
  Rng rng(65);
  Tensor4<double> x = random_tensor<double>(Dims4{2, 2, 3, 3}, rng);
  GspnBlockParams p = init_block_params(2, 11);
  BlockState state;
  block_forward(x, p, 1, &state);
  Tensor4<double> dout = random_tensor<double>(x.dims(), rng);
  BlockGradients g = block_backward(x, p, 1, state, dout);

  const Dims4 d = x.dims();
  for (int64_t co = 0; co < 2; ++co)
    for (int64_t ci = 0; ci < 8; ++ci) {
      double corr = 0.0;
      for (int64_t b = 0; b < d.b; ++b)
        for (int64_t h = 0; h < d.h; ++h)
          for (int64_t w = 0; w < d.w; ++w)
            corr += dout(b, co, h, w) * state.concat(b, ci, h, w);
      CHECK(g.dparams.merge.weight(co, ci) == doctest::Approx(corr).epsilon(1e-12));
    }
}

TEST_CASE("constant input with direction-symmetric merge gives constant output") {
  // No per-position term exists anywhere in the block, so once the opposing
  // scan directions are merged with equal weight the line-index ramps cancel
  // and every pixel of a channel agrees.
  Rng rng(66);
  const int64_t c = 3;
  GspnBlockParams p = init_block_params(c, 13);
  for (int64_t co = 0; co < c; ++co)
    for (int64_t ci = 0; ci < c; ++ci) {
      p.merge.weight(co, 1 * c + ci) = p.merge.weight(co, 0 * c + ci);  // rtl = ltr
      p.merge.weight(co, 3 * c + ci) = p.merge.weight(co, 2 * c + ci);  // btt = ttb
    }
  Tensor4<double> x(Dims4{1, c, 7, 9});
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t h = 0; h < 7; ++h)
      for (int64_t w = 0; w < 9; ++w) x(0, ch, h, w) = 0.25 * double(ch) - 0.4;

  Tensor4<double> out = block_forward(x, p, 1);
  for (int64_t ch = 0; ch < c; ++ch) {
    const double v0 = out(0, ch, 0, 0);
    for (int64_t h = 0; h < 7; ++h)
      for (int64_t w = 0; w < 9; ++w) {
        CHECK(out(0, ch, h, w) == doctest::Approx(v0).epsilon(1e-12));
      }
  }
}

TEST_CASE("checkpoints round trip through manifest plus tensors") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "gspn_ckpt_test").string();
  fs::remove_all(dir);
  GspnBlockParams p = init_block_params(4, 21);
  save_checkpoint(p, dir);
  CHECK(fs::exists(fs::path(dir) / "manifest.txt"));
  CHECK(fs::exists(fs::path(dir) / "proj_w.gspnt"));

  GspnBlockParams q = load_checkpoint(dir);
  for (auto [a, b] : {std::pair{&p.reduce, &q.reduce}, std::pair{&p.proj_u, &q.proj_u},
                      std::pair{&p.proj_lam, &q.proj_lam}, std::pair{&p.proj_w, &q.proj_w},
                      std::pair{&p.merge, &q.merge}}) {
    CHECK(a->weight == b->weight);
    CHECK(a->bias == b->bias);
  }

  fs::remove(fs::path(dir) / "proj_u.gspnt");
  CHECK_THROWS(load_checkpoint(dir));
  fs::remove_all(dir);
}

TEST_CASE("toy trainer: zero steps yields just the initial loss") {
  TrainResult r = train_toy(ToyTask::kIdentity, 0, default_toy_lr(ToyTask::kIdentity), 1);
  CHECK(r.losses.size() == 1);
  CHECK_FALSE(r.diverged);
}

TEST_CASE("toy trainer: identical seeds give bit-identical traces") {
  TrainResult a = train_toy(ToyTask::kIdentity, 40, 2.0, 9);
  TrainResult b = train_toy(ToyTask::kIdentity, 40, 2.0, 9);
  REQUIRE(a.losses.size() == b.losses.size());
  for (size_t i = 0; i < a.losses.size(); ++i) CHECK(a.losses[i] == b.losses[i]);
}

TEST_CASE("toy trainer: trace does not depend on the worker count") {
  const int saved = worker_count();
  set_worker_count(1);
  TrainResult base = train_toy(ToyTask::kFixedBlur, 25, 2.5, 5);
  for (int workers : {2, 4}) {
    set_worker_count(workers);
    TrainResult r = train_toy(ToyTask::kFixedBlur, 25, 2.5, 5);
    REQUIRE(r.losses.size() == base.losses.size());
    for (size_t i = 0; i < r.losses.size(); ++i) CHECK(r.losses[i] == base.losses[i]);
  }
  set_worker_count(saved);
}

TEST_CASE("toy trainer: identity converges within 500 steps") {
  TrainResult r = train_toy(ToyTask::kIdentity, 500, default_toy_lr(ToyTask::kIdentity), 1);
  CHECK_FALSE(r.diverged);
  CHECK(r.converged());
  CHECK(r.losses.back() <= 0.1 * r.losses.front());
}

TEST_CASE("parameter-generation heads are translation equivariant") {
  // Every projection is 1x1, so shifting the input shifts z, u, lam and the
  // gate maps exactly; position enters through the scan only.
  Rng rng(67);
  const Dims4 dims{1, 4, 6, 8};
  Tensor4<double> x = random_tensor<double>(dims, rng);
  GspnBlockParams p = init_block_params(4, 31);

  auto shift_w = [](const Tensor4<double>& t) {
    Tensor4<double> out(t.dims());
    const Dims4 d = t.dims();
    for (int64_t b = 0; b < d.b; ++b)
      for (int64_t c = 0; c < d.c; ++c)
        for (int64_t h = 0; h < d.h; ++h)
          for (int64_t w = 0; w + 1 < d.w; ++w) out(b, c, h, w + 1) = t(b, c, h, w);
    return out;
  };

  BlockState orig, shifted;
  block_forward(x, p, 1, &orig);
  block_forward(shift_w(x), p, 1, &shifted);
  for (int64_t b = 0; b < dims.b; ++b)
    for (int64_t c = 0; c < orig.gate_maps.dims().c; ++c)
      for (int64_t h = 0; h < dims.h; ++h)
        for (int64_t w = 0; w + 1 < dims.w; ++w) {
          CHECK(shifted.gate_maps(b, c, h, w + 1) == orig.gate_maps(b, c, h, w));
        }
  for (int64_t b = 0; b < dims.b; ++b)
    for (int64_t c = 0; c < dims.c; ++c)
      for (int64_t h = 0; h < dims.h; ++h)
        for (int64_t w = 0; w + 1 < dims.w; ++w) {
          CHECK(shifted.u(b, c, h, w + 1) == orig.u(b, c, h, w));
          CHECK(shifted.lam(b, c, h, w + 1) == orig.lam(b, c, h, w));
        }
}
