// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.
//
// Invariant suite: every family re-derives its expectation through an
// independent route (dense oracle, explicit matrix products, central finite
// differences, metamorphic identities) and checks the engine against it.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gspn/gspn_block.hpp"
#include "gspn/propagation.hpp"
#include "gspn/rng.hpp"
#include "gspn/tensor.hpp"

namespace gspn {

// First failing case, for the reproducer file.
struct FailureCapture {
  std::string note;
  std::vector<std::pair<std::string, Tensor4<double>>> tensors;
};

struct CheckStats {
  bool passed = true;
  int64_t cases = 0;
  double max_error = 0.0;
  std::string detail;
};

// Central finite differences (eps) against the analytic backward pass.
// A component passes when |analytic - fd| <= atol + rtol * max(|analytic|, |fd|)
// (the atol floor absorbs fd round-off on near-zero gradients); max_error
// reports the worst relative error over components of magnitude at least
// solid_scale, where the fd reference is accurate enough for the relative
// reading to mean something.
struct FdTolerance {
  double eps = 1e-6;
  double rtol = 1e-5;
  double atol = 1e-7;
  double solid_scale = 1e-2;
};

CheckStats fd_check_scan(const Tensor4<double>& x, const GateField<double>& gates,
                         const ScanConfig& cfg, const Tensor4<double>& dy,
                         const FdTolerance& tol = {});

CheckStats fd_check_block(const Tensor4<double>& x, const GspnBlockParams& params,
                          int64_t groups, const Tensor4<double>& dout,
                          const FdTolerance& tol = {});

// Random-instance runners. Each returns aggregate stats over `instances`
// cases drawn from `rng`; `cap` (optional) records the first failure.
CheckStats check_tensor_ops(Rng& rng, int64_t instances, FailureCapture* cap = nullptr);
CheckStats check_serialization(Rng& rng, int64_t instances, FailureCapture* cap = nullptr);
CheckStats check_row_stochasticity(Rng& rng, int64_t instances, bool inject_corruption,
                                   FailureCapture* cap = nullptr);
CheckStats check_oracle_equivalence(Rng& rng, const std::vector<int64_t>& sides,
                                    int64_t instances, double tol,
                                    FailureCapture* cap = nullptr);
CheckStats check_stochastic_products(Rng& rng, int64_t chains, int64_t max_len,
                                     int64_t max_width, FailureCapture* cap = nullptr);
CheckStats check_spectral_stability_random(Rng& rng, int64_t instances, int64_t max_width,
                                           FailureCapture* cap = nullptr);
CheckStats check_scan_gradients(Rng& rng, int64_t instances, FailureCapture* cap = nullptr);
CheckStats check_block_gradients(Rng& rng, int64_t instances, FailureCapture* cap = nullptr);
CheckStats check_group_isolation(Rng& rng, int64_t instances, FailureCapture* cap = nullptr);
CheckStats check_direction_metamorphism(Rng& rng, int64_t instances,
                                        FailureCapture* cap = nullptr);
CheckStats check_linear_attention_reduction(Rng& rng, int64_t instances, int64_t max_tokens,
                                            double tol, FailureCapture* cap = nullptr);
CheckStats check_boundedness(Rng& rng, int64_t instances, FailureCapture* cap = nullptr);
CheckStats check_merged_density(Rng& rng, const std::vector<int64_t>& sides,
                                FailureCapture* cap = nullptr);

struct FamilyResult {
  std::string family;
  CheckStats stats;
};

struct VerifyOptions {
  uint64_t seed = 42;
  std::vector<int64_t> sizes = {4, 6, 8};  // grid sides for the oracle checks
  bool inject_bad_normalization = false;   // negative-control hook
  std::string reproducer_dir = "gspn-reproducer";
};

// Runs every family; on failure writes the captured case to
// <reproducer_dir>-<family>/ as GSPN-T files plus a note.
std::vector<FamilyResult> run_verify(const VerifyOptions& options);

// Random helpers shared with tests and the acceptance suite.
GateField<double> random_gate_field(Dims4 dims, Rng& rng, double gate_range = 2.0);

}  // namespace gspn
