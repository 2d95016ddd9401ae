// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.
//
// Runtime-scaling harness. Inputs are prepared outside the timed region;
// each (mechanism, side) cell reports the median of `repeats` runs after
// `warmups` discarded runs. Softmax materializes its N x N score matrix, so
// it carries a memory guard: oversized cells are emitted as skipped records
// instead of running.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gspn {

inline const std::vector<std::string> kBenchMechanisms = {"gspn-global", "gspn-local", "softmax",
                                                          "linear"};

struct BenchRecord {
  std::string mechanism;
  int64_t side = 0;      // image side n
  int64_t tokens = 0;    // N = side * side
  int64_t channels = 0;  // channels / feature dim d
  int64_t groups = 0;    // 1 unless gspn-local
  int64_t repeats = 0;
  double median_seconds = 0.0;
  bool skipped = false;
};

struct BenchOptions {
  std::vector<std::string> mechanisms = kBenchMechanisms;
  std::vector<int64_t> sides = {64, 128, 256, 512};
  int64_t channels = 1;
  int64_t repeats = 5;
  int64_t warmups = 2;
  int64_t local_groups = 2;
  int64_t softmax_memory_budget = int64_t(3) << 30;  // bytes for the score matrix
  uint64_t seed = 42;
};

std::vector<BenchRecord> run_bench(const BenchOptions& options);

// Schema: mechanism,side,N,channels,g,repeats,median_seconds. LF endings,
// '.' decimal separator; skipped records carry "skipped" in the last field.
void write_bench_csv(const std::vector<BenchRecord>& records, const std::string& path);

struct SlopeFit {
  double slope = 0.0;
  int64_t points = 0;
  bool valid = false;
};

// Least-squares slope of log(median_seconds) vs log(N) over the non-skipped
// records of one mechanism.
SlopeFit fit_loglog_slope(const std::vector<BenchRecord>& records, const std::string& mechanism);

}  // namespace gspn
