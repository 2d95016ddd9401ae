// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.

#include "gspn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "gspn/propagation.hpp"
#include "gspn/reference_attention.hpp"
#include "gspn/rng.hpp"
#include "gspn/verify.hpp"

namespace gspn {
namespace {

// Results are folded into a volatile sink so the timed calls cannot be
// optimized away.
volatile double g_bench_sink = 0.0;

double median(std::vector<double> samples) {
  const size_t mid = samples.size() / 2;
  std::nth_element(samples.begin(), samples.begin() + static_cast<long>(mid), samples.end());
  double m = samples[mid];
  if (samples.size() % 2 == 0) {
    const double lower = *std::max_element(samples.begin(), samples.begin() + static_cast<long>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

template <typename Fn>
double time_median(Fn&& fn, int64_t warmups, int64_t repeats) {
  using Clock = std::chrono::steady_clock;
  for (int64_t i = 0; i < warmups; ++i) fn();
  std::vector<double> samples;
  samples.reserve(static_cast<size_t>(repeats));
  for (int64_t i = 0; i < repeats; ++i) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    samples.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  return median(std::move(samples));
}

BenchRecord bench_gspn(const std::string& mechanism, int64_t side, int64_t channels,
                       int64_t groups, int64_t warmups, int64_t repeats, uint64_t seed) {
  Rng rng(seed);
  const Dims4 dims{1, channels, side, side};
  const Tensor4<double> x = random_tensor<double>(dims, rng);
  std::array<GateField<double>, 4> gates;
  for (auto& g : gates) g = random_gate_field(dims, rng);

  BenchRecord rec{mechanism, side, side * side, channels, groups, repeats, 0.0, false};
  rec.median_seconds = time_median(
      [&] {
        const auto outs = scan_all_directions(x, gates, groups);
        g_bench_sink = g_bench_sink + outs[0].y[0] + outs[3].y[outs[3].y.size() - 1];
      },
      warmups, repeats);
  return rec;
}

BenchRecord bench_attention(const std::string& mechanism, int64_t side, int64_t channels,
                            int64_t warmups, int64_t repeats, int64_t memory_budget,
                            uint64_t seed) {
  const int64_t n_tokens = side * side;
  BenchRecord rec{mechanism, side, n_tokens, channels, 1, repeats, 0.0, false};
  if (mechanism == "softmax") {
    // Score matrix memory, the term that explodes quadratically.
    const int64_t score_bytes = n_tokens * n_tokens * static_cast<int64_t>(sizeof(double));
    if (score_bytes > memory_budget) {
      rec.skipped = true;
      return rec;
    }
  }
  Rng rng(seed);
  SeqBatch q(n_tokens, channels), k(n_tokens, channels), v(n_tokens, channels);
  for (int64_t i = 0; i < n_tokens; ++i)
    for (int64_t c = 0; c < channels; ++c) {
      q(i, c) = rng.uniform(-1.0, 1.0);
      k(i, c) = rng.uniform(-1.0, 1.0);
      v(i, c) = rng.uniform(-1.0, 1.0);
    }
  rec.median_seconds = time_median(
      [&] {
        const SeqBatch out =
            mechanism == "softmax" ? softmax_attention(q, k, v) : linear_attention_causal(q, k, v);
        g_bench_sink = g_bench_sink + out(0, 0) + out(n_tokens - 1, channels - 1);
      },
      warmups, repeats);
  return rec;
}

}  // namespace

std::vector<BenchRecord> run_bench(const BenchOptions& options) {
  std::vector<BenchRecord> records;
  for (const std::string& mechanism : options.mechanisms) {
    if (std::find(kBenchMechanisms.begin(), kBenchMechanisms.end(), mechanism) ==
        kBenchMechanisms.end()) {
      throw std::invalid_argument("unknown mechanism '" + mechanism + "'");
    }
    for (int64_t side : options.sides) {
      if (side < 8) throw std::invalid_argument("bench sides must be >= 8");
      if (mechanism == "gspn-global") {
        records.push_back(bench_gspn(mechanism, side, options.channels, 1, options.warmups,
                                     options.repeats, options.seed));
      } else if (mechanism == "gspn-local") {
        records.push_back(bench_gspn(mechanism, side, options.channels, options.local_groups,
                                     options.warmups, options.repeats, options.seed));
      } else {
        records.push_back(bench_attention(mechanism, side, options.channels, options.warmups,
                                          options.repeats, options.softmax_memory_budget,
                                          options.seed));
      }
    }
  }
  return records;
}

void write_bench_csv(const std::vector<BenchRecord>& records, const std::string& path) {
  std::ofstream os(path, std::ios::binary);  // binary: keep LF endings everywhere
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "mechanism,side,N,channels,g,repeats,median_seconds\n";
  char buf[64];
  for (const BenchRecord& r : records) {
    os << r.mechanism << "," << r.side << "," << r.tokens << "," << r.channels << "," << r.groups
       << "," << r.repeats << ",";
    if (r.skipped) {
      os << "skipped\n";
    } else {
      std::snprintf(buf, sizeof(buf), "%.9f", r.median_seconds);
      os << buf << "\n";
    }
  }
}

SlopeFit fit_loglog_slope(const std::vector<BenchRecord>& records, const std::string& mechanism) {
  std::vector<std::pair<double, double>> pts;
  for (const BenchRecord& r : records) {
    if (r.mechanism == mechanism && !r.skipped && r.median_seconds > 0.0) {
      pts.emplace_back(std::log(static_cast<double>(r.tokens)), std::log(r.median_seconds));
    }
  }
  SlopeFit fit;
  fit.points = static_cast<int64_t>(pts.size());
  if (pts.size() < 2) return fit;
  double mx = 0, my = 0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double num = 0, den = 0;
  for (const auto& [x, y] : pts) {
    num += (x - mx) * (y - my);
    den += (x - mx) * (x - mx);
  }
  fit.slope = num / den;
  fit.valid = true;
  return fit;
}

}  // namespace gspn
