// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.
//
// gspn <verify|bench|heatmap|train-toy>
// Exit codes: 0 success, 1 verification failure, 2 training failure,
// 64 usage error.

#include <malloc.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gspn/bench.hpp"
#include "gspn/gspn_block.hpp"
#include "gspn/oracle.hpp"
#include "gspn/pgm.hpp"
#include "gspn/tensor_io.hpp"
#include "gspn/threading.hpp"
#include "gspn/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitTrainFailure = 2;
constexpr int kExitUsage = 64;

int cmd_verify(const gspn::VerifyOptions& options) {
  const std::vector<gspn::FamilyResult> results = gspn::run_verify(options);
  bool all_passed = true;
  std::printf("%-28s %-6s %7s %12s  %s\n", "family", "status", "cases", "max-err", "detail");
  for (const auto& r : results) {
    all_passed = all_passed && r.stats.passed;
    std::printf("%-28s %-6s %7lld %12.3e  %s\n", r.family.c_str(),
                r.stats.passed ? "pass" : "FAIL", static_cast<long long>(r.stats.cases),
                r.stats.max_error, r.stats.detail.c_str());
  }
  if (!all_passed) {
    std::printf("verification FAILED; reproducer written under %s-<family>/\n",
                options.reproducer_dir.c_str());
    return kExitVerifyFailure;
  }
  std::printf("all %zu invariant families passed\n", results.size());
  return kExitOk;
}

int cmd_bench(gspn::BenchOptions options, const std::string& out_path) {
  const std::vector<gspn::BenchRecord> records = gspn::run_bench(options);
  gspn::write_bench_csv(records, out_path);
  for (const std::string& mechanism : options.mechanisms) {
    const gspn::SlopeFit fit = gspn::fit_loglog_slope(records, mechanism);
    if (fit.valid) {
      std::printf("%-12s log-log slope vs N: %.3f (%lld points)\n", mechanism.c_str(), fit.slope,
                  static_cast<long long>(fit.points));
    } else {
      std::printf("%-12s log-log slope vs N: n/a (%lld points)\n", mechanism.c_str(),
                  static_cast<long long>(fit.points));
    }
  }
  for (int64_t side : options.sides) {
    double global_t = -1.0, local_t = -1.0;
    for (const auto& r : records) {
      if (r.side != side || r.skipped) continue;
      if (r.mechanism == "gspn-global") global_t = r.median_seconds;
      if (r.mechanism == "gspn-local") local_t = r.median_seconds;
    }
    if (global_t > 0.0 && local_t > 0.0) {
      std::printf("side %lld: gspn-local/gspn-global time ratio %.3f\n",
                  static_cast<long long>(side), local_t / global_t);
    }
  }
  std::printf("wrote %zu records to %s\n", records.size(), out_path.c_str());
  return kExitOk;
}

int cmd_heatmap(const std::string& input_path, const std::vector<int64_t>& query,
                const std::string& params_dir, uint64_t random_seed, bool have_seed,
                const std::string& out_prefix) {
  const gspn::Tensor4<double> x = gspn::load_file_f64(input_path);
  const gspn::Dims4 dims = x.dims();
  if (dims.b < 1 || dims.c < 1 || dims.h < 1 || dims.w < 1) {
    std::fprintf(stderr, "input tensor is empty\n");
    return kExitUsage;
  }
  const int64_t qh = query[0], qw = query[1];
  if (qh < 0 || qh >= dims.h || qw < 0 || qw >= dims.w) {
    std::fprintf(stderr, "query (%lld,%lld) out of bounds for %lldx%lld grid\n",
                 static_cast<long long>(qh), static_cast<long long>(qw),
                 static_cast<long long>(dims.h), static_cast<long long>(dims.w));
    return kExitUsage;
  }

  gspn::GspnBlockParams params = params_dir.empty()
                                     ? gspn::init_block_params(dims.c, random_seed)
                                     : gspn::load_checkpoint(params_dir);
  (void)have_seed;
  gspn::BlockState state;
  gspn::block_forward(x, params, 1, &state);

  // Channel 0 of batch 0; the merged map uses equal positive weights so the
  // four direction cones cover every pixel.
  std::array<Eigen::MatrixXd, 4> per_direction;
  for (size_t d = 0; d < 4; ++d) {
    const gspn::ScanConfig cfg{gspn::kAllDirections[d], 1, gspn::FirstLineMode::kLearnedLambda};
    per_direction[d] = gspn::expand_dense_G(state.gates[d], cfg, 0, 0);
  }
  Eigen::MatrixXd merged = 0.25 * (per_direction[0] + per_direction[1] + per_direction[2] +
                                   per_direction[3]);

  const auto write_one = [&](const Eigen::MatrixXd& g, const std::string& name) {
    const std::vector<double> img = gspn::affinity_row_image(g, qh, qw, dims.h, dims.w);
    gspn::write_pgm(out_prefix + "-" + name + ".pgm", dims.w, dims.h,
                    gspn::quantize_min_max(img));
  };
  for (size_t d = 0; d < 4; ++d) {
    write_one(per_direction[d], gspn::direction_name(gspn::kAllDirections[d]));
  }
  write_one(merged, "merged");
  std::printf("wrote 5 heatmaps with prefix %s- for query (%lld,%lld)\n", out_prefix.c_str(),
              static_cast<long long>(qh), static_cast<long long>(qw));
  return kExitOk;
}

int cmd_train_toy(const std::string& task_name, int64_t steps, double lr, uint64_t seed,
                  const std::string& out_path) {
  gspn::ToyTask task;
  if (task_name == "identity") {
    task = gspn::ToyTask::kIdentity;
  } else if (task_name == "fixed-blur") {
    task = gspn::ToyTask::kFixedBlur;
  } else {
    std::fprintf(stderr, "unknown task '%s' (identity | fixed-blur)\n", task_name.c_str());
    return kExitUsage;
  }
  const gspn::TrainResult result = gspn::train_toy(task, steps, lr, seed);

  std::ofstream os(out_path, std::ios::binary);
  if (!os) {
    std::fprintf(stderr, "cannot open %s for writing\n", out_path.c_str());
    return kExitUsage;
  }
  os << "step,loss\n";
  char buf[64];
  for (size_t i = 0; i < result.losses.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", result.losses[i]);
    os << i << "," << buf << "\n";
  }

  if (result.diverged) {
    std::printf("training diverged at step %lld\n", static_cast<long long>(result.diverged_step));
    return kExitTrainFailure;
  }
  std::printf("loss %.6g -> %.6g over %zu steps (ratio %.4f)\n", result.losses.front(),
              result.losses.back(), result.losses.size() - 1,
              result.losses.back() / result.losses.front());
  if (!result.converged()) {
    std::printf("convergence criterion (final <= 0.1 * initial) not met\n");
    return kExitTrainFailure;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  // Keep large tensor blocks on the heap instead of per-allocation mmap;
  // page-fault churn otherwise dominates the timed scans.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"line-scan propagation library driver"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker count (overrides GSPN_THREADS)");

  // verify
  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  gspn::VerifyOptions verify_options;
  verify->add_option("--seed", verify_options.seed, "rng seed");
  verify->add_option("--sizes", verify_options.sizes, "grid sides for oracle checks")
      ->delimiter(',');
  verify
      ->add_flag("--inject-bad-normalization", verify_options.inject_bad_normalization,
                 "negative control: corrupt one normalized weight")
      ->group("");  // hidden

  // bench
  auto* bench = app.add_subcommand("bench", "runtime scaling benchmark");
  gspn::BenchOptions bench_options;
  std::string bench_out;
  bench->add_option("--mechanisms", bench_options.mechanisms, "gspn-global,gspn-local,softmax,linear")
      ->delimiter(',')
      ->required();
  bench->add_option("--sides", bench_options.sides, "image sides (>= 8)")
      ->delimiter(',')
      ->required();
  bench->add_option("--channels", bench_options.channels, "channels / feature dim");
  bench->add_option("--repeats", bench_options.repeats, "timed repeats per cell")
      ->check(CLI::Range(int64_t(1), int64_t(1000)));
  bench->add_option("--g", bench_options.local_groups, "group count for gspn-local");
  bench->add_option("--seed", bench_options.seed, "rng seed");
  bench->add_option("--out", bench_out, "output CSV path")->required();

  // heatmap
  auto* heatmap = app.add_subcommand("heatmap", "affinity heatmaps for one query pixel");
  std::string hm_input, hm_params, hm_out;
  std::vector<int64_t> hm_query;
  uint64_t hm_seed = 0;
  heatmap->add_option("--input", hm_input, "input tensor (GSPN-T)")->required();
  auto* q_opt = heatmap->add_option("--query", hm_query, "query pixel H,W")
                    ->delimiter(',')
                    ->expected(2)  // exactly two coordinates
                    ->required();
  auto* params_opt = heatmap->add_option("--params", hm_params, "block checkpoint directory");
  auto* seed_opt = heatmap->add_option("--random-seed", hm_seed, "random block parameters");
  params_opt->excludes(seed_opt);
  heatmap->add_option("--out", hm_out, "output file prefix")->required();

  // train-toy
  auto* train = app.add_subcommand("train-toy", "gradient-descent trainability probe");
  std::string tt_task, tt_out;
  int64_t tt_steps = -1;
  double tt_lr = -1.0;
  uint64_t tt_seed = 1;
  train->add_option("--task", tt_task, "identity | fixed-blur")->required();
  train->add_option("--steps", tt_steps, "descent steps (default 500 / 2000 for fixed-blur)");
  train->add_option("--lr", tt_lr, "learning rate (default 2.0 / 2.5 for fixed-blur)");
  train->add_option("--seed", tt_seed, "rng seed");
  train->add_option("--out", tt_out, "loss trace CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (threads > 0) gspn::set_worker_count(threads);

  try {
    if (*verify) return cmd_verify(verify_options);
    if (*bench) return cmd_bench(bench_options, bench_out);
    if (*heatmap) {
      if (hm_params.empty() && seed_opt->count() == 0) {
        std::fprintf(stderr, "heatmap needs --params or --random-seed\n");
        return kExitUsage;
      }
      return cmd_heatmap(hm_input, hm_query, hm_params, hm_seed, seed_opt->count() > 0, hm_out);
    }
    if (*train) {
      if (tt_steps < 0) tt_steps = (tt_task == "fixed-blur") ? 2000 : 500;
      if (tt_lr <= 0.0) tt_lr = (tt_task == "fixed-blur") ? 2.5 : 2.0;
      return cmd_train_toy(tt_task, tt_steps, tt_lr, tt_seed, tt_out);
    }
  } catch (const gspn::ScaleGuardError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const gspn::ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
