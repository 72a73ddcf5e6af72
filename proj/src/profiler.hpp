#pragma once

#include "attnstack.hpp"

namespace tokmerge {

struct BenchSize {
  int n_frames = 0;
  int tokens_per_frame = 0;
  int dim = 0;
};

struct BenchResult {
  BenchSize size;
  bool skipped = false;      // infeasible size, reported instead of crashing
  std::string skip_reason;
  ProfileReport dense;
  ProfileReport merged;
};

// Runs dense and merged forwards on identical inputs for every size: one
// warmup, then `repeats` timed passes; per-block component times are
// element-wise medians, FLOP counts are taken from a single pass.
std::vector<BenchResult> run_benchmark(const ModelConfig& model, const MergeConfig& cfg,
                                       const std::vector<BenchSize>& sizes, int repeats,
                                       uint64_t seed);

// Total dense time / total merged time. Reports must describe the same run
// shape (block count and token counts).
double speedup(const ProfileReport& dense, const ProfileReport& merged);

double global_attn_speedup(const ProfileReport& dense, const ProfileReport& merged);

// One CSV row per block x component x size; stable column order.
std::string bench_csv(const std::vector<BenchResult>& results);
std::string bench_json(const std::vector<BenchResult>& results);

std::string report_summary(const BenchResult& r);

}  // namespace tokmerge
