#pragma once

#include <string>

#include "tokenmodel.hpp"

namespace tokmerge {

enum class Strategy { random_baseline, fixed_stride_baseline, fastvggt };
enum class SalientMode { fixed_stride, topk_norm };

struct MergeConfig {
  Strategy strategy = Strategy::fastvggt;
  double merge_ratio = 0.9;  // r, random baseline
  int stride = 5;            // s, fixed-stride baseline
  int region_stride = 3;     // K, region cell side; merge fraction ~ 1 - 1/K^2
  double salient_fraction = 0.10;
  SalientMode salient_mode = SalientMode::fixed_stride;
  bool use_reference = true;
  bool use_salient = true;
  int start_block = 0;
  uint64_t seed = 0;
  bool reuse_partition = false;  // reuse block-0 partition/map in later blocks
  bool pairwise_merge = false;   // sequential pairwise averaging instead of group mean
};

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

void validate(const MergeConfig& cfg);

// Baselines: no salient set, no reference protection.
Partition partition_random(const TokenSequence& seq, double r, uint64_t seed);
Partition partition_fixed_stride(const TokenSequence& seq, int s);

// Global indices of every frame-0 token.
std::vector<int> select_reference(const TokenSequence& seq);

// Per non-first frame, floor(fraction * tokens_per_frame) patch-token indices,
// picked by stride or by largest Euclidean norm (ties to the lower index).
std::vector<int> select_salient(const TokenSequence& seq, SalientMode mode,
                                double fraction, uint64_t seed);

// Region-based sampling over non-first frames: patch tokens are tiled into
// KxK cells (edge cells may be smaller), each cell contributes exactly one
// seeded-random dst among its non-salient tokens, the rest become src.
// Reference indices are forced into dst; remaining uncovered tokens (frame-0
// tokens without reference, special tokens) default to dst for frame 0 and
// salient for later frames.
Partition partition_uniform_region(const TokenSequence& seq, int k,
                                   const std::vector<int>& reference,
                                   const std::vector<int>& salient, uint64_t seed);

Partition build_partition(const TokenSequence& seq, const MergeConfig& cfg);

std::string partition_to_json(const Partition& p);

}  // namespace tokmerge
