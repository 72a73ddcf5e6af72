#pragma once

#include "tokenmodel.hpp"

namespace tokmerge {

struct SimilarityStats {
  double mean = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double min = 0.0;
  double max = 0.0;
  int pairs = 0;
};

// Cosine similarity over attention-row pairs: exhaustive when rows <= 512,
// otherwise `sample_pairs` seeded-random distinct pairs.
SimilarityStats attention_row_similarity(const Matrix& attn, int sample_pairs,
                                         uint64_t seed);

// Per query token, the total attention weight landing on frame-0 key columns.
std::vector<double> frame0_attention_mass(const Matrix& attn, const FrameLayout& layout,
                                          int n_frames);

struct BlockRedundancy {
  int block = 0;
  SimilarityStats row_similarity;  // averaged over heads
  double frame0_mass_mean = 0.0;
  double frame0_mass_min = 0.0;
  double frame0_mass_max = 0.0;
};

struct RedundancyReport {
  std::vector<BlockRedundancy> blocks;
};

// Per-head stats averaged into one entry per block.
BlockRedundancy analyze_block(int block, const std::vector<Matrix>& head_attn,
                              const FrameLayout& layout, int n_frames, int sample_pairs,
                              uint64_t seed);

std::string redundancy_to_json(const RedundancyReport& r);

}  // namespace tokmerge
