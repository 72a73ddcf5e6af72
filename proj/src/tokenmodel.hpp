#pragma once

#include <optional>
#include <string>
#include <vector>

#include "numkernel.hpp"

namespace tokmerge {

// Per-frame token layout. Token order within a frame is fixed: camera tokens,
// register tokens, then patch tokens in row-major grid order.
struct FrameLayout {
  int n_camera = 1;
  int n_register = 4;
  int grid_h = 28;
  int grid_w = 37;

  int n_special() const { return n_camera + n_register; }
  int n_patches() const { return grid_h * grid_w; }
  int tokens_per_frame() const { return n_special() + n_patches(); }
};

struct TokenSequence {
  FrameLayout layout;
  int n_frames = 0;
  Matrix features;  // (n_frames * tokens_per_frame) x c

  int total_tokens() const { return n_frames * layout.tokens_per_frame(); }
  int dim() const { return features.cols; }
};

// Disjoint, exhaustive split of global token indices into the three merge
// roles. Salient tokens bypass merging; src tokens merge into dst tokens.
struct Partition {
  std::vector<int> salient;
  std::vector<int> dst;
  std::vector<int> src;
};

int global_index(int frame, int pos_in_frame, const FrameLayout& layout, int n_frames);
std::pair<int, int> frame_pos(int global, const FrameLayout& layout, int n_frames);

struct GridCoord {
  int row = 0;
  int col = 0;
};

// Camera/register positions return nullopt (they have no grid cell).
std::optional<GridCoord> patch_grid_coords(int pos_in_frame, const FrameLayout& layout);

// O(N) check: roles pairwise disjoint and together cover 0..n_tokens-1.
bool partition_is_valid(const Partition& p, int n_tokens);

// Flat binary fixture format: seven little-endian u32 fields
// (n_frames, n_camera, n_register, grid_h, grid_w, c, float_width_bytes)
// followed by row-major features.
void save_sequence(const TokenSequence& seq, const std::string& path);
TokenSequence load_sequence(const std::string& path);

// Synthetic sequences. "correlated" makes every frame a noisy copy of frame 0,
// mimicking overlapping views; noise 0 makes all frames identical.
TokenSequence make_random_sequence(const FrameLayout& layout, int n_frames, int dim,
                                   uint64_t seed);
TokenSequence make_correlated_sequence(const FrameLayout& layout, int n_frames, int dim,
                                       uint64_t seed, double noise);
// "detail" layers view-specific high-magnitude patch tokens on top of a
// correlated sequence: a detail_fraction share of each frame's patches is
// replaced by independent features scaled by detail_scale.
TokenSequence make_detail_sequence(const FrameLayout& layout, int n_frames, int dim,
                                   uint64_t seed, double noise,
                                   double detail_fraction = 0.08,
                                   double detail_scale = 4.0);
TokenSequence make_constant_sequence(const FrameLayout& layout, int n_frames, int dim,
                                     uint64_t seed);

// Near-square grid for a requested token count (no special tokens).
FrameLayout layout_for_tokens(int tokens_per_frame);

}  // namespace tokmerge
