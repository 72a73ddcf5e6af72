#include "tokenmodel.hpp"

#include <cstdio>
#include <cstring>

namespace tokmerge {

int global_index(int frame, int pos_in_frame, const FrameLayout& layout, int n_frames) {
  const int tpf = layout.tokens_per_frame();
  if (frame < 0 || frame >= n_frames) throw IndexError("global_index: frame out of range");
  if (pos_in_frame < 0 || pos_in_frame >= tpf)
    throw IndexError("global_index: position out of range");
  return frame * tpf + pos_in_frame;
}

std::pair<int, int> frame_pos(int global, const FrameLayout& layout, int n_frames) {
  const int tpf = layout.tokens_per_frame();
  if (global < 0 || global >= n_frames * tpf)
    throw IndexError("frame_pos: index out of range");
  return {global / tpf, global % tpf};
}

std::optional<GridCoord> patch_grid_coords(int pos_in_frame, const FrameLayout& layout) {
  if (pos_in_frame < 0 || pos_in_frame >= layout.tokens_per_frame())
    throw IndexError("patch_grid_coords: position out of range");
  const int p = pos_in_frame - layout.n_special();
  if (p < 0) return std::nullopt;
  return GridCoord{p / layout.grid_w, p % layout.grid_w};
}

bool partition_is_valid(const Partition& p, int n_tokens) {
  std::vector<uint8_t> seen(n_tokens, 0);
  auto mark = [&](const std::vector<int>& v) {
    for (int i : v) {
      if (i < 0 || i >= n_tokens || seen[i]) return false;
      seen[i] = 1;
    }
    return true;
  };
  if (!mark(p.salient) || !mark(p.dst) || !mark(p.src)) return false;
  for (uint8_t s : seen)
    if (!s) return false;
  return true;
}

namespace {

void write_u32(FILE* f, uint32_t v) {
  uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
  fwrite(b, 1, 4, f);
}

uint32_t read_u32(FILE* f) {
  uint8_t b[4];
  if (fread(b, 1, 4, f) != 4) throw ResourceError("fixture: truncated header");
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

}  // namespace

void save_sequence(const TokenSequence& seq, const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ResourceError("cannot open for writing: " + path);
  write_u32(f, uint32_t(seq.n_frames));
  write_u32(f, uint32_t(seq.layout.n_camera));
  write_u32(f, uint32_t(seq.layout.n_register));
  write_u32(f, uint32_t(seq.layout.grid_h));
  write_u32(f, uint32_t(seq.layout.grid_w));
  write_u32(f, uint32_t(seq.dim()));
  write_u32(f, uint32_t(sizeof(Real)));
  fwrite(seq.features.data.data(), sizeof(Real), seq.features.size(), f);
  std::fclose(f);
}

TokenSequence load_sequence(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw ResourceError("cannot open fixture: " + path);
  TokenSequence seq;
  seq.n_frames = int(read_u32(f));
  seq.layout.n_camera = int(read_u32(f));
  seq.layout.n_register = int(read_u32(f));
  seq.layout.grid_h = int(read_u32(f));
  seq.layout.grid_w = int(read_u32(f));
  const int c = int(read_u32(f));
  const uint32_t width = read_u32(f);
  if (width != sizeof(Real)) {
    std::fclose(f);
    throw ConfigError("fixture float width does not match build");
  }
  const int n = seq.n_frames * seq.layout.tokens_per_frame();
  seq.features = Matrix(n, c);
  const size_t got = fread(seq.features.data.data(), sizeof(Real), seq.features.size(), f);
  std::fclose(f);
  if (got != seq.features.size()) throw ResourceError("fixture: truncated data");
  return seq;
}

TokenSequence make_random_sequence(const FrameLayout& layout, int n_frames, int dim,
                                   uint64_t seed) {
  TokenSequence seq;
  seq.layout = layout;
  seq.n_frames = n_frames;
  seq.features = prng_matrix(n_frames * layout.tokens_per_frame(), dim, seed);
  return seq;
}

TokenSequence make_correlated_sequence(const FrameLayout& layout, int n_frames, int dim,
                                       uint64_t seed, double noise) {
  TokenSequence seq;
  seq.layout = layout;
  seq.n_frames = n_frames;
  const int tpf = layout.tokens_per_frame();
  seq.features = Matrix(n_frames * tpf, dim);
  Matrix base = prng_matrix(tpf, dim, seed);
  for (int f = 0; f < n_frames; ++f) {
    if (f == 0) {
      std::memcpy(seq.features.row(0), base.data.data(), base.size() * sizeof(Real));
      continue;
    }
    Matrix delta = prng_matrix(tpf, dim, mix_seed(seed, uint64_t(f)));
    for (int i = 0; i < tpf; ++i) {
      Real* out = seq.features.row(f * tpf + i);
      const Real* b = base.row(i);
      const Real* d = delta.row(i);
      for (int j = 0; j < dim; ++j) out[j] = b[j] + Real(noise) * d[j];
    }
  }
  return seq;
}

TokenSequence make_detail_sequence(const FrameLayout& layout, int n_frames, int dim,
                                   uint64_t seed, double noise, double detail_fraction,
                                   double detail_scale) {
  TokenSequence seq = make_correlated_sequence(layout, n_frames, dim, seed, noise);
  const int tpf = layout.tokens_per_frame();
  const int special = layout.n_camera + layout.n_register;
  const int n_patches = tpf - special;
  const int n_detail = int(detail_fraction * n_patches);
  // Each frame gets a few high-magnitude view-specific tokens with no
  // counterpart in other frames (fine detail visible from one view only).
  for (int f = 0; f < n_frames; ++f) {
    Rng rng(mix_seed(seed, 0x0de7a11u + uint64_t(f)));
    std::vector<int> patches(n_patches);
    for (int i = 0; i < n_patches; ++i) patches[i] = special + i;
    for (int i = n_patches - 1; i > 0; --i)
      std::swap(patches[i], patches[rng.bounded(uint32_t(i + 1))]);
    for (int k = 0; k < n_detail; ++k) {
      Matrix row = prng_matrix(1, dim, mix_seed(seed, uint64_t(f) * 1000003u + k));
      Real* out = seq.features.row(f * tpf + patches[k]);
      for (int j = 0; j < dim; ++j) out[j] = Real(detail_scale) * row.data[j];
    }
  }
  // Unit-scale random features give near-uniform attention; real activations
  // produce peaked attention maps. Scale up so softmax concentrates.
  for (Real& v : seq.features.data) v *= Real(3);
  return seq;
}

TokenSequence make_constant_sequence(const FrameLayout& layout, int n_frames, int dim,
                                     uint64_t seed) {
  TokenSequence seq;
  seq.layout = layout;
  seq.n_frames = n_frames;
  const int tpf = layout.tokens_per_frame();
  seq.features = Matrix(n_frames * tpf, dim);
  Matrix one = prng_matrix(1, dim, seed);
  for (int i = 0; i < seq.features.rows; ++i)
    std::memcpy(seq.features.row(i), one.row(0), size_t(dim) * sizeof(Real));
  return seq;
}

FrameLayout layout_for_tokens(int tokens_per_frame) {
  FrameLayout layout;
  layout.n_camera = 0;
  layout.n_register = 0;
  int h = 1;
  for (int d = 1; d * d <= tokens_per_frame; ++d)
    if (tokens_per_frame % d == 0) h = d;
  layout.grid_h = h;
  layout.grid_w = tokens_per_frame / h;
  return layout;
}

}  // namespace tokmerge
