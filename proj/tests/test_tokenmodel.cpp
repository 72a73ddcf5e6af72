#include <algorithm>
#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "tokenmodel.hpp"

using namespace tokmerge;

TEST_CASE("vggt-shaped default layout") {
  FrameLayout layout;
  CHECK(layout.tokens_per_frame() == 1041);
  CHECK(layout.n_patches() == 1036);
}

TEST_CASE("global_index basics") {
  FrameLayout layout;
  CHECK(global_index(0, 0, layout, 3) == 0);
  CHECK(global_index(1, 0, layout, 3) == 1041);
  CHECK_THROWS_AS(global_index(3, 0, layout, 3), IndexError);
  CHECK_THROWS_AS(global_index(0, 1041, layout, 3), IndexError);
}

TEST_CASE("index mapping is a bijection on a toy layout") {
  FrameLayout layout;
  layout.n_camera = 1;
  layout.n_register = 2;
  layout.grid_h = 2;
  layout.grid_w = 3;
  const int n_frames = 3;
  const int tpf = layout.tokens_per_frame();
  std::vector<int> hit(n_frames * tpf, 0);
  for (int f = 0; f < n_frames; ++f)
    for (int p = 0; p < tpf; ++p) {
      const int g = global_index(f, p, layout, n_frames);
      hit[g] += 1;
      const auto [f2, p2] = frame_pos(g, layout, n_frames);
      CHECK(f2 == f);
      CHECK(p2 == p);
    }
  for (int h : hit) CHECK(h == 1);
}

TEST_CASE("patch grid coordinates") {
  FrameLayout layout;  // 1 camera + 4 register
  CHECK(!patch_grid_coords(0, layout).has_value());
  CHECK(!patch_grid_coords(4, layout).has_value());
  auto first = patch_grid_coords(5, layout);
  REQUIRE(first.has_value());
  CHECK(first->row == 0);
  CHECK(first->col == 0);
  auto last = patch_grid_coords(layout.tokens_per_frame() - 1, layout);
  REQUIRE(last.has_value());
  CHECK(last->row == layout.grid_h - 1);
  CHECK(last->col == layout.grid_w - 1);
  CHECK_THROWS_AS(patch_grid_coords(-1, layout), IndexError);
}

TEST_CASE("partition validity check") {
  Partition p;
  p.salient = {0};
  p.dst = {1, 2};
  p.src = {3};
  CHECK(partition_is_valid(p, 4));
  p.src = {2};  // overlap
  CHECK(!partition_is_valid(p, 4));
  p.src = {3};
  CHECK(!partition_is_valid(p, 5));  // not exhaustive
}

TEST_CASE("sequence round-trips through the binary fixture format") {
  FrameLayout layout;
  layout.n_camera = 1;
  layout.n_register = 1;
  layout.grid_h = 2;
  layout.grid_w = 2;
  TokenSequence seq = make_random_sequence(layout, 2, 8, 7);
  const std::string path = "tokmerge_test_fixture.bin";
  save_sequence(seq, path);
  TokenSequence back = load_sequence(path);
  std::remove(path.c_str());
  CHECK(back.n_frames == seq.n_frames);
  CHECK(back.layout.grid_w == 2);
  CHECK(back.features.data == seq.features.data);
}

TEST_CASE("correlated sequence: frame 0 is the base, noise 0 duplicates it") {
  FrameLayout layout = layout_for_tokens(12);
  TokenSequence seq = make_correlated_sequence(layout, 3, 4, 9, 0.0);
  const int tpf = layout.tokens_per_frame();
  for (int f = 1; f < 3; ++f)
    for (int i = 0; i < tpf; ++i)
      for (int j = 0; j < 4; ++j)
        CHECK(seq.features.at(f * tpf + i, j) == seq.features.at(i, j));
}

TEST_CASE("layout_for_tokens is near-square and exact") {
  for (int t : {1, 7, 12, 128, 1036}) {
    FrameLayout l = layout_for_tokens(t);
    CHECK(l.tokens_per_frame() == t);
    CHECK(l.n_special() == 0);
    CHECK(l.grid_h <= l.grid_w);
  }
}

TEST_CASE("detail sequence: view-specific tokens stand out by norm") {
  FrameLayout layout = layout_for_tokens(25);
  const int tpf = layout.tokens_per_frame();
  TokenSequence seq = make_detail_sequence(layout, 3, 32, 13, 0.1, 0.08, 4.0);
  const int n_detail = int(0.08 * tpf);
  CHECK(n_detail >= 1);
  // per frame, the n_detail outlier rows separate cleanly from the rest
  for (int f = 0; f < 3; ++f) {
    std::vector<double> norms(tpf);
    for (int i = 0; i < tpf; ++i) {
      double s = 0;
      for (int j = 0; j < 32; ++j) {
        double v = seq.features.at(f * tpf + i, j);
        s += v * v;
      }
      norms[i] = std::sqrt(s);
    }
    std::vector<double> sorted = norms;
    std::sort(sorted.begin(), sorted.end());
    // clear norm gap between the n_detail outliers and the rest
    CHECK(sorted[tpf - n_detail] > 2.0 * sorted[tpf - n_detail - 1]);
  }
}
