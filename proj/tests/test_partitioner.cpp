#include <cmath>
#include <algorithm>
#include <set>

#include "doctest.h"
#include "partitioner.hpp"

using namespace tokmerge;

namespace {

FrameLayout toy_layout() {
  FrameLayout l;
  l.n_camera = 1;
  l.n_register = 2;
  l.grid_h = 6;
  l.grid_w = 7;
  return l;
}

bool contains(const std::vector<int>& v, int x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

TEST_CASE("random partition: ratio 0 and 0.5, determinism") {
  TokenSequence seq = make_random_sequence(layout_for_tokens(20), 5, 8, 1);  // N=100
  Partition p0 = partition_random(seq, 0.0, 3);
  CHECK(p0.src.empty());
  CHECK(int(p0.dst.size()) == 100);

  Partition p = partition_random(seq, 0.5, 3);
  CHECK(int(p.src.size()) == 50);
  CHECK(partition_is_valid(p, 100));
  Partition q = partition_random(seq, 0.5, 3);
  CHECK(p.src == q.src);
  CHECK(p.dst == q.dst);
}

TEST_CASE("fixed-stride partition") {
  TokenSequence seq = make_random_sequence(layout_for_tokens(5), 2, 4, 1);  // N=10
  Partition all_dst = partition_fixed_stride(seq, 1);
  CHECK(all_dst.src.empty());
  CHECK(int(all_dst.dst.size()) == 10);

  Partition p = partition_fixed_stride(seq, 5);
  CHECK(p.dst == std::vector<int>{0, 5});
  CHECK(int(p.src.size()) == 8);

  Partition p8 = partition_fixed_stride(seq, 8);
  CHECK(int(p8.dst.size()) == (10 + 7) / 8);
}

TEST_CASE("reference selection") {
  TokenSequence seq = make_random_sequence(toy_layout(), 3, 4, 1);
  std::vector<int> ref = select_reference(seq);
  const int tpf = toy_layout().tokens_per_frame();
  CHECK(int(ref.size()) == tpf);
  CHECK(ref.front() == 0);
  CHECK(ref.back() == tpf - 1);

  TokenSequence two = make_random_sequence(layout_for_tokens(6), 2, 4, 1);
  CHECK(select_reference(two) == std::vector<int>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("salient selection: fraction 0 empty, stride counts") {
  FrameLayout vggt;  // 1041 tokens per frame
  TokenSequence seq = make_random_sequence(vggt, 3, 4, 1);
  CHECK(select_salient(seq, SalientMode::fixed_stride, 0.0, 1).empty());

  std::vector<int> sal = select_salient(seq, SalientMode::fixed_stride, 0.10, 1);
  CHECK(int(sal.size()) == 2 * 104);  // 104 per non-first frame
  // all indices are patch tokens of frames 1 and 2
  for (int g : sal) {
    const auto [f, p] = frame_pos(g, vggt, 3);
    CHECK(f >= 1);
    CHECK(p >= vggt.n_special());
  }
}

TEST_CASE("salient topk picks the dominant-norm token") {
  FrameLayout layout = layout_for_tokens(12);
  TokenSequence seq = make_random_sequence(layout, 2, 4, 1);
  // fraction 1/tpf selects exactly one patch token per non-first frame
  const int tpf = layout.tokens_per_frame();
  for (int j = 0; j < 4; ++j) seq.features.at(tpf + 7, j) = Real(100);
  std::vector<int> sal =
      select_salient(seq, SalientMode::topk_norm, 1.0 / tpf, 1);
  CHECK(sal == std::vector<int>{tpf + 7});
}

TEST_CASE("uniform region sampling: cell structure") {
  FrameLayout layout;
  layout.n_camera = 0;
  layout.n_register = 0;
  layout.grid_h = 4;
  layout.grid_w = 4;
  TokenSequence seq = make_random_sequence(layout, 2, 4, 1);

  SUBCASE("K=1 makes every patch its own dst") {
    Partition p = partition_uniform_region(seq, 1, select_reference(seq), {}, 5);
    CHECK(p.src.empty());
  }

  SUBCASE("K=2 on 4x4 grid: 4 dst, 12 src in the non-first frame") {
    Partition p = partition_uniform_region(seq, 2, select_reference(seq), {}, 5);
    int dst1 = 0, src1 = 0;
    for (int g : p.dst)
      if (g >= 16) ++dst1;
    for (int g : p.src)
      if (g >= 16) ++src1;
    CHECK(dst1 == 4);
    CHECK(src1 == 12);
    CHECK(partition_is_valid(p, 32));
  }
}

TEST_CASE("uniform region sampling: effective fraction approaches 1 - 1/K^2") {
  FrameLayout layout = layout_for_tokens(144);  // 12x12
  TokenSequence seq = make_random_sequence(layout, 4, 4, 1);
  for (int k : {2, 3, 4}) {
    Partition p = partition_uniform_region(seq, k, select_reference(seq), {}, 9);
    const double per_frame_patches = 144.0;
    const double frac = double(p.src.size()) / (3 * per_frame_patches);
    CHECK(frac == doctest::Approx(1.0 - 1.0 / (k * k)).epsilon(0.02));
  }
}

TEST_CASE("build_partition dispatch and composition") {
  TokenSequence seq = make_random_sequence(toy_layout(), 3, 8, 2);
  const int n = seq.total_tokens();
  const int tpf = toy_layout().tokens_per_frame();

  MergeConfig cfg;
  cfg.strategy = Strategy::random_baseline;
  cfg.merge_ratio = 0.4;
  cfg.seed = 7;
  Partition a = build_partition(seq, cfg);
  Partition a2 = partition_random(seq, 0.4, 7);
  CHECK(a.src == a2.src);

  cfg.strategy = Strategy::fastvggt;
  cfg.region_stride = 2;
  Partition d = build_partition(seq, cfg);
  CHECK(partition_is_valid(d, n));
  CHECK(!d.salient.empty());
  for (int g = 0; g < tpf; ++g) CHECK(contains(d.dst, g));  // frame 0 all dst
  for (int g : d.src) CHECK(g >= tpf);

  SUBCASE("K=1 gives empty src") {
    cfg.region_stride = 1;
    CHECK(build_partition(seq, cfg).src.empty());
  }
  SUBCASE("invalid config throws") {
    cfg.merge_ratio = 1.5;
    CHECK_THROWS_AS(build_partition(seq, cfg), ConfigError);
  }
}

TEST_CASE("partition invariants over randomized strategies and seeds") {
  TokenSequence seq = make_random_sequence(toy_layout(), 3, 8, 3);
  const int n = seq.total_tokens();
  const int tpf = toy_layout().tokens_per_frame();
  for (uint64_t seed = 0; seed < 50; ++seed) {
    for (Strategy s : {Strategy::random_baseline, Strategy::fixed_stride_baseline,
                       Strategy::fastvggt}) {
      MergeConfig cfg;
      cfg.strategy = s;
      cfg.merge_ratio = 0.5 + 0.4 * double(seed % 5) / 5.0;
      cfg.stride = 1 + int(seed % 7);
      cfg.region_stride = 1 + int(seed % 4);
      cfg.seed = seed;
      Partition p = build_partition(seq, cfg);
      CHECK(partition_is_valid(p, n));
      if (s == Strategy::fastvggt) {
        for (int g : p.src) CHECK(g >= tpf);  // reference protection
      }
      // determinism
      Partition q = build_partition(seq, cfg);
      CHECK(p.salient == q.salient);
      CHECK(p.dst == q.dst);
      CHECK(p.src == q.src);
    }
  }
}

TEST_CASE("uniform sampling: exactly one dst per cell") {
  FrameLayout layout = layout_for_tokens(35);  // 5x7
  TokenSequence seq = make_random_sequence(layout, 3, 8, 4);
  MergeConfig cfg;
  cfg.region_stride = 3;
  cfg.seed = 11;
  Partition p = build_partition(seq, cfg);
  std::set<int> dst(p.dst.begin(), p.dst.end());
  std::set<int> sal(p.salient.begin(), p.salient.end());
  const int k = cfg.region_stride;
  for (int f = 1; f < 3; ++f)
    for (int cr = 0; cr * k < layout.grid_h; ++cr)
      for (int cc = 0; cc * k < layout.grid_w; ++cc) {
        int n_dst = 0, eligible = 0;
        for (int r = cr * k; r < std::min(layout.grid_h, (cr + 1) * k); ++r)
          for (int c = cc * k; c < std::min(layout.grid_w, (cc + 1) * k); ++c) {
            const int g = f * 35 + r * layout.grid_w + c;
            if (sal.count(g)) continue;
            ++eligible;
            if (dst.count(g)) ++n_dst;
          }
        if (eligible > 0) CHECK(n_dst == 1);
      }
}

TEST_CASE("strategy names round-trip") {
  for (Strategy s : {Strategy::random_baseline, Strategy::fixed_stride_baseline,
                     Strategy::fastvggt})
    CHECK(strategy_from_name(strategy_name(s)) == s);
  CHECK_THROWS_AS(strategy_from_name("bogus"), ConfigError);
}

TEST_CASE("topk-norm saliency picks the detail tokens") {
  FrameLayout layout = layout_for_tokens(25);
  const int tpf = layout.tokens_per_frame();
  TokenSequence seq = make_detail_sequence(layout, 3, 8, 17, 0.1, 0.08, 4.0);
  const int n_detail = int(0.08 * tpf);
  auto sal = select_salient(seq, SalientMode::topk_norm, 0.08, 5);
  REQUIRE(int(sal.size()) == 2 * n_detail);  // frames 1..2 only
  for (int idx : sal) {
    double s = 0;
    for (int j = 0; j < 8; ++j) {
      double v = seq.features.at(idx, j);
      s += v * v;
    }
    // detail rows have ~4x the norm of regular rows; salient must be detail
    CHECK(std::sqrt(s) > 6.0);
  }
}
