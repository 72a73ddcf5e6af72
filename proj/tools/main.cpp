#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "analyzer.hpp"
#include "pgm.hpp"
#include "profiler.hpp"

namespace fs = std::filesystem;
using namespace tokmerge;

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string hex8(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%08llx", (unsigned long long)(h & 0xFFFFFFFFull));
  return buf;
}

// One subdirectory per run: <config-hash>_s<seed>, holding the config echo
// and all report files.
fs::path make_run_dir(const std::string& out_dir, const std::string& echo, uint64_t seed) {
  fs::path dir = fs::path(out_dir) / (hex8(fnv1a(echo)) + "_s" + std::to_string(seed));
  fs::create_directories(dir);
  std::ofstream(dir / "config.txt") << echo;
  return dir;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ResourceError("cannot write " + p.string());
  f << content;
}

struct MergeFlags {
  std::string strategy = "fastvggt";
  double ratio = 0.9;
  int stride = 5;
  int region_stride = 3;
  double salient_fraction = 0.10;
  std::string salient_mode = "fixed_stride";
  bool no_reference = false;
  bool no_salient = false;
  int start_block = 0;
  bool reuse_partition = false;

  void attach(CLI::App* app) {
    app->add_option("--strategy", strategy, "random | fixed_stride | fastvggt");
    app->add_option("--ratio", ratio, "merge ratio r (random baseline)");
    app->add_option("--stride", stride, "stride s (fixed-stride baseline)");
    app->add_option("--region-stride", region_stride, "region cell side K");
    app->add_option("--salient-fraction", salient_fraction);
    app->add_option("--salient-mode", salient_mode, "fixed_stride | topk_norm");
    app->add_flag("--no-reference", no_reference);
    app->add_flag("--no-salient", no_salient);
    app->add_option("--start-block", start_block);
    app->add_flag("--reuse-partition", reuse_partition);
  }

  MergeConfig to_config(uint64_t seed) const {
    MergeConfig cfg;
    cfg.strategy = strategy_from_name(strategy);
    cfg.merge_ratio = ratio;
    cfg.stride = stride;
    cfg.region_stride = region_stride;
    cfg.salient_fraction = salient_fraction;
    cfg.salient_mode = salient_mode == "topk_norm" ? SalientMode::topk_norm
                                                  : SalientMode::fixed_stride;
    cfg.use_reference = !no_reference;
    cfg.use_salient = !no_salient;
    cfg.start_block = start_block;
    cfg.reuse_partition = reuse_partition;
    cfg.seed = seed;
    validate(cfg);
    return cfg;
  }
};

double rel_l2_error(const Matrix& a, const Matrix& b) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    num += d * d;
    den += double(b.data[i]) * double(b.data[i]);
  }
  return den == 0.0 ? 0.0 : std::sqrt(num / den);
}

TokenSequence make_fixture(const std::string& mode, const FrameLayout& layout,
                           int frames, int dim, uint64_t seed, double noise) {
  if (mode == "random") return make_random_sequence(layout, frames, dim, seed);
  if (mode == "correlated") return make_correlated_sequence(layout, frames, dim, seed, noise);
  if (mode == "detail") return make_detail_sequence(layout, frames, dim, seed, noise);
  if (mode == "constant") return make_constant_sequence(layout, frames, dim, seed);
  throw ConfigError("unknown fixture mode: " + mode);
}

int cmd_bench(const std::vector<int>& frames_list, int tpf, int dim, int heads,
              int blocks, const MergeFlags& mf, int repeats, int threads,
              uint64_t seed, const std::string& out_dir) {
  set_kernel_threads(threads);
  ModelConfig model;
  model.n_blocks = blocks;
  model.dim = dim;
  model.n_heads = heads;
  model.keep_layers = {blocks - 1};
  model.weight_seed = seed;
  const MergeConfig cfg = mf.to_config(seed);

  std::vector<BenchSize> sizes;
  for (int f : frames_list) sizes.push_back({f, tpf, dim});
  const std::vector<BenchResult> results = run_benchmark(model, cfg, sizes, repeats, seed);

  std::string echo;
  for (const auto& r : results)
    if (!r.skipped) {
      echo = r.dense.config_echo;
      break;
    }
  const fs::path dir = make_run_dir(out_dir, echo + "cmd=bench\n", seed);
  write_file(dir / "report.csv", bench_csv(results));
  write_file(dir / "report.json", bench_json(results));

  for (const auto& r : results) std::cout << report_summary(r);
  std::cout << "reports written to " << dir.string() << "\n";
  return 0;
}

int cmd_ablate(int frames, int tpf, int dim, int heads, int blocks,
               const std::vector<double>& ratios, std::vector<int> start_blocks,
               int n_seeds, uint64_t seed, double noise, double salient_fraction,
               const std::string& out_dir) {
  ModelConfig model;
  model.n_blocks = blocks;
  model.dim = dim;
  model.n_heads = heads;
  model.keep_layers = {blocks - 1};
  model.weight_seed = seed;
  start_blocks.push_back(blocks);  // control rows: no block merges

  const FrameLayout layout = layout_for_tokens(tpf);
  std::ostringstream csv;
  csv << "seed,strategy,ratio_param,start_block,effective_src_fraction,"
         "rel_l2_error,total_time_ns\n";

  for (int s = 0; s < n_seeds; ++s) {
    const uint64_t run_seed = mix_seed(seed, uint64_t(s));
    // Overlapping views plus a few view-specific high-magnitude tokens per
    // frame; the latter are what norm-based saliency is meant to protect.
    const TokenSequence seq =
        make_detail_sequence(layout, frames, dim, run_seed, noise);
    MergeConfig dense_cfg;
    dense_cfg.seed = run_seed;
    const ForwardResult dense = forward(seq, model, dense_cfg, Mode::dense);
    const Matrix& ref = dense.kept_outputs.at(blocks - 1);

    auto run_cell = [&](const std::string& label, MergeConfig cfg, double ratio_param,
                        int start_block) -> double {
      cfg.start_block = start_block;
      cfg.seed = run_seed;
      const ForwardResult merged = forward(seq, model, cfg, Mode::merged);
      const int n = merged.report.blocks.empty() ? 0 : merged.report.blocks[0].tokens_before;
      int m = n;
      for (const BlockProfile& b : merged.report.blocks)
        if (b.tokens_after < m) m = b.tokens_after;
      const double frac = n == 0 ? 0.0 : double(n - m) / double(n);
      const double err = rel_l2_error(merged.kept_outputs.at(blocks - 1), ref);
      csv << s << ',' << label << ',' << ratio_param << ',' << start_block << ','
          << frac << ',' << err << ','
          << uint64_t(merged.report.total_time_ns) << "\n";
      return frac;
    };

    for (double ratio : ratios)
      for (int sb : start_blocks) {
        MergeConfig random_cfg;
        random_cfg.strategy = Strategy::random_baseline;
        random_cfg.merge_ratio = ratio;
        run_cell("random", random_cfg, ratio, sb);

        MergeConfig stride_cfg;
        stride_cfg.strategy = Strategy::fixed_stride_baseline;
        stride_cfg.stride = std::max(1, int(std::ceil(1.0 / (1.0 - ratio))));
        run_cell("fixed_stride", stride_cfg, ratio, sb);

        MergeConfig fv_cfg;
        fv_cfg.strategy = Strategy::fastvggt;
        fv_cfg.region_stride =
            std::max(2, int(std::lround(1.0 / std::sqrt(1.0 - ratio))));
        fv_cfg.salient_fraction = salient_fraction;
        fv_cfg.salient_mode = SalientMode::topk_norm;
        const double frac = run_cell("fastvggt", fv_cfg, ratio, sb);

        // Random baseline at the fraction fastvggt actually achieved, for a
        // like-for-like accuracy comparison.
        MergeConfig matched_cfg;
        matched_cfg.strategy = Strategy::random_baseline;
        matched_cfg.merge_ratio = frac;
        run_cell("random_matched", matched_cfg, ratio, sb);
      }
  }

  std::ostringstream echo;
  echo << "cmd=ablate\nframes=" << frames << "\ntokens_per_frame=" << tpf
       << "\ndim=" << dim << "\nn_heads=" << heads << "\nn_blocks=" << blocks
       << "\nn_seeds=" << n_seeds << "\nnoise=" << noise << "\nseed=" << seed << "\n";
  const fs::path dir = make_run_dir(out_dir, echo.str(), seed);
  write_file(dir / "ablate.csv", csv.str());
  std::cout << "ablation grid written to " << (dir / "ablate.csv").string() << "\n";
  return 0;
}

int cmd_analyze(const std::string& fixture, const std::string& mode, int frames, int tpf,
                int dim, int heads, int blocks, std::vector<int> capture_blocks,
                int sample_pairs, bool heatmap, double noise, uint64_t seed,
                const std::string& out_dir) {
  TokenSequence seq;
  if (!fixture.empty()) {
    seq = load_sequence(fixture);
  } else {
    seq = make_fixture(mode, layout_for_tokens(tpf), frames, dim, seed, noise);
  }
  ModelConfig model;
  model.n_blocks = blocks;
  model.dim = seq.dim();
  model.n_heads = heads;
  model.keep_layers = {blocks - 1};
  model.weight_seed = seed;

  ForwardHooks hooks;
  for (int b : capture_blocks) {
    if (b < 0 || b >= blocks) throw ConfigError("capture block out of range");
    hooks.capture_blocks.insert(b);
  }
  MergeConfig cfg;
  cfg.seed = seed;
  forward(seq, model, cfg, Mode::dense, &hooks);

  RedundancyReport report;
  for (int b : capture_blocks)
    report.blocks.push_back(analyze_block(b, hooks.captured.at(b), seq.layout,
                                          seq.n_frames, sample_pairs,
                                          mix_seed(seed, uint64_t(b))));

  std::ostringstream echo;
  echo << "cmd=analyze\nframes=" << seq.n_frames
       << "\ntokens_per_frame=" << seq.layout.tokens_per_frame() << "\ndim=" << seq.dim()
       << "\nn_heads=" << heads << "\nn_blocks=" << blocks << "\nseed=" << seed << "\n";
  const fs::path dir = make_run_dir(out_dir, echo.str(), seed);
  write_file(dir / "redundancy.json", redundancy_to_json(report));

  if (heatmap) {
    const int n = seq.total_tokens();
    for (int b : capture_blocks) {
      const std::vector<Matrix>& heads_attn = hooks.captured.at(b);
      std::vector<double> avg(size_t(n) * n, 0.0);
      for (const Matrix& h : heads_attn)
        for (size_t i = 0; i < h.size(); ++i) avg[i] += double(h.data[i]);
      double mx = 0.0;
      for (double v : avg) mx = std::max(mx, v);
      std::vector<uint8_t> px(avg.size(), 0);
      if (mx > 0.0)
        for (size_t i = 0; i < avg.size(); ++i)
          px[i] = uint8_t(std::min(255.0, 255.0 * avg[i] / mx));
      write_pgm((dir / ("attn_block" + std::to_string(b) + ".pgm")).string(), n, n, px);
    }
  }
  std::cout << "analysis written to " << dir.string() << "\n";
  for (const BlockRedundancy& b : report.blocks)
    std::cout << "block " << b.block << ": mean_row_similarity=" << b.row_similarity.mean
              << " frame0_mass_mean=" << b.frame0_mass_mean << "\n";
  return 0;
}

int cmd_gen_fixture(const std::string& mode, int frames, int n_camera, int n_register,
                    int grid_h, int grid_w, int dim, double noise, uint64_t seed,
                    const std::string& out) {
  FrameLayout layout;
  layout.n_camera = n_camera;
  layout.n_register = n_register;
  layout.grid_h = grid_h;
  layout.grid_w = grid_w;
  const TokenSequence seq = make_fixture(mode, layout, frames, dim, seed, noise);
  save_sequence(seq, out);
  std::cout << "fixture written to " << out << " (" << seq.total_tokens() << " tokens x "
            << seq.dim() << ")\n";
  return 0;
}

int cmd_viz_partition(const std::string& fixture, int frames, int tpf, int dim,
                      const MergeFlags& mf, double noise, uint64_t seed,
                      const std::string& out_dir) {
  TokenSequence seq;
  if (!fixture.empty())
    seq = load_sequence(fixture);
  else
    seq = make_correlated_sequence(layout_for_tokens(tpf), frames, dim, seed, noise);

  const MergeConfig cfg = mf.to_config(seed);
  const Partition p = build_partition(seq, cfg);
  const MergeMap map = match(seq, p);

  std::ostringstream echo;
  echo << "cmd=viz-partition\nframes=" << seq.n_frames
       << "\ntokens_per_frame=" << seq.layout.tokens_per_frame()
       << "\nstrategy=" << mf.strategy << "\nseed=" << seed << "\n";
  const fs::path dir = make_run_dir(out_dir, echo.str(), seed);
  write_file(dir / "partition.json", partition_to_json(p));
  write_file(dir / "merge_map.json", merge_map_to_json(map));

  // One mask per frame over the patch grid: salient bright, dst mid, src dark.
  const FrameLayout& layout = seq.layout;
  const int tokens = seq.total_tokens();
  std::vector<uint8_t> role(tokens, 0);
  for (int i : p.salient) role[i] = 255;
  for (int i : p.dst) role[i] = 160;
  for (int i : p.src) role[i] = 64;
  for (int f = 0; f < seq.n_frames; ++f) {
    std::vector<uint8_t> px(size_t(layout.grid_h) * layout.grid_w);
    for (int pi = 0; pi < layout.n_patches(); ++pi)
      px[pi] = role[f * layout.tokens_per_frame() + layout.n_special() + pi];
    write_pgm((dir / ("mask_frame" + std::to_string(f) + ".pgm")).string(),
              layout.grid_w, layout.grid_h, px);
  }
  std::cout << "partition artifacts written to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"token-merging attention engine: benchmarks, ablations, analysis"};
  app.require_subcommand(1);
  app.set_config("--config");

  uint64_t seed = 0;
  app.add_option("--seed", seed, "base seed for all randomized choices")->required();
  std::string out_dir = "runs";
  app.add_option("--out", out_dir, "output directory (or fixture path for gen-fixture)");

  // bench
  auto* bench = app.add_subcommand("bench", "dense vs merged benchmark grid");
  bench->fallthrough();
  std::vector<int> frames_list = {8, 16, 32, 64};
  int tpf = 128, dim = 64, heads = 4, blocks = 8, repeats = 5, threads = 1;
  bench->add_option("--frames", frames_list)->delimiter(',');
  bench->add_option("--tokens-per-frame", tpf);
  bench->add_option("--dim", dim);
  bench->add_option("--heads", heads);
  bench->add_option("--blocks", blocks);
  bench->add_option("--repeats", repeats);
  bench->add_option("--threads", threads);
  MergeFlags bench_mf;
  bench_mf.attach(bench);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "strategy x ratio x start-block grid");
  ablate->fallthrough();
  int ab_frames = 4, ab_tpf = 64, ab_dim = 32, ab_heads = 4, ab_blocks = 24, ab_seeds = 5;
  std::vector<double> ab_ratios = {0.3, 0.6, 0.9};
  std::vector<int> ab_starts = {0, 10, 20};
  double ab_noise = 0.25, ab_salient = 0.10;
  ablate->add_option("--frames", ab_frames);
  ablate->add_option("--tokens-per-frame", ab_tpf);
  ablate->add_option("--dim", ab_dim);
  ablate->add_option("--heads", ab_heads);
  ablate->add_option("--blocks", ab_blocks);
  ablate->add_option("--ratios", ab_ratios)->delimiter(',');
  ablate->add_option("--start-blocks", ab_starts)->delimiter(',');
  ablate->add_option("--seeds", ab_seeds);
  ablate->add_option("--noise", ab_noise);
  ablate->add_option("--salient-fraction", ab_salient);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "attention redundancy analysis");
  analyze->fallthrough();
  std::string an_fixture, an_mode = "correlated";
  int an_frames = 3, an_tpf = 64, an_dim = 32, an_heads = 4, an_blocks = 24;
  std::vector<int> an_capture = {0, 11, 23};
  int an_pairs = 4096;
  bool an_heatmap = false;
  double an_noise = 0.25;
  analyze->add_option("--fixture", an_fixture);
  analyze->add_option("--mode", an_mode, "random | correlated | constant");
  analyze->add_option("--frames", an_frames);
  analyze->add_option("--tokens-per-frame", an_tpf);
  analyze->add_option("--dim", an_dim);
  analyze->add_option("--heads", an_heads);
  analyze->add_option("--n-blocks", an_blocks);
  analyze->add_option("--blocks", an_capture)->delimiter(',');
  analyze->add_option("--sample-pairs", an_pairs);
  analyze->add_flag("--heatmap", an_heatmap);
  analyze->add_option("--noise", an_noise);

  // gen-fixture
  auto* gen = app.add_subcommand("gen-fixture", "write a binary token-sequence fixture");
  gen->fallthrough();
  std::string gf_mode = "correlated";
  int gf_frames = 3, gf_cam = 1, gf_reg = 4, gf_h = 28, gf_w = 37, gf_dim = 64;
  double gf_noise = 0.25;
  gen->add_option("--mode", gf_mode);
  gen->add_option("--frames", gf_frames);
  gen->add_option("--n-camera", gf_cam);
  gen->add_option("--n-register", gf_reg);
  gen->add_option("--grid-h", gf_h);
  gen->add_option("--grid-w", gf_w);
  gen->add_option("--dim", gf_dim);
  gen->add_option("--noise", gf_noise);

  // viz-partition
  auto* viz = app.add_subcommand("viz-partition", "export partition JSON and PGM masks");
  viz->fallthrough();
  std::string vz_fixture;
  int vz_frames = 3, vz_tpf = 64, vz_dim = 32;
  double vz_noise = 0.25;
  viz->add_option("--fixture", vz_fixture);
  viz->add_option("--frames", vz_frames);
  viz->add_option("--tokens-per-frame", vz_tpf);
  viz->add_option("--dim", vz_dim);
  viz->add_option("--noise", vz_noise);
  MergeFlags viz_mf;
  viz_mf.attach(viz);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (bench->parsed())
      return cmd_bench(frames_list, tpf, dim, heads, blocks, bench_mf, repeats, threads,
                       seed, out_dir);
    if (ablate->parsed())
      return cmd_ablate(ab_frames, ab_tpf, ab_dim, ab_heads, ab_blocks, ab_ratios,
                        ab_starts, ab_seeds, seed, ab_noise, ab_salient, out_dir);
    if (analyze->parsed())
      return cmd_analyze(an_fixture, an_mode, an_frames, an_tpf, an_dim, an_heads,
                         an_blocks, an_capture, an_pairs, an_heatmap, an_noise, seed,
                         out_dir);
    if (gen->parsed())
      return cmd_gen_fixture(gf_mode, gf_frames, gf_cam, gf_reg, gf_h, gf_w, gf_dim,
                             gf_noise, seed, out_dir);
    if (viz->parsed())
      return cmd_viz_partition(vz_fixture, vz_frames, vz_tpf, vz_dim, viz_mf, vz_noise,
                               seed, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
