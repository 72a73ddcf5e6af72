#include "profiler.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstring>
#include <sstream>

#include "json.hpp"

namespace tokmerge {

double ProfileReport::component_time(const char* which) const {
  double total = 0.0;
  for (const BlockProfile& b : blocks) {
    if (std::strcmp(which, "frame_attn") == 0) total += b.frame_attn.time_ns;
    else if (std::strcmp(which, "global_attn") == 0) total += b.global_attn.time_ns;
    else if (std::strcmp(which, "merge_overhead") == 0) total += b.merge_overhead.time_ns;
  }
  return total;
}

uint64_t ProfileReport::attn_core_flops_total() const {
  uint64_t total = 0;
  for (const BlockProfile& b : blocks) total += b.attn_core_flops;
  return total;
}

namespace {

std::string echo_line(const ModelConfig& model, const MergeConfig& cfg,
                      const BenchSize& size) {
  std::ostringstream os;
  os << "n_blocks=" << model.n_blocks << "\ndim=" << size.dim
     << "\nn_heads=" << model.n_heads << "\nweight_seed=" << model.weight_seed
     << "\nn_frames=" << size.n_frames << "\ntokens_per_frame=" << size.tokens_per_frame
     << "\nstrategy=" << strategy_name(cfg.strategy) << "\nmerge_ratio=" << cfg.merge_ratio
     << "\nstride=" << cfg.stride << "\nregion_stride=" << cfg.region_stride
     << "\nsalient_fraction=" << cfg.salient_fraction
     << "\nsalient_mode=" << (cfg.salient_mode == SalientMode::topk_norm ? "topk_norm" : "fixed_stride")
     << "\nstart_block=" << cfg.start_block << "\nseed=" << cfg.seed << "\n";
  return os.str();
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ProfileReport median_report(std::vector<ProfileReport> runs) {
  ProfileReport out = runs.front();
  for (size_t b = 0; b < out.blocks.size(); ++b) {
    auto med = [&](auto pick) {
      std::vector<double> v;
      for (const auto& r : runs) v.push_back(pick(r.blocks[b]));
      return median_of(v);
    };
    out.blocks[b].frame_attn.time_ns = med([](const BlockProfile& p) { return p.frame_attn.time_ns; });
    out.blocks[b].global_attn.time_ns = med([](const BlockProfile& p) { return p.global_attn.time_ns; });
    out.blocks[b].merge_overhead.time_ns = med([](const BlockProfile& p) { return p.merge_overhead.time_ns; });
  }
  std::vector<double> totals;
  for (const auto& r : runs) totals.push_back(r.total_time_ns);
  out.total_time_ns = median_of(totals);
  return out;
}

}  // namespace

std::vector<BenchResult> run_benchmark(const ModelConfig& model, const MergeConfig& cfg,
                                       const std::vector<BenchSize>& sizes, int repeats,
                                       uint64_t seed) {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  std::vector<BenchResult> out;
  for (size_t si = 0; si < sizes.size(); ++si) {
    const BenchSize& size = sizes[si];
    BenchResult res;
    res.size = size;

    const uint64_t n = uint64_t(size.n_frames) * size.tokens_per_frame;
    const uint64_t attn_bytes = 3 * n * n * sizeof(Real);
    if (attn_bytes > (8ull << 30)) {
      res.skipped = true;
      res.skip_reason = "attention buffers would exceed 8 GiB";
      out.push_back(std::move(res));
      continue;
    }

    ModelConfig m = model;
    m.dim = size.dim;
    const FrameLayout layout = layout_for_tokens(size.tokens_per_frame);
    const TokenSequence seq =
        make_correlated_sequence(layout, size.n_frames, size.dim, mix_seed(seed, si), 0.25);

    for (Mode mode : {Mode::dense, Mode::merged}) {
      std::vector<ProfileReport> runs;
      forward(seq, m, cfg, mode);  // warmup, excluded
      for (int r = 0; r < repeats; ++r) runs.push_back(forward(seq, m, cfg, mode).report);
      ProfileReport rep = median_report(std::move(runs));
      rep.config_echo = echo_line(m, cfg, size);
      (mode == Mode::dense ? res.dense : res.merged) = std::move(rep);
    }
    out.push_back(std::move(res));
  }
  return out;
}

namespace {

void check_comparable(const ProfileReport& a, const ProfileReport& b) {
  if (a.blocks.size() != b.blocks.size())
    throw ComparisonError("speedup: block counts differ");
  for (size_t i = 0; i < a.blocks.size(); ++i)
    if (a.blocks[i].tokens_before != b.blocks[i].tokens_before)
      throw ComparisonError("speedup: token counts differ");
}

double total_wall(const ProfileReport& r) {
  return r.component_time("frame_attn") + r.component_time("global_attn") +
         r.component_time("merge_overhead");
}

}  // namespace

double speedup(const ProfileReport& dense, const ProfileReport& merged) {
  check_comparable(dense, merged);
  return total_wall(dense) / total_wall(merged);
}

double global_attn_speedup(const ProfileReport& dense, const ProfileReport& merged) {
  check_comparable(dense, merged);
  return dense.component_time("global_attn") / merged.component_time("global_attn");
}

std::string bench_csv(const std::vector<BenchResult>& results) {
  std::ostringstream os;
  os << "n_frames,tokens_per_frame,dim,mode,block,component,time_ns,flops,"
        "attn_core_flops,tokens_before,tokens_after,skipped\n";
  auto emit = [&](const BenchResult& r, const ProfileReport& rep) {
    for (size_t b = 0; b < rep.blocks.size(); ++b) {
      const BlockProfile& bp = rep.blocks[b];
      const struct { const char* name; const ComponentStats* st; } comps[] = {
          {"frame_attn", &bp.frame_attn},
          {"global_attn", &bp.global_attn},
          {"merge_overhead", &bp.merge_overhead},
      };
      for (const auto& c : comps) {
        os << r.size.n_frames << ',' << r.size.tokens_per_frame << ',' << r.size.dim
           << ',' << rep.mode << ',' << b << ',' << c.name << ','
           << uint64_t(c.st->time_ns) << ',' << c.st->flops << ',' << bp.attn_core_flops
           << ',' << bp.tokens_before << ',' << bp.tokens_after << ",0\n";
      }
    }
  };
  for (const BenchResult& r : results) {
    if (r.skipped) {
      os << r.size.n_frames << ',' << r.size.tokens_per_frame << ',' << r.size.dim
         << ",,,,,,,,,1\n";
      continue;
    }
    emit(r, r.dense);
    emit(r, r.merged);
  }
  return os.str();
}

std::string bench_json(const std::vector<BenchResult>& results) {
  nlohmann::json out = nlohmann::json::array();
  auto rep_json = [](const ProfileReport& rep) {
    nlohmann::json j;
    j["mode"] = rep.mode;
    j["total_time_ns"] = rep.total_time_ns;
    j["total_flops"] = rep.total_flops;
    j["peak_retained_buffers"] = rep.peak_retained_buffers;
    j["kernel_threads"] = rep.kernel_threads;
    nlohmann::json blocks = nlohmann::json::array();
    for (const BlockProfile& b : rep.blocks) {
      blocks.push_back({{"frame_attn_ns", b.frame_attn.time_ns},
                        {"frame_attn_flops", b.frame_attn.flops},
                        {"global_attn_ns", b.global_attn.time_ns},
                        {"global_attn_flops", b.global_attn.flops},
                        {"merge_overhead_ns", b.merge_overhead.time_ns},
                        {"merge_overhead_flops", b.merge_overhead.flops},
                        {"attn_core_flops", b.attn_core_flops},
                        {"tokens_before", b.tokens_before},
                        {"tokens_after", b.tokens_after}});
    }
    j["blocks"] = blocks;
    return j;
  };
  for (const BenchResult& r : results) {
    nlohmann::json j;
    j["n_frames"] = r.size.n_frames;
    j["tokens_per_frame"] = r.size.tokens_per_frame;
    j["dim"] = r.size.dim;
    if (r.skipped) {
      j["skipped"] = true;
      j["skip_reason"] = r.skip_reason;
    } else {
      j["skipped"] = false;
      j["dense"] = rep_json(r.dense);
      j["merged"] = rep_json(r.merged);
    }
    out.push_back(std::move(j));
  }
  return out.dump(2);
}

std::string report_summary(const BenchResult& r) {
  std::ostringstream os;
  if (r.skipped) {
    os << "frames=" << r.size.n_frames << " tpf=" << r.size.tokens_per_frame
       << " SKIPPED: " << r.skip_reason << "\n";
    return os.str();
  }
  os << "frames=" << r.size.n_frames << " tpf=" << r.size.tokens_per_frame
     << " dim=" << r.size.dim << "  speedup=" << speedup(r.dense, r.merged)
     << "  global_attn_speedup=" << global_attn_speedup(r.dense, r.merged)
     << "  dense_ms=" << r.dense.total_time_ns / 1e6
     << "  merged_ms=" << r.merged.total_time_ns / 1e6 << "\n";
  return os.str();
}

}  // namespace tokmerge
