#include "partitioner.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace tokmerge {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::random_baseline: return "random";
    case Strategy::fixed_stride_baseline: return "fixed_stride";
    case Strategy::fastvggt: return "fastvggt";
  }
  return "?";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "random") return Strategy::random_baseline;
  if (name == "fixed_stride") return Strategy::fixed_stride_baseline;
  if (name == "fastvggt") return Strategy::fastvggt;
  throw ConfigError("unknown strategy: " + name);
}

void validate(const MergeConfig& cfg) {
  if (cfg.merge_ratio < 0.0 || cfg.merge_ratio > 1.0)
    throw ConfigError("merge_ratio must be in [0,1]");
  if (cfg.stride < 1) throw ConfigError("stride must be >= 1");
  if (cfg.region_stride < 1) throw ConfigError("region_stride must be >= 1");
  if (cfg.salient_fraction < 0.0 || cfg.salient_fraction >= 1.0)
    throw ConfigError("salient_fraction must be in [0,1)");
  if (cfg.start_block < 0) throw ConfigError("start_block must be >= 0");
}

namespace {

enum Role : uint8_t { UNSET = 0, SALIENT, DST, SRC };

Partition roles_to_partition(const std::vector<uint8_t>& roles) {
  Partition p;
  for (int i = 0; i < int(roles.size()); ++i) {
    switch (roles[i]) {
      case SALIENT: p.salient.push_back(i); break;
      case DST: p.dst.push_back(i); break;
      case SRC: p.src.push_back(i); break;
      default: break;
    }
  }
  return p;
}

}  // namespace

Partition partition_random(const TokenSequence& seq, double r, uint64_t seed) {
  const int n = seq.total_tokens();
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  Rng rng(mix_seed(seed, 0x72616e64));
  for (int i = n - 1; i > 0; --i) {
    const int j = int(rng.bounded(uint64_t(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  const int n_src = int(std::floor(r * n));
  std::vector<uint8_t> roles(n, DST);
  for (int i = 0; i < n_src; ++i) roles[idx[i]] = SRC;
  return roles_to_partition(roles);
}

Partition partition_fixed_stride(const TokenSequence& seq, int s) {
  if (s < 1) throw ConfigError("stride must be >= 1");
  const int n = seq.total_tokens();
  Partition p;
  for (int i = 0; i < n; ++i) {
    if (i % s == 0)
      p.dst.push_back(i);
    else
      p.src.push_back(i);
  }
  return p;
}

std::vector<int> select_reference(const TokenSequence& seq) {
  std::vector<int> out(seq.layout.tokens_per_frame());
  for (int i = 0; i < int(out.size()); ++i) out[i] = i;
  return out;
}

std::vector<int> select_salient(const TokenSequence& seq, SalientMode mode,
                                double fraction, uint64_t seed) {
  (void)seed;  // both modes are deterministic
  std::vector<int> out;
  if (fraction <= 0.0) return out;
  const FrameLayout& layout = seq.layout;
  const int tpf = layout.tokens_per_frame();
  const int n_patches = layout.n_patches();
  const int target = int(std::floor(fraction * tpf));
  if (target == 0) return out;
  for (int f = 1; f < seq.n_frames; ++f) {
    const int base = f * tpf + layout.n_special();
    if (mode == SalientMode::fixed_stride) {
      const int stride = std::max(1, int(std::floor(1.0 / fraction)));
      int taken = 0;
      for (int p = 0; p < n_patches && taken < target; p += stride, ++taken)
        out.push_back(base + p);
    } else {
      std::vector<std::pair<double, int>> norms(n_patches);
      for (int p = 0; p < n_patches; ++p) {
        const Real* row = seq.features.row(base + p);
        double acc = 0.0;
        for (int j = 0; j < seq.dim(); ++j) acc += double(row[j]) * double(row[j]);
        norms[p] = {acc, p};
      }
      std::sort(norms.begin(), norms.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      const int k = std::min(target, n_patches);
      std::vector<int> picked(k);
      for (int i = 0; i < k; ++i) picked[i] = base + norms[i].second;
      std::sort(picked.begin(), picked.end());
      out.insert(out.end(), picked.begin(), picked.end());
    }
  }
  return out;
}

Partition partition_uniform_region(const TokenSequence& seq, int k,
                                   const std::vector<int>& reference,
                                   const std::vector<int>& salient, uint64_t seed) {
  if (k < 1) throw ConfigError("region stride must be >= 1");
  const FrameLayout& layout = seq.layout;
  const int tpf = layout.tokens_per_frame();
  const int n = seq.total_tokens();
  std::vector<uint8_t> roles(n, UNSET);
  for (int i : reference) roles[i] = DST;
  for (int i : salient)
    if (roles[i] == UNSET) roles[i] = SALIENT;

  // Special tokens without an explicit role: frame 0 anchors stay dst,
  // later frames are protected as salient (they have no grid cell).
  for (int f = 0; f < seq.n_frames; ++f)
    for (int p = 0; p < layout.n_special(); ++p) {
      const int g = f * tpf + p;
      if (roles[g] == UNSET) roles[g] = (f == 0) ? DST : SALIENT;
    }

  // Frame-0 patch tokens are never region-sampled.
  for (int p = 0; p < layout.n_patches(); ++p) {
    const int g = layout.n_special() + p;
    if (roles[g] == UNSET) roles[g] = DST;
  }

  const int cells_h = (layout.grid_h + k - 1) / k;
  const int cells_w = (layout.grid_w + k - 1) / k;
  std::vector<int> cell;
  for (int f = 1; f < seq.n_frames; ++f) {
    Rng rng(mix_seed(seed, uint64_t(f)));
    const int base = f * tpf + layout.n_special();
    for (int cr = 0; cr < cells_h; ++cr)
      for (int cc = 0; cc < cells_w; ++cc) {
        cell.clear();
        const int r1 = std::min(layout.grid_h, (cr + 1) * k);
        const int c1 = std::min(layout.grid_w, (cc + 1) * k);
        for (int r = cr * k; r < r1; ++r)
          for (int c = cc * k; c < c1; ++c) {
            const int g = base + r * layout.grid_w + c;
            if (roles[g] == UNSET) cell.push_back(g);
          }
        if (cell.empty()) continue;
        const int pick = int(rng.bounded(cell.size()));
        for (int i = 0; i < int(cell.size()); ++i)
          roles[cell[i]] = (i == pick) ? DST : SRC;
      }
  }
  return roles_to_partition(roles);
}

Partition build_partition(const TokenSequence& seq, const MergeConfig& cfg) {
  validate(cfg);
  switch (cfg.strategy) {
    case Strategy::random_baseline:
      return partition_random(seq, cfg.merge_ratio, cfg.seed);
    case Strategy::fixed_stride_baseline:
      return partition_fixed_stride(seq, cfg.stride);
    case Strategy::fastvggt: {
      std::vector<int> ref =
          cfg.use_reference ? select_reference(seq) : std::vector<int>{};
      std::vector<int> sal =
          cfg.use_salient ? select_salient(seq, cfg.salient_mode, cfg.salient_fraction,
                                           mix_seed(cfg.seed, 1))
                          : std::vector<int>{};
      return partition_uniform_region(seq, cfg.region_stride, ref, sal,
                                      mix_seed(cfg.seed, 2));
    }
  }
  throw ConfigError("unknown strategy");
}

std::string partition_to_json(const Partition& p) {
  nlohmann::json j;
  j["salient"] = p.salient;
  j["dst"] = p.dst;
  j["src"] = p.src;
  return j.dump(2);
}

}  // namespace tokmerge
