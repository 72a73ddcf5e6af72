#include "analyzer.hpp"

#include <algorithm>

#include "json.hpp"

namespace tokmerge {

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * double(sorted.size() - 1);
  const size_t lo = size_t(pos);
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

SimilarityStats attention_row_similarity(const Matrix& attn, int sample_pairs,
                                         uint64_t seed) {
  if (attn.rows < 2)
    throw DegenerateInputError("attention_row_similarity: need at least 2 rows");
  std::vector<double> sims;
  if (attn.rows <= 512) {
    sims.reserve(size_t(attn.rows) * (attn.rows - 1) / 2);
    for (int i = 0; i < attn.rows; ++i)
      for (int j = i + 1; j < attn.rows; ++j)
        sims.push_back(cosine_sim(attn.row(i), attn.row(j), attn.cols));
  } else {
    Rng rng(mix_seed(seed, 0x70616972));
    sims.reserve(sample_pairs);
    for (int p = 0; p < sample_pairs; ++p) {
      const int i = int(rng.bounded(attn.rows));
      int j = int(rng.bounded(attn.rows - 1));
      if (j >= i) ++j;
      sims.push_back(cosine_sim(attn.row(i), attn.row(j), attn.cols));
    }
  }
  SimilarityStats s;
  s.pairs = int(sims.size());
  double sum = 0.0;
  for (double v : sims) sum += v;
  s.mean = sum / double(sims.size());
  std::sort(sims.begin(), sims.end());
  s.median = quantile(sims, 0.5);
  s.q25 = quantile(sims, 0.25);
  s.q75 = quantile(sims, 0.75);
  s.min = sims.front();
  s.max = sims.back();
  return s;
}

std::vector<double> frame0_attention_mass(const Matrix& attn, const FrameLayout& layout,
                                          int n_frames) {
  const int n = n_frames * layout.tokens_per_frame();
  if (attn.rows != n || attn.cols != n)
    throw ShapeError("frame0_attention_mass: attention must be NxN over all tokens");
  const int tpf = layout.tokens_per_frame();
  std::vector<double> mass(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const Real* row = attn.row(i);
    double acc = 0.0;
    for (int j = 0; j < tpf; ++j) acc += double(row[j]);
    mass[i] = acc;
  }
  return mass;
}

BlockRedundancy analyze_block(int block, const std::vector<Matrix>& head_attn,
                              const FrameLayout& layout, int n_frames, int sample_pairs,
                              uint64_t seed) {
  if (head_attn.empty()) throw DegenerateInputError("analyze_block: no attention maps");
  BlockRedundancy out;
  out.block = block;
  double mass_mean = 0.0, mass_min = 1.0, mass_max = 0.0;
  SimilarityStats acc;
  for (size_t h = 0; h < head_attn.size(); ++h) {
    const SimilarityStats s =
        attention_row_similarity(head_attn[h], sample_pairs, mix_seed(seed, h));
    acc.mean += s.mean;
    acc.median += s.median;
    acc.q25 += s.q25;
    acc.q75 += s.q75;
    acc.min += s.min;
    acc.max += s.max;
    acc.pairs = s.pairs;

    const std::vector<double> mass = frame0_attention_mass(head_attn[h], layout, n_frames);
    for (double m : mass) {
      mass_mean += m;
      mass_min = std::min(mass_min, m);
      mass_max = std::max(mass_max, m);
    }
  }
  const double nh = double(head_attn.size());
  acc.mean /= nh;
  acc.median /= nh;
  acc.q25 /= nh;
  acc.q75 /= nh;
  acc.min /= nh;
  acc.max /= nh;
  out.row_similarity = acc;
  out.frame0_mass_mean = mass_mean / (nh * double(head_attn[0].rows));
  out.frame0_mass_min = mass_min;
  out.frame0_mass_max = mass_max;
  return out;
}

std::string redundancy_to_json(const RedundancyReport& r) {
  nlohmann::json out = nlohmann::json::array();
  for (const BlockRedundancy& b : r.blocks) {
    out.push_back({{"block", b.block},
                   {"row_similarity",
                    {{"mean", b.row_similarity.mean},
                     {"median", b.row_similarity.median},
                     {"q25", b.row_similarity.q25},
                     {"q75", b.row_similarity.q75},
                     {"min", b.row_similarity.min},
                     {"max", b.row_similarity.max},
                     {"pairs", b.row_similarity.pairs}}},
                   {"frame0_mass_mean", b.frame0_mass_mean},
                   {"frame0_mass_min", b.frame0_mass_min},
                   {"frame0_mass_max", b.frame0_mass_max}});
  }
  return out.dump(2);
}

}  // namespace tokmerge
