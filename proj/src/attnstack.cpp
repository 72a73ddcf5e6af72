#include "attnstack.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>

namespace tokmerge {

namespace {

double now_ns() {
  return double(std::chrono::duration_cast<std::chrono::nanoseconds>(
                    std::chrono::steady_clock::now().time_since_epoch())
                    .count());
}

Matrix head_slice(const Matrix& m, int head, int head_dim) {
  Matrix out(m.rows, head_dim);
  const int off = head * head_dim;
  for (int i = 0; i < m.rows; ++i)
    std::memcpy(out.row(i), m.row(i) + off, size_t(head_dim) * sizeof(Real));
  return out;
}

}  // namespace

void validate(const ModelConfig& m) {
  if (m.n_blocks < 1) throw ConfigError("n_blocks must be >= 1");
  if (m.n_heads < 1 || m.dim % m.n_heads != 0)
    throw ConfigError("dim must be divisible by n_heads");
  for (int k : m.keep_layers)
    if (k < 0 || k >= m.n_blocks) throw ConfigError("keep_layers entry out of range");
}

std::vector<BlockWeights> make_weights(const ModelConfig& m) {
  // Output projections are scaled by 1/sqrt(2L) so a depth-L residual stack
  // stays well-conditioned; untrained unit-scale weights would make block
  // dynamics expansive and drown perturbation measurements.
  const Real out_scale = Real(1.0 / std::sqrt(2.0 * m.n_blocks));
  std::vector<BlockWeights> w(m.n_blocks);
  for (int b = 0; b < m.n_blocks; ++b) {
    const uint64_t base = mix_seed(m.weight_seed, uint64_t(b));
    auto gen = [&](int tag) { return prng_matrix(m.dim, m.dim, mix_seed(base, tag)); };
    auto gen_out = [&](int tag) {
      Matrix out = prng_matrix(m.dim, m.dim, mix_seed(base, tag));
      for (Real& v : out.data) v *= out_scale;
      return out;
    };
    w[b].frame = {gen(0), gen(1), gen(2), gen_out(3)};
    w[b].global = {gen(4), gen(5), gen(6), gen_out(7)};
  }
  return w;
}

Matrix attention_core(const Matrix& x, const AttnWeights& w, int n_heads,
                      uint64_t* attn_core_flops, AttnCapture* capture) {
  if (x.cols != w.wq.rows) throw ShapeError("attention_core: feature dim mismatch");
  const int n = x.rows;
  const int c = x.cols;
  const int head_dim = c / n_heads;
  const Real scale = Real(1.0 / std::sqrt(double(head_dim)));

  Matrix q = matmul(x, w.wq);
  Matrix k = matmul(x, w.wk);
  Matrix v = matmul(x, w.wv);

  Matrix concat(n, c);
  for (int h = 0; h < n_heads; ++h) {
    Matrix qh = head_slice(q, h, head_dim);
    Matrix kh = head_slice(k, h, head_dim);
    Matrix vh = head_slice(v, h, head_dim);

    const uint64_t f0 = flop_count();
    Matrix scores = matmul_nt(qh, kh);
    for (Real& s : scores.data) s *= scale;
    Matrix attn = softmax_rows(scores);
    if (capture) capture->head_attn.push_back(attn);
    Matrix oh = matmul(attn, vh);
    if (attn_core_flops) *attn_core_flops += flop_count() - f0;

    const int off = h * head_dim;
    for (int i = 0; i < n; ++i)
      std::memcpy(concat.row(i) + off, oh.row(i), size_t(head_dim) * sizeof(Real));
  }
  return matmul(concat, w.wo);
}

TokenSequence frame_attention(const TokenSequence& seq, const AttnWeights& w, int n_heads) {
  const int tpf = seq.layout.tokens_per_frame();
  const int c = seq.dim();
  TokenSequence out = seq;
  Matrix frame(tpf, c);
  for (int f = 0; f < seq.n_frames; ++f) {
    std::memcpy(frame.data.data(), seq.features.row(f * tpf),
                size_t(tpf) * c * sizeof(Real));
    Matrix y = attention_core(frame, w, n_heads);
    for (int i = 0; i < tpf; ++i) {
      Real* o = out.features.row(f * tpf + i);
      const Real* r = y.row(i);
      for (int j = 0; j < c; ++j) o[j] += r[j];
    }
  }
  return out;
}

TokenSequence global_attention_dense(const TokenSequence& seq, const AttnWeights& w,
                                     int n_heads, AttnCapture* capture) {
  TokenSequence out = seq;
  Matrix y = attention_core(seq.features, w, n_heads, nullptr, capture);
  for (size_t i = 0; i < out.features.size(); ++i) out.features.data[i] += y.data[i];
  return out;
}

TokenSequence global_attention_merged(const TokenSequence& seq, const AttnWeights& w,
                                      int n_heads, const MergeConfig& cfg, int block_idx,
                                      MergeStats* stats, MergeCache* cache) {
  const int n = seq.total_tokens();
  if (block_idx < cfg.start_block) {
    uint64_t core = 0;
    const uint64_t f0 = flop_count();
    const double t0 = now_ns();
    TokenSequence out = seq;
    Matrix y = attention_core(seq.features, w, n_heads, &core);
    for (size_t i = 0; i < out.features.size(); ++i) out.features.data[i] += y.data[i];
    if (stats) {
      stats->attn_ns = now_ns() - t0;
      stats->attn_flops = flop_count() - f0;
      stats->attn_core_flops = core;
      stats->tokens_before = n;
      stats->tokens_after = n;
    }
    return out;
  }

  const double t0 = now_ns();
  const uint64_t f0 = flop_count();
  Partition partition;
  MergeMap map;
  if (cache && cache->valid) {
    partition = cache->partition;
    map = cache->map;
  } else {
    MergeConfig block_cfg = cfg;
    block_cfg.seed = cfg.reuse_partition ? cfg.seed : mix_seed(cfg.seed, uint64_t(block_idx));
    partition = build_partition(seq, block_cfg);
    map = match(seq, partition);
    if (cache && cfg.reuse_partition) {
      cache->partition = partition;
      cache->map = map;
      cache->valid = true;
    }
  }
  Matrix reduced = merge(seq.features, map, cfg.pairwise_merge);
  const double t1 = now_ns();
  const uint64_t f1 = flop_count();

  uint64_t core = 0;
  Matrix y_reduced = attention_core(reduced, w, n_heads, &core);
  const double t2 = now_ns();
  const uint64_t f2 = flop_count();

  Matrix y = unmerge(y_reduced, map);
  TokenSequence out = seq;
  for (size_t i = 0; i < out.features.size(); ++i) out.features.data[i] += y.data[i];
  const double t3 = now_ns();

  if (stats) {
    stats->overhead_ns = (t1 - t0) + (t3 - t2);
    stats->overhead_flops = (f1 - f0) + (flop_count() - f2);
    stats->attn_ns = t2 - t1;
    stats->attn_flops = f2 - f1;
    stats->attn_core_flops = core;
    stats->tokens_before = n;
    stats->tokens_after = reduced.rows;
  }
  return out;
}

ForwardResult forward(const TokenSequence& seq, const ModelConfig& model,
                      const MergeConfig& cfg, Mode mode, ForwardHooks* hooks) {
  validate(model);
  validate(cfg);
  if (seq.dim() != model.dim) throw ShapeError("forward: sequence dim != model dim");

  const std::vector<BlockWeights> weights = make_weights(model);
  std::set<int> keep(model.keep_layers.begin(), model.keep_layers.end());

  ForwardResult result;
  result.report.mode = mode == Mode::dense ? "dense" : "merged";
  result.report.kernel_threads = kernel_threads();
  result.report.blocks.resize(model.n_blocks);

  const uint64_t pass_f0 = flop_count();
  const double pass_t0 = now_ns();

  // Retained buffers hold shared ownership; the live-buffer instrument counts
  // distinct matrices (retained set + current input + output in flight).
  std::map<int, std::shared_ptr<const Matrix>> retained;
  auto cur = std::make_shared<Matrix>(seq.features);
  bool input_retained = false;
  int peak = 0;

  MergeCache cache;
  TokenSequence work;
  work.layout = seq.layout;
  work.n_frames = seq.n_frames;

  for (int b = 0; b < model.n_blocks; ++b) {
    const int live = int(retained.size()) + (input_retained ? 0 : 1) + 1;
    peak = std::max(peak, live);

    BlockProfile& bp = result.report.blocks[b];
    work.features = *cur;

    const double t0 = now_ns();
    const uint64_t f0 = flop_count();
    TokenSequence after_frame = frame_attention(work, weights[b].frame, model.n_heads);
    const double t1 = now_ns();
    bp.frame_attn.time_ns = t1 - t0;
    bp.frame_attn.flops = flop_count() - f0;

    TokenSequence after_global;
    if (mode == Mode::dense) {
      const uint64_t f1 = flop_count();
      AttnCapture capture;
      const bool want_capture = hooks && hooks->capture_blocks.count(b);
      uint64_t core = 0;
      Matrix y = attention_core(after_frame.features, weights[b].global, model.n_heads,
                                &core, want_capture ? &capture : nullptr);
      after_global = after_frame;
      for (size_t i = 0; i < after_global.features.size(); ++i)
        after_global.features.data[i] += y.data[i];
      bp.global_attn.time_ns = now_ns() - t1;
      bp.global_attn.flops = flop_count() - f1;
      bp.attn_core_flops = core;
      bp.tokens_before = seq.total_tokens();
      bp.tokens_after = seq.total_tokens();
      if (want_capture) hooks->captured[b] = std::move(capture.head_attn);
    } else {
      MergeStats ms;
      after_global = global_attention_merged(after_frame, weights[b].global,
                                             model.n_heads, cfg, b, &ms, &cache);
      bp.global_attn.time_ns = ms.attn_ns;
      bp.global_attn.flops = ms.attn_flops;
      bp.merge_overhead.time_ns = ms.overhead_ns;
      bp.merge_overhead.flops = ms.overhead_flops;
      bp.attn_core_flops = ms.attn_core_flops;
      bp.tokens_before = ms.tokens_before;
      bp.tokens_after = ms.tokens_after;
    }

    cur = std::make_shared<Matrix>(std::move(after_global.features));
    input_retained = keep.count(b) > 0;
    if (input_retained) retained[b] = cur;
  }

  result.report.total_time_ns = now_ns() - pass_t0;
  result.report.total_flops = flop_count() - pass_f0;
  result.report.peak_retained_buffers = peak;

  for (auto& [b, m] : retained) result.kept_outputs[b] = *m;
  return result;
}

}  // namespace tokmerge
