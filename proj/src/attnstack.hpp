#pragma once

#include <map>
#include <set>

#include "mergecore.hpp"
#include "report.hpp"

namespace tokmerge {

struct ModelConfig {
  int n_blocks = 24;
  int dim = 64;
  int n_heads = 4;
  std::vector<int> keep_layers = {4, 11, 17, 23};
  uint64_t weight_seed = 0;

  int head_dim() const { return dim / n_heads; }
};

void validate(const ModelConfig& m);

struct AttnWeights {
  Matrix wq, wk, wv, wo;  // each dim x dim
};

struct BlockWeights {
  AttnWeights frame;
  AttnWeights global;
};

std::vector<BlockWeights> make_weights(const ModelConfig& m);

// Optional capture of per-head attention matrices (rows x rows each).
struct AttnCapture {
  std::vector<Matrix> head_attn;
};

// Multi-head softmax attention over the given rows, WITHOUT the residual.
// attn_core_flops, when non-null, accumulates the QK^T + attn*V matmul FLOPs.
Matrix attention_core(const Matrix& x, const AttnWeights& w, int n_heads,
                      uint64_t* attn_core_flops = nullptr, AttnCapture* capture = nullptr);

// Attention within each frame span independently, plus residual.
TokenSequence frame_attention(const TokenSequence& seq, const AttnWeights& w, int n_heads);

// Attention over all tokens jointly, plus residual.
TokenSequence global_attention_dense(const TokenSequence& seq, const AttnWeights& w,
                                     int n_heads, AttnCapture* capture = nullptr);

struct MergeStats {
  double overhead_ns = 0.0;
  uint64_t overhead_flops = 0;
  double attn_ns = 0.0;
  uint64_t attn_flops = 0;
  uint64_t attn_core_flops = 0;
  int tokens_before = 0;
  int tokens_after = 0;
};

struct MergeCache {
  bool valid = false;
  Partition partition;
  MergeMap map;
};

// partition -> match -> merge -> attention on reduced rows -> unmerge ->
// residual. Blocks below cfg.start_block take the dense path.
TokenSequence global_attention_merged(const TokenSequence& seq, const AttnWeights& w,
                                      int n_heads, const MergeConfig& cfg, int block_idx,
                                      MergeStats* stats = nullptr,
                                      MergeCache* cache = nullptr);

enum class Mode { dense, merged };

struct ForwardHooks {
  std::set<int> capture_blocks;  // global-attention maps to capture (dense mode)
  std::map<int, std::vector<Matrix>> captured;  // block -> per-head attention
};

struct ForwardResult {
  std::map<int, Matrix> kept_outputs;  // block index -> output features
  ProfileReport report;
};

ForwardResult forward(const TokenSequence& seq, const ModelConfig& model,
                      const MergeConfig& cfg, Mode mode, ForwardHooks* hooks = nullptr);

}  // namespace tokmerge
