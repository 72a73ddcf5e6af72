#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tokmerge {

struct ComponentStats {
  double time_ns = 0.0;
  uint64_t flops = 0;
};

struct BlockProfile {
  ComponentStats frame_attn;
  ComponentStats global_attn;
  ComponentStats merge_overhead;
  // QK^T + attn*V matmul FLOPs only; the term the (M/N)^2 law governs.
  uint64_t attn_core_flops = 0;
  int tokens_before = 0;  // N entering global attention
  int tokens_after = 0;   // M actually attended (== N in dense mode)
};

struct ProfileReport {
  std::vector<BlockProfile> blocks;
  double total_time_ns = 0.0;
  uint64_t total_flops = 0;
  int peak_retained_buffers = 0;
  int kernel_threads = 1;
  std::string mode;         // "dense" | "merged"
  std::string config_echo;  // key=value lines describing the run

  double component_time(const char* which) const;
  uint64_t attn_core_flops_total() const;
};

}  // namespace tokmerge
