#pragma once

#include <string>
#include <vector>

#include "partitioner.hpp"

namespace tokmerge {

// Invertible record of one merge step. kept_order lists the surviving global
// indices (salient + dst) in ascending order; reduced-sequence row i holds
// token kept_order[i].
struct MergeMap {
  int n_tokens = 0;
  std::vector<int> src_indices;  // ascending global src indices
  std::vector<int> assignment;   // per src_indices entry: matched dst global index
  std::vector<int> kept_order;
  std::vector<int> group_sizes;  // per kept row: 1 + number of assigned src
  std::vector<int> kept_row;     // global index -> reduced row, -1 for src
};

// Assign every src token to its highest-cosine-similarity dst token.
// Similarities are evaluated in double precision; ties break to the lowest
// dst index. Salient tokens sit on neither side of the matching.
MergeMap match(const TokenSequence& seq, const Partition& p);

// Reduce features to kept_order rows. Each dst row becomes the uniform mean
// of itself and its assigned src rows (double accumulation); rows with no
// assigned src pass through bitwise. pairwise=true instead folds src rows in
// ascending order via x_d = (x_d + x_s)/2.
Matrix merge(const Matrix& features, const MergeMap& map, bool pairwise = false);

// Restore full resolution: each src position receives a copy of its dst's row.
Matrix unmerge(const Matrix& reduced, const MergeMap& map);

std::string merge_map_to_json(const MergeMap& map);

}  // namespace tokmerge
