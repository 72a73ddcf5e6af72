#include "mergecore.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "json.hpp"

namespace tokmerge {

MergeMap match(const TokenSequence& seq, const Partition& p) {
  const int n = seq.total_tokens();
  MergeMap map;
  map.n_tokens = n;
  map.src_indices = p.src;
  std::sort(map.src_indices.begin(), map.src_indices.end());
  if (!map.src_indices.empty() && p.dst.empty())
    throw PartitionError("match: src tokens present but no dst tokens");

  std::vector<int> dst_sorted = p.dst;
  std::sort(dst_sorted.begin(), dst_sorted.end());

  const int c = seq.dim();
  // Precomputed norms; per-pair arithmetic stays identical to cosine_sim
  // (same accumulation order, same dot/(nx*ny) expression).
  auto row_norm = [&](int i) {
    const Real* x = seq.features.row(i);
    double acc = 0.0;
    for (int k = 0; k < c; ++k) acc += double(x[k]) * double(x[k]);
    return std::sqrt(acc);
  };
  std::vector<double> dst_norm(dst_sorted.size());
  for (size_t di = 0; di < dst_sorted.size(); ++di) dst_norm[di] = row_norm(dst_sorted[di]);

  map.assignment.resize(map.src_indices.size());
  for (size_t si = 0; si < map.src_indices.size(); ++si) {
    const Real* xs = seq.features.row(map.src_indices[si]);
    const double nx = row_norm(map.src_indices[si]);
    double best = -2.0;
    int best_dst = -1;
    for (size_t di = 0; di < dst_sorted.size(); ++di) {
      const Real* xd = seq.features.row(dst_sorted[di]);
      double sim;
      if (nx < 1e-12 || dst_norm[di] < 1e-12) {
        sim = 0.0;
      } else {
        double dot = 0.0;
        for (int k = 0; k < c; ++k) dot += double(xs[k]) * double(xd[k]);
        sim = dot / (nx * dst_norm[di]);
      }
      if (sim > best) {  // strict: ties keep the lowest dst index
        best = sim;
        best_dst = dst_sorted[di];
      }
    }
    map.assignment[si] = best_dst;
  }

  map.kept_row.assign(n, -1);
  std::vector<uint8_t> is_src(n, 0);
  for (int s : map.src_indices) is_src[s] = 1;
  for (int i = 0; i < n; ++i)
    if (!is_src[i]) {
      map.kept_row[i] = int(map.kept_order.size());
      map.kept_order.push_back(i);
    }
  map.group_sizes.assign(map.kept_order.size(), 1);
  for (int d : map.assignment) map.group_sizes[map.kept_row[d]] += 1;
  return map;
}

Matrix merge(const Matrix& features, const MergeMap& map, bool pairwise) {
  if (features.rows != map.n_tokens) throw ShapeError("merge: row count mismatch");
  const int c = features.cols;
  Matrix out(int(map.kept_order.size()), c);

  if (pairwise) {
    for (size_t i = 0; i < map.kept_order.size(); ++i)
      std::memcpy(out.row(int(i)), features.row(map.kept_order[i]),
                  size_t(c) * sizeof(Real));
    for (size_t si = 0; si < map.src_indices.size(); ++si) {
      Real* d = out.row(map.kept_row[map.assignment[si]]);
      const Real* s = features.row(map.src_indices[si]);
      for (int j = 0; j < c; ++j) d[j] = (d[j] + s[j]) / Real(2);
    }
    return out;
  }

  for (size_t i = 0; i < map.kept_order.size(); ++i) {
    const int g = map.group_sizes[i];
    if (g == 1) {  // untouched rows pass through bitwise
      std::memcpy(out.row(int(i)), features.row(map.kept_order[i]),
                  size_t(c) * sizeof(Real));
    }
  }
  // Double accumulators only for rows that actually absorb src tokens.
  std::vector<int> acc_slot(map.kept_order.size(), -1);
  int n_multi = 0;
  for (size_t i = 0; i < map.kept_order.size(); ++i)
    if (map.group_sizes[i] > 1) acc_slot[i] = n_multi++;
  std::vector<double> acc(size_t(n_multi) * c, 0.0);
  for (size_t i = 0; i < map.kept_order.size(); ++i) {
    if (acc_slot[i] < 0) continue;
    const Real* d = features.row(map.kept_order[i]);
    double* a = acc.data() + size_t(acc_slot[i]) * c;
    for (int j = 0; j < c; ++j) a[j] = double(d[j]);
  }
  for (size_t si = 0; si < map.src_indices.size(); ++si) {
    const int row = map.kept_row[map.assignment[si]];
    double* a = acc.data() + size_t(acc_slot[row]) * c;
    const Real* s = features.row(map.src_indices[si]);
    for (int j = 0; j < c; ++j) a[j] += double(s[j]);
  }
  for (size_t i = 0; i < map.kept_order.size(); ++i) {
    if (acc_slot[i] < 0) continue;
    const double* a = acc.data() + size_t(acc_slot[i]) * c;
    Real* outrow = out.row(int(i));
    const double inv = 1.0 / map.group_sizes[i];
    for (int j = 0; j < c; ++j) outrow[j] = Real(a[j] * inv);
  }
  return out;
}

Matrix unmerge(const Matrix& reduced, const MergeMap& map) {
  if (reduced.rows != int(map.kept_order.size()))
    throw ShapeError("unmerge: reduced row count does not match map");
  const int c = reduced.cols;
  Matrix out(map.n_tokens, c);
  for (size_t i = 0; i < map.kept_order.size(); ++i)
    std::memcpy(out.row(map.kept_order[i]), reduced.row(int(i)),
                size_t(c) * sizeof(Real));
  for (size_t si = 0; si < map.src_indices.size(); ++si)
    std::memcpy(out.row(map.src_indices[si]),
                reduced.row(map.kept_row[map.assignment[si]]),
                size_t(c) * sizeof(Real));
  return out;
}

std::string merge_map_to_json(const MergeMap& map) {
  nlohmann::json j;
  nlohmann::json pairs = nlohmann::json::array();
  for (size_t i = 0; i < map.src_indices.size(); ++i)
    pairs.push_back({map.src_indices[i], map.assignment[i]});
  j["assignment"] = pairs;
  nlohmann::json groups = nlohmann::json::object();
  for (size_t i = 0; i < map.kept_order.size(); ++i)
    if (map.group_sizes[i] > 1)
      groups[std::to_string(map.kept_order[i])] = map.group_sizes[i];
  j["group_sizes"] = groups;
  j["kept_order"] = map.kept_order;
  return j.dump(2);
}

}  // namespace tokmerge
