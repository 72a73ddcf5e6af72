#pragma once

#include <cstdint>
#include <vector>

#include "errors.hpp"

namespace tokmerge {

#ifdef TOKMERGE_REAL_IS_DOUBLE
using Real = double;
#else
using Real = float;
#endif

// Dense row-major matrix. All kernels below leave every entry finite.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<Real> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, Real(0)) {}

  Real* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const Real* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
  Real& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  Real at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }
  size_t size() const { return data.size(); }
};

// Process-global matmul FLOP counter (2*m*k*n per product). Atomic; softmax
// and normalization work is deliberately not counted.
uint64_t flop_count();
void reset_flop_count();

// Number of worker threads matmul may use. 1 = fully sequential. Results are
// bit-identical for any thread count (rows are independent).
void set_kernel_threads(int n);
int kernel_threads();

// c = a * b
Matrix matmul(const Matrix& a, const Matrix& b);

// c = a * b^T where a and b have the same column count.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// Row-wise softmax, stabilized by row-max subtraction.
Matrix softmax_rows(const Matrix& m);

// Cosine similarity accumulated in double precision regardless of Real width,
// so that matching decisions are reproducible across platforms. Returns 0 when
// either norm is below 1e-12.
double cosine_sim(const Real* x, const Real* y, int n);
double cosine_sim(const std::vector<Real>& x, const std::vector<Real>& y);

// Deterministic counter-based generator (splitmix64 per element). Values are
// uniform with mean 0 and standard deviation 1/sqrt(cols); identical output
// for identical (rows, cols, seed) on every platform.
Matrix prng_matrix(int rows, int cols, uint64_t seed);

// splitmix64 step, also used to derive per-block / per-role seeds.
uint64_t mix_seed(uint64_t a, uint64_t b);
uint64_t splitmix64(uint64_t x);

// Small deterministic RNG for sampling decisions (not feature values).
struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed) : state(splitmix64(seed)) {}
  uint64_t next() {
    state += 0x9E3779B97F4A7C15ull;
    return splitmix64(state);
  }
  // uniform in [0, n), rejection-sampled so the result is platform independent
  uint64_t bounded(uint64_t n);
};

}  // namespace tokmerge
