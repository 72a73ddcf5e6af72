#include "numkernel.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace tokmerge {

namespace {
std::atomic<uint64_t> g_flops{0};
int g_threads = 1;
}  // namespace

uint64_t flop_count() { return g_flops.load(std::memory_order_relaxed); }
void reset_flop_count() { g_flops.store(0, std::memory_order_relaxed); }

void set_kernel_threads(int n) { g_threads = n < 1 ? 1 : n; }
int kernel_threads() { return g_threads; }

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

uint64_t mix_seed(uint64_t a, uint64_t b) {
  return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ull));
}

uint64_t Rng::bounded(uint64_t n) {
  if (n == 0) return 0;
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t r;
  do {
    r = next();
  } while (r >= limit);
  return r % n;
}

namespace {

void matmul_rows(const Matrix& a, const Matrix& b, Matrix& c, int i0, int i1) {
  const int k_dim = a.cols;
  const int n = b.cols;
  for (int i = i0; i < i1; ++i) {
    Real* crow = c.row(i);
    const Real* arow = a.row(i);
    for (int k = 0; k < k_dim; ++k) {
      const Real aik = arow[k];
      const Real* brow = b.row(k);
      for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

void matmul_nt_rows(const Matrix& a, const Matrix& b, Matrix& c, int i0, int i1) {
  const int k_dim = a.cols;
  const int n = b.rows;
  for (int i = i0; i < i1; ++i) {
    Real* crow = c.row(i);
    const Real* arow = a.row(i);
    for (int j = 0; j < n; ++j) {
      const Real* brow = b.row(j);
      Real acc = 0;
      for (int k = 0; k < k_dim; ++k) acc += arow[k] * brow[k];
      crow[j] = acc;
    }
  }
}

template <typename Fn>
void run_row_parallel(int rows, uint64_t work, Fn fn) {
  const int threads = g_threads;
  if (threads <= 1 || rows < 2 * threads || work < (1ull << 20)) {
    fn(0, rows);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (rows + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int i0 = t * chunk;
    const int i1 = std::min(rows, i0 + chunk);
    if (i0 >= i1) break;
    pool.emplace_back([=] { fn(i0, i1); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions differ");
  Matrix c(a.rows, b.cols);
  const uint64_t work = 2ull * a.rows * a.cols * b.cols;
  run_row_parallel(a.rows, work,
                   [&](int i0, int i1) { matmul_rows(a, b, c, i0, i1); });
  g_flops.fetch_add(work, std::memory_order_relaxed);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw ShapeError("matmul_nt: column counts differ");
  Matrix c(a.rows, b.rows);
  const uint64_t work = 2ull * a.rows * a.cols * b.rows;
  run_row_parallel(a.rows, work,
                   [&](int i0, int i1) { matmul_nt_rows(a, b, c, i0, i1); });
  g_flops.fetch_add(work, std::memory_order_relaxed);
  return c;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    const Real* x = m.row(i);
    Real* y = out.row(i);
    Real mx = x[0];
    for (int j = 1; j < m.cols; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      const double e = std::exp(double(x[j]) - double(mx));
      y[j] = Real(e);
      sum += e;
    }
    const Real inv = Real(1.0 / sum);
    for (int j = 0; j < m.cols; ++j) y[j] *= inv;
  }
  return out;
}

double cosine_sim(const Real* x, const Real* y, int n) {
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (int k = 0; k < n; ++k) {
    dot += double(x[k]) * double(y[k]);
    nx += double(x[k]) * double(x[k]);
    ny += double(y[k]) * double(y[k]);
  }
  nx = std::sqrt(nx);
  ny = std::sqrt(ny);
  if (nx < 1e-12 || ny < 1e-12) return 0.0;
  return dot / (nx * ny);
}

double cosine_sim(const std::vector<Real>& x, const std::vector<Real>& y) {
  if (x.size() != y.size()) throw ShapeError("cosine_sim: length mismatch");
  return cosine_sim(x.data(), y.data(), static_cast<int>(x.size()));
}

Matrix prng_matrix(int rows, int cols, uint64_t seed) {
  Matrix m(rows, cols);
  const double scale = std::sqrt(3.0 / cols);  // uniform on [-a,a], var = a^2/3
  const uint64_t base = splitmix64(seed ^ 0xA0761D6478BD642Full);
  for (size_t i = 0; i < m.size(); ++i) {
    const uint64_t h = splitmix64(base + i);
    const double u = double(h >> 11) * 0x1.0p-53;  // [0,1)
    m.data[i] = Real((2.0 * u - 1.0) * scale);
  }
  return m;
}

}  // namespace tokmerge
