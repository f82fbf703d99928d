#include "den/common.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace den {

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int threads) { g_threads = std::max(1, threads); }

int num_threads() { return g_threads; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(g_threads.load()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

Matrix pairwise_sq_dist(const Matrix& a, const Matrix& b) {
  // Direct differences rather than the |a|^2 + |b|^2 - 2ab expansion, so
  // duplicated points come out exactly zero.
  Matrix out(a.rows(), b.rows());
  parallel_for(static_cast<std::size_t>(a.rows()), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < b.rows(); ++j) out(r, j) = (a.row(r) - b.row(j)).squaredNorm();
  });
  return out;
}

}  // namespace den
