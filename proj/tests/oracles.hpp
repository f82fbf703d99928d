#pragma once
// Brute-force reference implementations used only by the tests. They share
// no code with the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// k nearest neighbors by full sort of (distance, index).
inline std::vector<std::vector<int>> knn(const Eigen::MatrixXd& x, int k) {
  const int n = static_cast<int>(x.rows());
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> d;
    for (int m = 0; m < n; ++m)
      if (m != i) d.emplace_back((x.row(i) - x.row(m)).squaredNorm(), m);
    std::sort(d.begin(), d.end());
    for (int q = 0; q < k; ++q) out[static_cast<std::size_t>(i)].push_back(d[static_cast<std::size_t>(q)].second);
  }
  return out;
}

// Mutual kNN with at least one shared neighbor, then the fallback that tops
// every sample up to j edges with its nearest neighbors.
inline std::vector<std::pair<int, int>> snn_positives(const Eigen::MatrixXd& x, int k, int j) {
  const auto nb = knn(x, k);
  const int n = static_cast<int>(x.rows());
  auto in = [&](int a, int b) {
    const auto& l = nb[static_cast<std::size_t>(a)];
    return std::find(l.begin(), l.end(), b) != l.end();
  };
  std::set<std::pair<int, int>> edges;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      if (!in(a, b) || !in(b, a)) continue;
      bool shared = false;
      for (int c : nb[static_cast<std::size_t>(a)])
        if (in(b, c)) shared = true;
      if (shared) edges.insert({a, b});
    }
  std::vector<int> degree(static_cast<std::size_t>(n), 0);
  for (const auto& [a, b] : edges) {
    ++degree[static_cast<std::size_t>(a)];
    ++degree[static_cast<std::size_t>(b)];
  }
  for (int a = 0; a < n; ++a) {
    for (int c : nb[static_cast<std::size_t>(a)]) {
      if (degree[static_cast<std::size_t>(a)] >= j) break;
      const std::pair<int, int> e{std::min(a, c), std::max(a, c)};
      if (edges.insert(e).second) {
        ++degree[static_cast<std::size_t>(a)];
        ++degree[static_cast<std::size_t>(c)];
      }
    }
  }
  return {edges.begin(), edges.end()};
}

// Exact Shapley values by enumerating all 2^D coalitions with the
// interventional value v(S) = mean_b f(x_S, b_~S).
inline Eigen::VectorXd shapley_bruteforce(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, const Eigen::MatrixXd& background) {
  const int d = static_cast<int>(x.size());
  const std::uint32_t full = (1u << d);
  std::vector<double> v(full, 0.0);
  for (std::uint32_t s = 0; s < full; ++s) {
    double sum = 0.0;
    for (Eigen::Index b = 0; b < background.rows(); ++b) {
      Eigen::VectorXd z = background.row(b).transpose();
      for (int i = 0; i < d; ++i)
        if (s & (1u << i)) z[i] = x[i];
      sum += f(z);
    }
    v[s] = sum / static_cast<double>(background.rows());
  }
  std::vector<double> fact(static_cast<std::size_t>(d + 1), 1.0);
  for (int i = 1; i <= d; ++i) fact[static_cast<std::size_t>(i)] = fact[static_cast<std::size_t>(i - 1)] * i;
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < d; ++i)
    for (std::uint32_t s = 0; s < full; ++s) {
      if (s & (1u << i)) continue;
      const int size = __builtin_popcount(s);
      const double w = fact[static_cast<std::size_t>(size)] * fact[static_cast<std::size_t>(d - size - 1)] /
                       fact[static_cast<std::size_t>(d)];
      phi[i] += w * (v[s | (1u << i)] - v[s]);
    }
  return phi;
}

// Adjusted Rand index from pair counting over all O(N^2) pairs.
inline double ari_pairs(const std::vector<int>& a, const std::vector<int>& b) {
  double both = 0, only_a = 0, only_b = 0, total = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t m = i + 1; m < a.size(); ++m) {
      const bool sa = a[i] == a[m];
      const bool sb = b[i] == b[m];
      both += sa && sb;
      only_a += sa;
      only_b += sb;
      total += 1;
    }
  const double expected = only_a * only_b / total;
  const double max_index = 0.5 * (only_a + only_b);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

// Accuracy under the best label bijection, by trying every permutation.
inline double accuracy_permutations(const std::vector<int>& pred, const std::vector<int>& truth, int k) {
  std::vector<int> perm(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) perm[static_cast<std::size_t>(i)] = i;
  double best = 0;
  do {
    double hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += perm[static_cast<std::size_t>(pred[i])] == truth[i];
    best = std::max(best, hits / static_cast<double>(pred.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Fresh directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("den_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
