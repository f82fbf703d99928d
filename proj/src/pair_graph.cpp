#include "den/pair_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace den {

KnnIndex build_knn(const Matrix& samples, int k) {
  const auto n = static_cast<int>(samples.rows());
  if (k < 1 || k >= n) throw std::invalid_argument("build_knn: need 1 <= k < N");
  KnnIndex out;
  out.neighbors.resize(n, k);
  out.distances.resize(n, k);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
    const auto i = static_cast<int>(row);
    std::vector<std::pair<double, int>> cand;
    cand.reserve(static_cast<std::size_t>(n - 1));
    for (int m = 0; m < n; ++m)
      if (m != i) cand.emplace_back((samples.row(i) - samples.row(m)).squaredNorm(), m);
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int c = 0; c < k; ++c) {
      out.neighbors(i, c) = cand[static_cast<std::size_t>(c)].second;
      out.distances(i, c) = std::sqrt(cand[static_cast<std::size_t>(c)].first);
    }
  });
  return out;
}

std::vector<IndexPair> build_positive_pairs(const KnnIndex& knn, int j) {
  const int n = knn.n();
  const int k = knn.k();
  if (j < 0 || j > k) throw std::invalid_argument("build_positive_pairs: need 0 <= j <= k");

  std::vector<std::vector<int>> lists(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& l = lists[static_cast<std::size_t>(i)];
    for (int c = 0; c < k; ++c) l.push_back(knn.neighbors(i, c));
    std::sort(l.begin(), l.end());
  }
  auto contains = [&](int a, int b) {
    const auto& l = lists[static_cast<std::size_t>(a)];
    return std::binary_search(l.begin(), l.end(), b);
  };
  auto shares = [&](int a, int b) {
    const auto& la = lists[static_cast<std::size_t>(a)];
    const auto& lb = lists[static_cast<std::size_t>(b)];
    auto ia = la.begin();
    auto ib = lb.begin();
    while (ia != la.end() && ib != lb.end()) {
      if (*ia == *ib) return true;
      if (*ia < *ib) ++ia; else ++ib;
    }
    return false;
  };

  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  std::vector<IndexPair> edges;
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < k; ++c) {
      const int m = knn.neighbors(i, c);
      if (m <= i) continue;  // each unordered pair examined once, from its lower end
      if (contains(m, i) && shares(i, m)) {
        edges.emplace_back(i, m);
        adj[static_cast<std::size_t>(i)].push_back(m);
        adj[static_cast<std::size_t>(m)].push_back(i);
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    auto& ai = adj[static_cast<std::size_t>(i)];
    for (int c = 0; c < k && static_cast<int>(ai.size()) < j; ++c) {
      const int m = knn.neighbors(i, c);
      if (std::find(ai.begin(), ai.end(), m) != ai.end()) continue;
      ai.push_back(m);
      adj[static_cast<std::size_t>(m)].push_back(i);
      edges.emplace_back(std::min(i, m), std::max(i, m));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<IndexPair> build_negative_pairs(const Matrix& samples, int k, const Rng& rng, int candidate_pool) {
  const auto n = static_cast<int>(samples.rows());
  const bool pooled = candidate_pool > 0 && candidate_pool < n - 1;
  const int pool_size = pooled ? candidate_pool : n - 1;
  if (k > pool_size) throw std::invalid_argument("build_negative_pairs: candidate pool smaller than k");
  std::vector<IndexPair> out(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
    const auto i = static_cast<int>(row);
    Rng local = rng.child("negatives", row);
    std::vector<int> cand;
    if (pooled) {
      // Pool drawn from the N - 1 other samples.
      for (int c : local.sample_without_replacement(n - 1, pool_size)) cand.push_back(c < i ? c : c + 1);
    } else {
      cand.reserve(static_cast<std::size_t>(n - 1));
      for (int m = 0; m < n; ++m)
        if (m != i) cand.push_back(m);
    }
    // Weighted sampling without replacement (Efraimidis-Spirakis): the k
    // largest keys log(u) / w are a draw of k items in proportion to w.
    // Zero-distance partners get key -inf and are taken only if needed.
    std::vector<std::pair<double, int>> keys;
    keys.reserve(cand.size());
    for (int m : cand) {
      const double w = (samples.row(i) - samples.row(m)).norm();
      const double u = local.uniform_open();
      const double key = w > 0.0 ? std::log(u) / w : -std::numeric_limits<double>::infinity();
      keys.emplace_back(key, m);
    }
    std::partial_sort(keys.begin(), keys.begin() + k, keys.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    for (int c = 0; c < k; ++c)
      out[row * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)] = {i, keys[static_cast<std::size_t>(c)].second};
  });
  return out;
}

PairGraph build_pair_graph(const Matrix& samples, const RunConfig& cfg, const Rng& rng) {
  const auto n = static_cast<int>(samples.rows());
  if (n < 2) throw DataError("pair graph needs at least 2 samples");
  const int k = std::min(cfg.k, n - 1);
  const int j = std::max(0, std::min(cfg.j, k - 1));
  PairGraph g;
  g.n_samples = n;
  g.positives = build_positive_pairs(build_knn(samples, k), std::max(j, 1));
  int pool = cfg.negative_pool;
  if (pool == 0 && n > kNegativePoolThreshold) pool = kNegativePoolThreshold;
  g.negatives = build_negative_pairs(samples, k, rng, pool);
  return g;
}

void write_pair_graph(const PairGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# n_samples " << graph.n_samples << "\n#positives\n";
  for (const auto& [a, b] : graph.positives) out << a << ' ' << b << '\n';
  out << "#negatives\n";
  for (const auto& [a, b] : graph.negatives) out << a << ' ' << b << '\n';
}

PairGraph read_pair_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  PairGraph g;
  std::vector<IndexPair>* section = nullptr;
  std::string line;
  int max_index = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# n_samples", 0) == 0) {
      g.n_samples = std::stoi(line.substr(11));
      continue;
    }
    if (line == "#positives") {
      section = &g.positives;
      continue;
    }
    if (line == "#negatives") {
      section = &g.negatives;
      continue;
    }
    if (!section) throw DataError(path.string() + ": pair before any section header");
    std::istringstream ss(line);
    int a = 0;
    int b = 0;
    if (!(ss >> a >> b) || a < 0 || b < 0 || a == b) throw DataError(path.string() + ": bad pair line '" + line + "'");
    section->emplace_back(a, b);
    max_index = std::max({max_index, a, b});
  }
  if (g.n_samples == 0) g.n_samples = max_index + 1;
  if (max_index >= g.n_samples) throw DataError(path.string() + ": pair index out of range");
  return g;
}

}  // namespace den
