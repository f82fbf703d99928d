#pragma once

#include "den/common.hpp"
#include "den/config.hpp"
#include "den/random.hpp"

#include <filesystem>
#include <vector>

namespace den {

/// Exact k nearest neighbors of every sample (self excluded), ascending by
/// Euclidean distance, ties broken toward the lower index.
struct KnnIndex {
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> neighbors;  // N x k
  Matrix distances;                                              // N x k

  int k() const { return static_cast<int>(neighbors.cols()); }
  int n() const { return static_cast<int>(neighbors.rows()); }
};

struct PairGraph {
  std::vector<IndexPair> positives;  // i < j, sorted, unique
  std::vector<IndexPair> negatives;  // (source, partner), k per source
  int n_samples = 0;
};

KnnIndex build_knn(const Matrix& samples, int k);

/// Shared-nearest-neighbor edges: (i, m) is kept when each lies in the other's
/// k-list and the two lists share at least one sample. Samples left with
/// fewer than j edges then take their closest neighbors, nearest first, until
/// they reach j.
std::vector<IndexPair> build_positive_pairs(const KnnIndex& knn, int j);

/// For every sample, draws k distinct partners with probability proportional
/// to their distance from it (no pruning). candidate_pool > 0 restricts each
/// sample's candidates to a uniform random subset of that size. Each sample
/// uses its own child stream, so the result does not depend on threading.
std::vector<IndexPair> build_negative_pairs(const Matrix& samples, int k, const Rng& rng,
                                            int candidate_pool = 0);

/// Threshold above which negatives are drawn from a random candidate pool
/// when RunConfig::negative_pool is 0.
inline constexpr int kNegativePoolThreshold = 10000;

/// Positives from the KNN/SNN construction and negatives from distance
/// weighted sampling. k is clamped to N - 1 and j to k - 1.
PairGraph build_pair_graph(const Matrix& samples, const RunConfig& cfg, const Rng& rng);

/// "#positives" and "#negatives" sections, one "i j" pair per line.
void write_pair_graph(const PairGraph& graph, const std::filesystem::path& path);
PairGraph read_pair_graph(const std::filesystem::path& path);

}  // namespace den
