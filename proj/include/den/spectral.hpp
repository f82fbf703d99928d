#pragma once

#include "den/common.hpp"
#include "den/config.hpp"
#include "den/random.hpp"

#include <vector>

namespace den {

struct SpectralConfig {
  double gamma = 1.0;
  double eigen_threshold = 1e-2;
  int subsample_size = 1000;
  int knn_filter_neighbors = 50;
  int kmeans_restarts = 10;
  int kmeans_max_iter = 300;

  static SpectralConfig from(const RunConfig& cfg);
  void validate() const;
};

struct ClusterLabels {
  std::vector<int> labels;  // in [0, n_clusters)
  int n_clusters = 0;
  double d_avg = 0.0;
};

/// Mean embedding distance over positive pairs. Above kMaxBandwidthPairs
/// pairs an evenly strided subset of that size is used.
double compute_d_avg(const Matrix& points, const std::vector<IndexPair>& positives);
inline constexpr std::size_t kMaxBandwidthPairs = 100000;

/// Below this, d_avg is replaced by the mean pairwise subset distance.
inline constexpr double kBandwidthFloor = 1e-8;

/// Gaussian affinity exp(-|x - y|^2 / (gamma * d_avg^2)).
Matrix affinity_matrix(const Matrix& points, double d_avg, double gamma);

/// Unnormalized Laplacian L = D - A.
Matrix graph_laplacian(const Matrix& affinity);

struct KMeansResult {
  std::vector<int> labels;
  Matrix centroids;
  double inertia = 0.0;
};

/// Lloyd's algorithm from k-means++ seeds, best inertia over restarts (ties
/// go to the earlier restart). An emptied cluster is re-seeded at the point
/// farthest from its assigned centroid.
KMeansResult kmeans(const Matrix& x, int k, int restarts, int max_iter, const Rng& rng);

struct SpectralPartition {
  std::vector<int> labels;
  int k_raw = 0;
  Vector eigenvalues;  // ascending
};

/// k_raw = number of Laplacian eigenvalues below the threshold (at least 1),
/// then k-means on the first k_raw eigenvectors. Deliberately overestimates
/// the cluster count; knn_label_filter collapses it afterwards.
SpectralPartition estimate_k_and_partition(const Matrix& affinity, const SpectralConfig& cfg, const Rng& rng);

/// Labels every point by majority vote over its `neighbors` nearest subset
/// points (ties: nearer index first for neighbors, smaller label for votes).
/// Labels that win no point disappear and the rest are renumbered in order.
ClusterLabels knn_label_filter(const Matrix& all_points, const Matrix& subset_points,
                               const std::vector<int>& subset_labels, int neighbors);

struct ClusterResult {
  ClusterLabels labels;
  int k_raw = 0;
  Vector eigenvalues;
  std::vector<int> subset;  // indices of the affinity subsample
};

ClusterResult cluster(const Matrix& points, const std::vector<IndexPair>& positives, const SpectralConfig& cfg,
                      const Rng& rng);

}  // namespace den
