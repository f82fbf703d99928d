#include "den/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace den {

SpectralConfig SpectralConfig::from(const RunConfig& cfg) {
  SpectralConfig s;
  s.gamma = cfg.gamma;
  s.eigen_threshold = cfg.eigen_threshold;
  s.subsample_size = cfg.spectral_subsample;
  s.knn_filter_neighbors = cfg.knn_filter_neighbors;
  s.kmeans_restarts = cfg.kmeans_restarts;
  s.kmeans_max_iter = cfg.kmeans_max_iter;
  return s;
}

void SpectralConfig::validate() const {
  if (!(gamma > 0) || !(eigen_threshold > 0) || subsample_size < 2 || knn_filter_neighbors < 1 ||
      kmeans_restarts < 1 || kmeans_max_iter < 1)
    throw ConfigError("invalid spectral clustering configuration");
}

double compute_d_avg(const Matrix& points, const std::vector<IndexPair>& positives) {
  if (positives.empty()) throw DataError("compute_d_avg: no positive pairs");
  const std::size_t total = positives.size();
  const std::size_t used = std::min(total, kMaxBandwidthPairs);
  double sum = 0.0;
  for (std::size_t q = 0; q < used; ++q) {
    const auto& [a, b] = positives[q * total / used];
    sum += (points.row(a) - points.row(b)).norm();
  }
  return sum / static_cast<double>(used);
}

Matrix affinity_matrix(const Matrix& points, double d_avg, double gamma) {
  const double scale = gamma * d_avg * d_avg;
  Matrix a = pairwise_sq_dist(points, points);
  a = (-a.array() / scale).exp().matrix();
  a.diagonal().setOnes();
  return a;
}

Matrix graph_laplacian(const Matrix& affinity) {
  Matrix l = -affinity;
  l.diagonal() += affinity.rowwise().sum();
  return l;
}

namespace {

// Squared distance to the nearest of the first `count` centroids.
int nearest(const Matrix& x, Eigen::Index row, const Matrix& centroids, Eigen::Index count, double* dist) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < count; ++c) {
    const double d = (x.row(row) - centroids.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

KMeansResult kmeans_once(const Matrix& x, int k, int max_iter, Rng& rng) {
  const Eigen::Index n = x.rows();
  Matrix centroids(k, x.cols());
  centroids.row(0) = x.row(static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n))));
  Vector d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (x.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    if (c > 1)
      for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], (x.row(i) - centroids.row(c - 1)).squaredNorm());
    const double total = d2.sum();
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = x.row(pick);
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int l = nearest(x, i, centroids, k, nullptr);
      if (l != labels[static_cast<std::size_t>(i)]) {
        labels[static_cast<std::size_t>(i)] = l;
        changed = true;
      }
    }
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        continue;
      }
      // Empty cluster: move it to the point worst served by its centroid.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = (x.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centroids.row(c) = x.row(far);
      labels[static_cast<std::size_t>(far)] = c;
      changed = true;
    }
    if (!changed) break;
  }
  KMeansResult out;
  out.labels = std::move(labels);
  out.centroids = std::move(centroids);
  for (Eigen::Index i = 0; i < n; ++i)
    out.inertia += (x.row(i) - out.centroids.row(out.labels[static_cast<std::size_t>(i)])).squaredNorm();
  return out;
}

}  // namespace

KMeansResult kmeans(const Matrix& x, int k, int restarts, int max_iter, const Rng& rng) {
  if (k < 1 || k > x.rows()) throw std::invalid_argument("kmeans: need 1 <= k <= N");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng local = rng.child("kmeans-restart", static_cast<std::uint64_t>(r));
    KMeansResult run = kmeans_once(x, k, max_iter, local);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

SpectralPartition estimate_k_and_partition(const Matrix& affinity, const SpectralConfig& cfg, const Rng& rng) {
  const Matrix lap = graph_laplacian(affinity);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(lap);
  if (solver.info() != Eigen::Success) throw NumericalError("Laplacian eigendecomposition failed");
  SpectralPartition out;
  out.eigenvalues = solver.eigenvalues();
  int k = 0;
  for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i)
    if (out.eigenvalues[i] < cfg.eigen_threshold) ++k;
  k = std::clamp(k, 1, static_cast<int>(affinity.rows()));
  out.k_raw = k;
  const Matrix features = solver.eigenvectors().leftCols(k);
  out.labels = kmeans(features, k, cfg.kmeans_restarts, cfg.kmeans_max_iter, rng.child("kmeans")).labels;
  return out;
}

ClusterLabels knn_label_filter(const Matrix& all_points, const Matrix& subset_points,
                               const std::vector<int>& subset_labels, int neighbors) {
  const Eigen::Index s = subset_points.rows();
  if (static_cast<Eigen::Index>(subset_labels.size()) != s)
    throw std::invalid_argument("knn_label_filter: label count mismatch");
  if (s == 0) throw std::invalid_argument("knn_label_filter: empty subset");
  const int m = std::clamp(neighbors, 1, static_cast<int>(s));
  const int max_label = *std::max_element(subset_labels.begin(), subset_labels.end());
  std::vector<int> raw(static_cast<std::size_t>(all_points.rows()));

  parallel_for(static_cast<std::size_t>(all_points.rows()), [&](std::size_t row) {
    const auto i = static_cast<Eigen::Index>(row);
    std::vector<std::pair<double, int>> cand(static_cast<std::size_t>(s));
    for (Eigen::Index q = 0; q < s; ++q)
      cand[static_cast<std::size_t>(q)] = {(all_points.row(i) - subset_points.row(q)).squaredNorm(), static_cast<int>(q)};
    std::partial_sort(cand.begin(), cand.begin() + m, cand.end());
    std::vector<int> votes(static_cast<std::size_t>(max_label + 1), 0);
    for (int c = 0; c < m; ++c) ++votes[static_cast<std::size_t>(subset_labels[static_cast<std::size_t>(cand[static_cast<std::size_t>(c)].second)])];
    raw[row] = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  });

  std::vector<int> remap(static_cast<std::size_t>(max_label + 1), -1);
  for (int l : raw) remap[static_cast<std::size_t>(l)] = 0;
  int next = 0;
  for (auto& r : remap)
    if (r == 0) r = next++;
  ClusterLabels out;
  out.labels.reserve(raw.size());
  for (int l : raw) out.labels.push_back(remap[static_cast<std::size_t>(l)]);
  out.n_clusters = next;
  return out;
}

ClusterResult cluster(const Matrix& points, const std::vector<IndexPair>& positives, const SpectralConfig& cfg,
                      const Rng& rng) {
  cfg.validate();
  const auto n = static_cast<int>(points.rows());
  if (n < 2) throw DataError("cluster: need at least 2 points");
  const int s = std::min(cfg.subsample_size, n);

  ClusterResult out;
  Rng sub_rng = rng.child("subsample");
  out.subset = s == n ? std::vector<int>{} : sub_rng.sample_without_replacement(n, s);
  if (s == n) {
    out.subset.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.subset[static_cast<std::size_t>(i)] = i;
  }
  std::sort(out.subset.begin(), out.subset.end());
  Matrix sub(s, points.cols());
  for (int q = 0; q < s; ++q) sub.row(q) = points.row(out.subset[static_cast<std::size_t>(q)]);

  double d_avg = compute_d_avg(points, positives);
  if (d_avg < kBandwidthFloor) {
    const Matrix d2 = pairwise_sq_dist(sub, sub);
    d_avg = d2.cwiseSqrt().sum() / (static_cast<double>(s) * (s - 1));
    if (d_avg < kBandwidthFloor) d_avg = 1.0;
  }

  const Matrix a = affinity_matrix(sub, d_avg, cfg.gamma);
  SpectralPartition part = estimate_k_and_partition(a, cfg, rng);
  out.k_raw = part.k_raw;
  out.eigenvalues = std::move(part.eigenvalues);
  out.labels = knn_label_filter(points, sub, part.labels, cfg.knn_filter_neighbors);
  out.labels.d_avg = d_avg;
  return out;
}

}  // namespace den
