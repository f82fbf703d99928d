#include "den/synthetic.hpp"

#include <stdexcept>

namespace den {

Dataset make_blobs(int n_clusters, int points_per_cluster, int dim, double spread, const Rng& rng, Matrix* centers) {
  if (n_clusters < 1 || points_per_cluster < 1 || dim < 1)
    throw std::invalid_argument("make_blobs: counts and dimension must be positive");
  if (!(spread >= 0)) throw std::invalid_argument("make_blobs: spread must be non-negative");

  // A zero spread still gets well separated centers.
  const double unit = spread > 0 ? spread : 1.0;
  const double min_dist = kBlobSeparation * unit;
  double half_width = kBlobSeparation * unit;
  Rng center_rng = rng.child("blob-centers");
  Matrix c(n_clusters, dim);
  int placed = 0;
  int failures = 0;
  while (placed < n_clusters) {
    for (int j = 0; j < dim; ++j) c(placed, j) = half_width * (2.0 * center_rng.uniform() - 1.0);
    bool ok = true;
    for (int q = 0; q < placed && ok; ++q) ok = (c.row(q) - c.row(placed)).norm() >= min_dist;
    if (ok) {
      ++placed;
    } else if (++failures % 1000 == 0) {
      half_width *= 1.5;
    }
  }

  Rng point_rng = rng.child("blob-points");
  Dataset out;
  out.samples.resize(static_cast<Eigen::Index>(n_clusters) * points_per_cluster, dim);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(out.samples.rows()));
  Eigen::Index r = 0;
  for (int k = 0; k < n_clusters; ++k) {
    for (int p = 0; p < points_per_cluster; ++p, ++r) {
      for (int j = 0; j < dim; ++j) out.samples(r, j) = c(k, j) + spread * point_rng.normal();
      labels.push_back(k);
    }
  }
  out.labels = std::move(labels);
  for (int j = 0; j < dim; ++j) out.feature_names.push_back("x" + std::to_string(j));
  if (centers) *centers = c;
  return out;
}

}  // namespace den
