#pragma once

#include "den/data_io.hpp"
#include "den/random.hpp"

namespace den {

/// Isotropic Gaussian blobs: n_clusters x points_per_cluster rows, labels
/// 0..n_clusters-1 in row order. Centers are drawn uniformly from a cube
/// and rejected until every pair is at least 10 * spread apart. The centers
/// are written to *centers when given.
Dataset make_blobs(int n_clusters, int points_per_cluster, int dim, double spread, const Rng& rng,
                   Matrix* centers = nullptr);

inline constexpr double kBlobSeparation = 10.0;

}  // namespace den
