#include "den/metrics.hpp"
#include "den/pair_graph.hpp"
#include "den/spectral.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <numeric>
#include <set>

using namespace den;

namespace {

Matrix blobs(int k, int per, int dim, double gap, Rng& rng, std::vector<int>* labels) {
  Matrix x(k * per, dim);
  for (int i = 0; i < k * per; ++i) {
    for (int c = 0; c < dim; ++c) x(i, c) = rng.normal() + (c == (i / per) % dim ? gap * (i / per + 1) : 0.0);
    if (labels) labels->push_back(i / per);
  }
  return x;
}

int union_find_components(const Matrix& a) {
  const auto n = static_cast<int>(a.rows());
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int v) {
    return parent[static_cast<std::size_t>(v)] == v ? v : parent[static_cast<std::size_t>(v)] = find(parent[static_cast<std::size_t>(v)]);
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (a(i, j) > 0) parent[static_cast<std::size_t>(find(i))] = find(j);
  std::set<int> roots;
  for (int i = 0; i < n; ++i) roots.insert(find(i));
  return static_cast<int>(roots.size());
}

Matrix block_affinity(const std::vector<int>& sizes, double link) {
  const int n = std::accumulate(sizes.begin(), sizes.end(), 0);
  Matrix a = Matrix::Constant(n, n, link);
  int start = 0;
  for (int s : sizes) {
    a.block(start, start, s, s).setOnes();
    start += s;
  }
  return a;
}

}  // namespace

TEST_CASE("d_avg and affinity values") {
  Matrix x(3, 1);
  x << 0, 1, 4;
  CHECK(compute_d_avg(x, {{0, 1}, {1, 2}}) == 2.0);
  CHECK_THROWS_AS(compute_d_avg(x, {}), DataError);

  const Matrix a = affinity_matrix(x, 2.0, 1.0);
  Matrix y(2, 1);
  y << 0, 2;
  CHECK(affinity_matrix(y, 2.0, 1.0)(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  const Matrix wide = affinity_matrix(x, 2.0, 2.0);
  CHECK(wide(0, 2) > a(0, 2));
  CHECK(wide(1, 2) > a(1, 2));
  CHECK(a == a.transpose());
}

TEST_CASE("Laplacian rows sum to zero") {
  Rng rng(1);
  const Matrix x = blobs(3, 20, 3, 5.0, rng, nullptr);
  const Matrix l = graph_laplacian(affinity_matrix(x, 1.5, 1.0));
  CHECK(l.rowwise().sum().cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("eigen gap counts blocks") {
  const SpectralConfig cfg;
  const SpectralPartition clique = estimate_k_and_partition(Matrix::Ones(12, 12), cfg, Rng(1));
  CHECK(clique.k_raw == 1);

  const SpectralPartition three = estimate_k_and_partition(block_affinity({10, 15, 20}, 0.0), cfg, Rng(1));
  CHECK(three.k_raw == 3);
  int tiny = 0;
  for (Eigen::Index i = 0; i < three.eigenvalues.size(); ++i) tiny += std::abs(three.eigenvalues(i)) < 1e-12;
  CHECK(tiny == 3);
  std::vector<int> truth;
  for (int b = 0, n = 0; b < 3; ++b)
    for (int q = 0; q < (b == 0 ? 10 : b == 1 ? 15 : 20); ++q, ++n) truth.push_back(b);
  CHECK(metrics::adjusted_rand_index(three.labels, truth) == 1.0);

  CHECK(estimate_k_and_partition(block_affinity({10, 10}, 1e-6), cfg, Rng(1)).k_raw == 2);
}

TEST_CASE("zero eigenvalues match connected components") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 10 + static_cast<int>(rng.uniform_int(30));
    Matrix a = Matrix::Zero(n, n);
    const double p = 0.02 + 0.1 * rng.uniform();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.uniform() < p) a(i, j) = a(j, i) = 0.5 + rng.uniform();
    const Eigen::SelfAdjointEigenSolver<Matrix> es(graph_laplacian(a), Eigen::EigenvaluesOnly);
    int zeros = 0;
    for (Eigen::Index i = 0; i < n; ++i) zeros += es.eigenvalues()(i) < 1e-9;
    CAPTURE(trial);
    CHECK(zeros == union_find_components(a));
  }
}

TEST_CASE("k-means separates blobs and is deterministic") {
  Rng rng(3);
  std::vector<int> truth;
  const Matrix x = blobs(4, 25, 4, 10.0, rng, &truth);
  const KMeansResult a = kmeans(x, 4, 5, 100, Rng(7));
  const KMeansResult b = kmeans(x, 4, 5, 100, Rng(7));
  CHECK(a.labels == b.labels);
  CHECK(a.inertia == b.inertia);
  CHECK(metrics::adjusted_rand_index(a.labels, truth) == 1.0);
  CHECK_THROWS(kmeans(x, 101, 1, 10, Rng(1)));
}

TEST_CASE("KNN filter removes a two point micro-cluster") {
  Rng rng(4);
  std::vector<int> truth;
  const Matrix x = blobs(2, 50, 2, 10.0, rng, &truth);
  std::vector<int> noisy = truth;
  noisy[3] = 2;
  noisy[7] = 2;
  const ClusterLabels out = knn_label_filter(x, x, noisy, 50);
  CHECK(out.n_clusters == 2);
  CHECK(out.labels == truth);
}

TEST_CASE("KNN filter repairs flipped labels and never adds clusters") {
  Rng rng(5);
  for (int fixture = 0; fixture < 20; ++fixture) {
    std::vector<int> truth;
    const Matrix x = blobs(3, 100, 3, 10.0, rng, &truth);
    std::vector<int> noisy = truth;
    for (int f : rng.sample_without_replacement(100, 5)) noisy[static_cast<std::size_t>(f)] = 1 + static_cast<int>(rng.uniform_int(2));
    const ClusterLabels out = knn_label_filter(x, x, noisy, 50);
    int agree = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) agree += out.labels[i] == truth[i];
    CHECK(agree >= 0.99 * static_cast<double>(truth.size()));
    CHECK(out.n_clusters <= 3);
  }
}

TEST_CASE("cluster recovers separable blobs") {
  Rng rng(6);
  std::vector<int> truth;
  const Matrix x = blobs(3, 60, 2, 15.0, rng, &truth);
  RunConfig rc;
  const auto pos = build_positive_pairs(build_knn(x, rc.k), rc.j);
  const ClusterResult r = cluster(x, pos, SpectralConfig{}, Rng(8));
  CHECK(r.labels.n_clusters == 3);
  CHECK(metrics::adjusted_rand_index(r.labels.labels, truth) == 1.0);

  const ClusterResult again = cluster(x, pos, SpectralConfig{}, Rng(8));
  CHECK(again.labels.labels == r.labels.labels);
}

TEST_CASE("a single blob is one cluster") {
  Rng rng(7);
  Matrix x(150, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const auto pos = build_positive_pairs(build_knn(x, 10), 1);
  const ClusterResult r = cluster(x, pos, SpectralConfig{}, Rng(1));
  CHECK(r.labels.n_clusters == 1);
}

TEST_CASE("subsampling still labels every point") {
  Rng rng(8);
  std::vector<int> truth;
  const Matrix x = blobs(2, 200, 2, 15.0, rng, &truth);
  SpectralConfig cfg;
  cfg.subsample_size = 120;
  const auto pos = build_positive_pairs(build_knn(x, 10), 1);
  const ClusterResult r = cluster(x, pos, cfg, Rng(3));
  CHECK(r.subset.size() == 120u);
  CHECK(r.labels.labels.size() == 400u);
  CHECK(metrics::adjusted_rand_index(r.labels.labels, truth) == 1.0);
}
