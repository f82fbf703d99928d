#include "den/pair_graph.hpp"
#include "oracles.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

using namespace den;

namespace {

Matrix line_points(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

Matrix two_blobs(int per_blob, double gap, Rng& rng) {
  Matrix m(2 * per_blob, 2);
  for (int i = 0; i < 2 * per_blob; ++i) {
    m(i, 0) = (i < per_blob ? 0.0 : gap) + rng.normal();
    m(i, 1) = rng.normal();
  }
  return m;
}

double chi_square_critical(int dof, double alpha) {
  return boost::math::quantile(boost::math::complement(boost::math::chi_squared(dof), alpha));
}

}  // namespace

TEST_CASE("build_knn on a line") {
  const KnnIndex knn = build_knn(line_points({0, 1, 3}), 1);
  CHECK(knn.neighbors(0, 0) == 1);
  CHECK(knn.neighbors(1, 0) == 0);
  CHECK(knn.neighbors(2, 0) == 1);
  CHECK(knn.distances(2, 0) == 2.0);

  const KnnIndex all = build_knn(line_points({0, 1, 3}), 2);
  CHECK(all.neighbors(0, 0) == 1);
  CHECK(all.neighbors(0, 1) == 2);
  CHECK(all.neighbors(2, 0) == 1);
  CHECK(all.neighbors(2, 1) == 0);
  CHECK(all.distances(0, 0) <= all.distances(0, 1));
}

TEST_CASE("build_knn breaks distance ties toward the lower index") {
  const KnnIndex knn = build_knn(line_points({5, 5, 5, 0}), 1);
  CHECK(knn.neighbors(0, 0) == 1);
  CHECK(knn.neighbors(1, 0) == 0);
  CHECK(knn.neighbors(2, 0) == 0);
  CHECK_THROWS_AS(build_knn(line_points({0, 1}), 2), std::invalid_argument);
}

TEST_CASE("positive pairs never cross well separated blobs") {
  Rng rng(1);
  const Matrix x = two_blobs(5, 1000.0, rng);
  const auto pos = build_positive_pairs(build_knn(x, 3), 1);
  CHECK(pos == oracle::snn_positives(x, 3, 1));
  for (const auto& [a, b] : pos) CHECK((a < 5) == (b < 5));
}

TEST_CASE("an outlier receives exactly its nearest neighbor") {
  // Tight cluster of four, outlier far to the right. No cluster point has the
  // outlier in its 2-list, so the outlier only gets the fallback edge.
  const Matrix x = line_points({0, 0.1, 0.2, 0.3, 50});
  const auto pos = build_positive_pairs(build_knn(x, 2), 1);
  int outlier_edges = 0;
  for (const auto& [a, b] : pos)
    if (a == 4 || b == 4) {
      ++outlier_edges;
      CHECK(std::min(a, b) == 3);
    }
  CHECK(outlier_edges == 1);
}

TEST_CASE("an equilateral triangle keeps all three edges") {
  Matrix x(3, 2);
  x << 0, 0, 1, 0, 0.5, std::sqrt(3.0) / 2;
  const auto pos = build_positive_pairs(build_knn(x, 2), 1);
  CHECK(pos == std::vector<IndexPair>{{0, 1}, {0, 2}, {1, 2}});
}

TEST_CASE("positive pairs match the brute-force oracle on random data") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 20 + static_cast<int>(rng.uniform_int(60));
    const int k = 2 + static_cast<int>(rng.uniform_int(8));
    const int j = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k - 1)));
    Matrix x(n, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const auto pos = build_positive_pairs(build_knn(x, k), j);
    CHECK(pos == oracle::snn_positives(x, k, j));
    std::vector<int> degree(static_cast<std::size_t>(n), 0);
    for (const auto& [a, b] : pos) {
      CHECK(a < b);
      ++degree[static_cast<std::size_t>(a)];
      ++degree[static_cast<std::size_t>(b)];
    }
    CHECK(*std::min_element(degree.begin(), degree.end()) >= j);
  }
}

TEST_CASE("negative partner probability is proportional to distance") {
  const Matrix x = line_points({0, 1, 100});
  const int draws = 100000;
  int far = 0;
  for (int s = 0; s < draws; ++s) {
    const auto neg = build_negative_pairs(x, 1, Rng(static_cast<std::uint64_t>(s)));
    far += neg[0].second == 2;
  }
  const double p = 100.0 / 101.0;
  const double sigma = std::sqrt(p * (1 - p) / draws);
  CHECK(std::abs(far / static_cast<double>(draws) - p) < 3 * sigma);
}

TEST_CASE("equidistant points give uniform negatives") {
  const Matrix x = Matrix::Identity(5, 5);  // every pair at distance sqrt(2)
  std::map<int, int> counts;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) ++counts[build_negative_pairs(x, 1, Rng(static_cast<std::uint64_t>(s)))[0].second];
  double chi2 = 0;
  for (int m = 1; m < 5; ++m) {
    const double expected = draws / 4.0;
    chi2 += std::pow(counts[m] - expected, 2) / expected;
  }
  CHECK(counts.count(0) == 0);
  CHECK(chi2 < chi_square_critical(3, 0.01));
}

TEST_CASE("k = N - 1 picks every other sample once") {
  Rng rng(2);
  Matrix x(8, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const auto neg = build_negative_pairs(x, 7, Rng(9));
  REQUIRE(neg.size() == 56);
  for (int i = 0; i < 8; ++i) {
    std::vector<int> partners;
    for (int c = 0; c < 7; ++c) {
      CHECK(neg[static_cast<std::size_t>(i * 7 + c)].first == i);
      partners.push_back(neg[static_cast<std::size_t>(i * 7 + c)].second);
    }
    std::sort(partners.begin(), partners.end());
    std::vector<int> want;
    for (int m = 0; m < 8; ++m)
      if (m != i) want.push_back(m);
    CHECK(partners == want);
  }
  CHECK_THROWS_AS(build_negative_pairs(x, 8, Rng(9)), std::invalid_argument);
}

TEST_CASE("candidate pools restrict the partners") {
  Rng rng(4);
  Matrix x(60, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const auto neg = build_negative_pairs(x, 3, Rng(1), 10);
  REQUIRE(neg.size() == 180);
  for (std::size_t q = 0; q < neg.size(); q += 3) {
    std::set<int> s{neg[q].second, neg[q + 1].second, neg[q + 2].second};
    CHECK(s.size() == 3);
    CHECK(s.count(neg[q].first) == 0);
  }
  CHECK_THROWS_AS(build_negative_pairs(x, 11, Rng(1), 10), std::invalid_argument);
}

TEST_CASE("pair graph on two blobs") {
  Rng rng(3);
  const Matrix x = two_blobs(20, 100.0, rng);
  RunConfig cfg;
  const PairGraph g = build_pair_graph(x, cfg, Rng(5));
  CHECK(g.n_samples == 40);
  CHECK(g.negatives.size() == 40u * 10u);
  for (const auto& [a, b] : g.positives) CHECK((a < 20) == (b < 20));
  double cross = 0, total = 0;
  for (const auto& [a, b] : g.negatives) {
    const double d = (x.row(a) - x.row(b)).norm();
    total += d;
    if ((a < 20) != (b < 20)) cross += d;
    CHECK(a != b);
  }
  CHECK(cross / total >= 0.95);
}

TEST_CASE("pair graph edge cases and determinism") {
  Rng rng(8);
  Matrix x(12, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  RunConfig cfg;
  const PairGraph a = build_pair_graph(x, cfg, Rng(5));
  CHECK(a.negatives.size() == 120u);
  for (const auto& [p, q] : a.positives) CHECK((p >= 0 && q < 12 && p < q));

  const PairGraph b = build_pair_graph(x, cfg, Rng(5));
  CHECK(a.positives == b.positives);
  CHECK(a.negatives == b.negatives);

  set_num_threads(4);
  const PairGraph c = build_pair_graph(x, cfg, Rng(5));
  set_num_threads(1);
  CHECK(a.negatives == c.negatives);

  const PairGraph d = build_pair_graph(x, cfg, Rng(6));
  CHECK(a.negatives != d.negatives);

  // k is clamped when the dataset is smaller than k + 1.
  const PairGraph small = build_pair_graph(x.topRows(5), cfg, Rng(5));
  CHECK(small.negatives.size() == 5u * 4u);
}

TEST_CASE("pair graph dump round trips") {
  const auto dir = oracle::temp_dir("pairs");
  Rng rng(1);
  Matrix x(15, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const PairGraph g = build_pair_graph(x, RunConfig{}, Rng(2));
  write_pair_graph(g, dir / "p.txt");
  const PairGraph back = read_pair_graph(dir / "p.txt");
  CHECK(back.n_samples == g.n_samples);
  CHECK(back.positives == g.positives);
  CHECK(back.negatives == g.negatives);
  std::ofstream(dir / "bad.txt") << "#positives\n3 3\n";
  CHECK_THROWS_AS(read_pair_graph(dir / "bad.txt"), DataError);
}
