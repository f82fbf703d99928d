#include "den/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace den::metrics {

namespace {

struct Contingency {
  Matrix counts;  // rows: pred labels, cols: true labels
  std::size_t n = 0;
};

std::vector<int> compact(const std::vector<int>& labels, int* distinct) {
  std::map<int, int> ids;
  for (int l : labels) ids.emplace(l, 0);
  int next = 0;
  for (auto& [_, id] : ids) id = next++;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(ids[l]);
  *distinct = next;
  return out;
}

Contingency contingency(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("label vectors differ in length");
  int kp = 0;
  int kt = 0;
  const auto p = compact(pred, &kp);
  const auto t = compact(truth, &kt);
  Contingency c;
  c.counts = Matrix::Zero(kp, kt);
  for (std::size_t i = 0; i < p.size(); ++i) c.counts(p[i], t[i]) += 1.0;
  c.n = pred.size();
  return c;
}

double entropy(const Vector& counts, double n) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i)
    if (counts[i] > 0) h -= counts[i] / n * std::log(counts[i] / n);
  return h;
}

}  // namespace

std::vector<int> hungarian_min_cost(const Matrix& cost) {
  const auto n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("hungarian: cost matrix must be square");
  // Potentials formulation, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> match(static_cast<std::size_t>(n + 1), 0);  // column -> row
  std::vector<int> way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) assignment[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return assignment;
}

std::optional<double> accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  const Contingency c = contingency(pred, truth);
  if (c.counts.rows() != c.counts.cols()) return std::nullopt;
  if (c.n == 0) return std::nullopt;
  const Matrix cost = c.counts.maxCoeff() - c.counts.array();
  const auto assign = hungarian_min_cost(cost);
  double hits = 0.0;
  for (std::size_t r = 0; r < assign.size(); ++r) hits += c.counts(static_cast<Eigen::Index>(r), assign[r]);
  return hits / static_cast<double>(c.n);
}

double nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
  const Contingency c = contingency(pred, truth);
  if (c.n == 0) return 0.0;
  const auto n = static_cast<double>(c.n);
  const Vector rows = c.counts.rowwise().sum();
  const Vector cols = c.counts.colwise().sum().transpose();
  const double hp = entropy(rows, n);
  const double ht = entropy(cols, n);
  if (hp <= 0.0 || ht <= 0.0) return 0.0;
  double mi = 0.0;
  for (Eigen::Index i = 0; i < c.counts.rows(); ++i)
    for (Eigen::Index j = 0; j < c.counts.cols(); ++j) {
      const double nij = c.counts(i, j);
      if (nij > 0) mi += nij / n * std::log(n * nij / (rows[i] * cols[j]));
    }
  return std::clamp(mi / std::sqrt(hp * ht), 0.0, 1.0);
}

double adjusted_rand_index(const std::vector<int>& pred, const std::vector<int>& truth) {
  const Contingency c = contingency(pred, truth);
  auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_ij = 0.0;
  for (Eigen::Index i = 0; i < c.counts.size(); ++i) sum_ij += comb2(c.counts.data()[i]);
  double sum_a = 0.0;
  double sum_b = 0.0;
  const Vector rows = c.counts.rowwise().sum();
  const Vector cols = c.counts.colwise().sum().transpose();
  for (Eigen::Index i = 0; i < rows.size(); ++i) sum_a += comb2(rows[i]);
  for (Eigen::Index j = 0; j < cols.size(); ++j) sum_b += comb2(cols[j]);
  const double total = comb2(static_cast<double>(c.n));
  const double expected = total > 0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both partitions trivial and identical
  return (sum_ij - expected) / (max_index - expected);
}

double silhouette(const Matrix& points, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != points.rows())
    throw std::invalid_argument("silhouette: label count mismatch");
  int k = 0;
  const auto lab = compact(labels, &k);
  if (k < 2) return 0.0;
  const Eigen::Index n = points.rows();
  std::vector<double> sizes(static_cast<std::size_t>(k), 0.0);
  for (int l : lab) sizes[static_cast<std::size_t>(l)] += 1.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) sums[static_cast<std::size_t>(lab[static_cast<std::size_t>(j)])] += (points.row(i) - points.row(j)).norm();
    const auto own = static_cast<std::size_t>(lab[static_cast<std::size_t>(i)]);
    if (sizes[own] <= 1.0) continue;
    const double a = sums[own] / (sizes[own] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sums.size(); ++c)
      if (c != own && sizes[c] > 0) b = std::min(b, sums[c] / sizes[c]);
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

}  // namespace den::metrics
