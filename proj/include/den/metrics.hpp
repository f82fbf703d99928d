#pragma once

#include "den/common.hpp"

#include <optional>
#include <vector>

namespace den::metrics {

/// Minimum-cost perfect matching on a square cost matrix (Hungarian
/// algorithm, O(n^3)). Returns the column assigned to each row.
std::vector<int> hungarian_min_cost(const Matrix& cost);

/// Best-bijection clustering accuracy. Returns nullopt when the two
/// labelings have different numbers of distinct labels: accuracy is not
/// reported in that case, only NMI. Throws std::invalid_argument on length
/// mismatch.
std::optional<double> accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

/// I(pred; truth) / sqrt(H(pred) H(truth)), natural logs, 0 when either
/// entropy is 0.
double nmi(const std::vector<int>& pred, const std::vector<int>& truth);

/// Adjusted Rand index. 1 when both partitions are identical up to renaming.
double adjusted_rand_index(const std::vector<int>& pred, const std::vector<int>& truth);

/// Mean silhouette coefficient (Euclidean). Single-member clusters score 0.
double silhouette(const Matrix& points, const std::vector<int>& labels);

}  // namespace den::metrics
