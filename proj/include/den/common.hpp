#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace den {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using IndexPair = std::pair<int, int>;

// Error hierarchy. The CLI maps these onto exit codes
// (ConfigError -> 1, DataError -> 2, NumericalError -> 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Number of worker threads used by row-parallel loops. Results never depend
// on this value: every loop body writes only to its own row.
void set_num_threads(int threads);
int num_threads();

// Runs fn(i) for i in [0, n), split into contiguous chunks over num_threads().
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Squared Euclidean distances between every row of a and every row of b.
Matrix pairwise_sq_dist(const Matrix& a, const Matrix& b);

}  // namespace den
