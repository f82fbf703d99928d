#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace den {

/// Seeded random stream.
///
/// Every stochastic step of the pipeline draws from a stream derived from the
/// run seed with child(label, index). Derivation depends only on the parent's
/// seed and the label, never on how many draws the parent has made, so stages
/// stay reproducible when run standalone. Not thread-safe: give each worker its
/// own child.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  Rng child(std::string_view label, std::uint64_t index = 0) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in (0, 1); safe to take log of.
  double uniform_open();
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct indices from [0, n), in draw order.
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace den
