#pragma once

#include "den/cluster_head.hpp"
#include "den/common.hpp"
#include "den/config.hpp"
#include "den/random.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

namespace den {

/// Scalar model output for every row of a batch.
using ScalarModel = std::function<Vector(const Matrix&)>;

struct Attribution {
  int sample_index = 0;
  int cluster_id = -1;
  double base_value = 0.0;  // mean model output over the background
  double output = 0.0;      // model output at the sample
  Vector phi;
};

/// Feature coalitions and their Shapley kernel weights. The empty and full
/// coalitions are implicit: they enter through base_value and the additivity
/// constraint, not as rows here.
struct CoalitionDesign {
  int n_features = 0;
  std::vector<std::vector<std::uint8_t>> masks;  // 1 = feature taken from the sample
  std::vector<double> weights;
  bool exhaustive = false;
};

/// min(2^D, 2048).
int default_coalitions(int n_features);

/// Budget counts the empty and full coalitions. With a budget of at least
/// 2^D every coalition is enumerated with its exact kernel weight.
/// Otherwise whole coalition sizes are enumerated from the outside in
/// (1 and D-1, then 2 and D-2, ...) while the budget covers them, and the
/// rest is drawn by size in proportion to the kernel, each draw paired with
/// its complement. Throws std::invalid_argument when budget < D + 2.
CoalitionDesign make_coalitions(int n_features, int budget, Rng& rng);

/// Kernel SHAP with interventional masking: a masked feature takes each
/// background row's value in turn and the outputs are averaged. phi solves
/// the kernel-weighted least squares problem subject to
/// base_value + sum(phi) = output.
Attribution kernel_shap(const ScalarModel& f, const Vector& sample, const Matrix& background,
                        const CoalitionDesign& design);
Attribution kernel_shap(const ScalarModel& f, const Vector& sample, const Matrix& background, int budget,
                        const Rng& rng);

/// Explains the probability of the sample's own predicted cluster.
Attribution kernel_shap(const ClusterModel& model, const Vector& sample, const Matrix& background, int budget,
                        const Rng& rng);

/// cfg.background_size rows drawn without replacement, in index order.
Matrix select_background(const Matrix& samples, int size, const Rng& rng);

/// One attribution per row of samples. All rows share a single coalition
/// design drawn from rng, so equal rows get equal attributions.
std::vector<Attribution> explain_batch(const ClusterModel& model, const Matrix& samples, const Matrix& background,
                                       const RunConfig& cfg, const Rng& rng);

/// sample_id,cluster,base_value,phi_0..phi_{D-1}; sample_id is
/// Attribution::sample_index.
void write_attributions(const std::vector<Attribution>& attributions, const std::filesystem::path& path);

/// Heat map of one attribution over a width x height image: red for positive
/// phi, blue for negative, intensity relative to the largest |phi|.
void write_attribution_svg(const Attribution& attribution, int width, int height,
                           const std::filesystem::path& path);

}  // namespace den
