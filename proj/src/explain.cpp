#include "den/explain.hpp"

#include "den/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace den {

namespace {

double binomial(int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); }

// Total kernel mass of all coalitions of size s (up to a common factor).
double size_weight(int d, int s) { return static_cast<double>(d - 1) / (static_cast<double>(s) * (d - s)); }

void enumerate_size(int d, int s, double per_mask, CoalitionDesign& design) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(d), 0);
  std::fill(mask.end() - s, mask.end(), 1);
  do {
    design.masks.push_back(mask);
    design.weights.push_back(per_mask);
  } while (std::next_permutation(mask.begin(), mask.end()));
}

int argmax(const RowVector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < v.size(); ++c)
    if (v[c] > v[best]) best = c;
  return static_cast<int>(best);
}

std::string hex_color(int r, int g, int b) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

int default_coalitions(int n_features) {
  if (n_features >= 11) return 2048;
  return 1 << n_features;
}

CoalitionDesign make_coalitions(int n_features, int budget, Rng& rng) {
  const int d = n_features;
  if (d < 1) throw std::invalid_argument("make_coalitions: need at least one feature");
  if (budget < d + 2)
    throw std::invalid_argument("n_coalitions = " + std::to_string(budget) + " leaves the system underdetermined for " +
                                std::to_string(d) + " features (need at least " + std::to_string(d + 2) + ")");
  CoalitionDesign design;
  design.n_features = d;

  if (d <= 30 && static_cast<double>(budget) >= std::ldexp(1.0, d)) {
    design.exhaustive = true;
    for (int s = 1; s < d; ++s) enumerate_size(d, s, size_weight(d, s) / binomial(d, s), design);
    return design;
  }

  double remaining_weight = 0.0;
  for (int s = 1; s < d; ++s) remaining_weight += size_weight(d, s);
  double remaining = budget - 2;
  int lo = 1;  // sizes [lo, d - lo] are still open
  for (; lo <= d - lo; ++lo) {
    const bool paired = lo != d - lo;
    const double count = binomial(d, lo) * (paired ? 2.0 : 1.0);
    const double group_weight = size_weight(d, lo) * (paired ? 2.0 : 1.0);
    if (count > remaining || remaining * group_weight / remaining_weight < count - 1e-8) break;
    enumerate_size(d, lo, size_weight(d, lo) / binomial(d, lo), design);
    if (paired) enumerate_size(d, d - lo, size_weight(d, lo) / binomial(d, lo), design);
    remaining -= count;
    remaining_weight -= group_weight;
  }
  const auto draws = static_cast<long>(std::llround(remaining));
  if (lo > d - lo || draws <= 0) return design;

  std::vector<double> cdf;
  for (int s = lo; s <= d - lo; ++s) cdf.push_back((cdf.empty() ? 0.0 : cdf.back()) + size_weight(d, s));
  std::map<std::vector<std::uint8_t>, double> counts;
  long drawn = 0;
  while (drawn < draws) {
    const double u = rng.uniform() * cdf.back();
    const auto pos = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    const int s = lo + static_cast<int>(std::min<std::ptrdiff_t>(pos, static_cast<std::ptrdiff_t>(cdf.size()) - 1));
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(d), 0);
    for (int f : rng.sample_without_replacement(d, s)) mask[static_cast<std::size_t>(f)] = 1;
    counts[mask] += 1.0;
    ++drawn;
    if (drawn < draws) {
      for (auto& m : mask) m = static_cast<std::uint8_t>(1 - m);
      counts[mask] += 1.0;
      ++drawn;
    }
  }
  const double unit = remaining_weight / static_cast<double>(drawn);
  for (const auto& [mask, c] : counts) {
    design.masks.push_back(mask);
    design.weights.push_back(c * unit);
  }
  return design;
}

Attribution kernel_shap(const ScalarModel& f, const Vector& sample, const Matrix& background,
                        const CoalitionDesign& design) {
  const auto d = static_cast<int>(sample.size());
  if (background.rows() == 0) throw std::invalid_argument("kernel_shap: empty background");
  if (background.cols() != d) throw std::invalid_argument("kernel_shap: background width differs from sample");
  if (design.n_features != d) throw std::invalid_argument("kernel_shap: coalition design has the wrong width");

  Attribution out;
  const Vector base_out = f(background);
  out.base_value = base_out.sum() / static_cast<double>(background.rows());
  out.output = f(sample.transpose())[0];
  const double total = out.output - out.base_value;
  out.phi = Vector::Zero(d);
  if (d == 1 || design.masks.empty()) {
    out.phi.setConstant(total / d);
    return out;
  }

  // Coalition values, evaluated in batches of whole background blocks.
  const Eigen::Index b = background.rows();
  const auto m = static_cast<Eigen::Index>(design.masks.size());
  const Eigen::Index per_chunk = std::max<Eigen::Index>(1, 65536 / b);
  Vector value(m);
  for (Eigen::Index c0 = 0; c0 < m; c0 += per_chunk) {
    const Eigen::Index nc = std::min(per_chunk, m - c0);
    Matrix rows(nc * b, d);
    for (Eigen::Index c = 0; c < nc; ++c) {
      const auto& mask = design.masks[static_cast<std::size_t>(c0 + c)];
      rows.middleRows(c * b, b) = background;
      for (int j = 0; j < d; ++j)
        if (mask[static_cast<std::size_t>(j)]) rows.block(c * b, j, b, 1).setConstant(sample[j]);
    }
    const Vector y = f(rows);
    for (Eigen::Index c = 0; c < nc; ++c) value[c0 + c] = y.segment(c * b, b).sum() / static_cast<double>(b);
  }

  // Eliminate the last feature through sum(phi) = total, then weighted LS.
  Matrix x(m, d - 1);
  Vector y(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto& mask = design.masks[static_cast<std::size_t>(r)];
    const double last = mask[static_cast<std::size_t>(d - 1)];
    const double sw = std::sqrt(design.weights[static_cast<std::size_t>(r)]);
    for (int j = 0; j < d - 1; ++j) x(r, j) = sw * (mask[static_cast<std::size_t>(j)] - last);
    y[r] = sw * (value[r] - out.base_value - last * total);
  }
  const Vector head = x.completeOrthogonalDecomposition().solve(y);
  out.phi.head(d - 1) = head;
  out.phi[d - 1] = total - head.sum();
  if (!out.phi.allFinite()) throw NumericalError("kernel_shap: weighted least squares produced non-finite values");
  return out;
}

Attribution kernel_shap(const ScalarModel& f, const Vector& sample, const Matrix& background, int budget,
                        const Rng& rng) {
  Rng local = rng.child("shap-coalitions");
  return kernel_shap(f, sample, background, make_coalitions(static_cast<int>(sample.size()), budget, local));
}

namespace {

Attribution explain_one(const ClusterModel& model, const Vector& sample, const Matrix& background,
                        const CoalitionDesign& design) {
  const Prediction own = predict_cluster(model, sample.transpose());
  const int column = argmax(own.probabilities.row(0));
  const ScalarModel f = [&](const Matrix& x) -> Vector { return predict_cluster(model, x).probabilities.col(column); };
  Attribution a = kernel_shap(f, sample, background, design);
  a.cluster_id = model.head.label_map[static_cast<std::size_t>(column)];
  return a;
}

}  // namespace

Attribution kernel_shap(const ClusterModel& model, const Vector& sample, const Matrix& background, int budget,
                        const Rng& rng) {
  Rng local = rng.child("shap-coalitions");
  return explain_one(model, sample, background, make_coalitions(static_cast<int>(sample.size()), budget, local));
}

Matrix select_background(const Matrix& samples, int size, const Rng& rng) {
  if (samples.rows() == 0) throw DataError("cannot draw a background from an empty dataset");
  const int n = static_cast<int>(samples.rows());
  const int k = std::clamp(size, 1, n);
  Rng local = rng.child("background");
  std::vector<int> idx = local.sample_without_replacement(n, k);
  std::sort(idx.begin(), idx.end());
  Matrix out(k, samples.cols());
  for (int q = 0; q < k; ++q) out.row(q) = samples.row(idx[static_cast<std::size_t>(q)]);
  return out;
}

std::vector<Attribution> explain_batch(const ClusterModel& model, const Matrix& samples, const Matrix& background,
                                       const RunConfig& cfg, const Rng& rng) {
  std::vector<Attribution> out(static_cast<std::size_t>(samples.rows()));
  if (samples.rows() == 0) return out;
  const auto d = static_cast<int>(samples.cols());
  const int budget = cfg.n_coalitions > 0 ? cfg.n_coalitions : default_coalitions(d);
  Rng local = rng.child("shap-coalitions");
  const CoalitionDesign design = make_coalitions(d, budget, local);
  parallel_for(out.size(), [&](std::size_t i) {
    out[i] = explain_one(model, samples.row(static_cast<Eigen::Index>(i)).transpose(), background, design);
    out[i].sample_index = static_cast<int>(i);
  });
  return out;
}

void write_attributions(const std::vector<Attribution>& attributions, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  const Eigen::Index d = attributions.empty() ? 0 : attributions.front().phi.size();
  out << "sample_id,cluster,base_value";
  for (Eigen::Index j = 0; j < d; ++j) out << ",phi_" << j;
  out << '\n';
  for (const auto& a : attributions) {
    if (a.phi.size() != d) throw std::invalid_argument("attributions have differing widths");
    out << a.sample_index << ',' << a.cluster_id << ',' << format_double(a.base_value);
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(a.phi[j]);
    out << '\n';
  }
}

void write_attribution_svg(const Attribution& attribution, int width, int height, const std::filesystem::path& path) {
  if (width < 1 || height < 1 || static_cast<Eigen::Index>(width) * height != attribution.phi.size())
    throw std::invalid_argument("heat map shape " + std::to_string(width) + "x" + std::to_string(height) +
                                " does not match " + std::to_string(attribution.phi.size()) + " features");
  constexpr int kCell = 10;
  const double peak = attribution.phi.cwiseAbs().maxCoeff();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width * kCell << "\" height=\"" << height * kCell
      << "\" viewBox=\"0 0 " << width * kCell << ' ' << height * kCell << "\">\n";
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double v = attribution.phi[static_cast<Eigen::Index>(r) * width + c];
      const double t = peak > 0 ? std::abs(v) / peak : 0.0;
      const int fade = static_cast<int>(std::lround(255.0 * (1.0 - t)));
      const std::string fill = v > 0 ? hex_color(255, fade, fade) : v < 0 ? hex_color(fade, fade, 255) : "#ffffff";
      out << "<rect x=\"" << c * kCell << "\" y=\"" << r * kCell << "\" width=\"" << kCell << "\" height=\"" << kCell
          << "\" fill=\"" << fill << "\"/>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace den
