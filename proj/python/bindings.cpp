#include "den/cluster_head.hpp"
#include "den/explain.hpp"
#include "den/fdist_loss.hpp"
#include "den/metrics.hpp"
#include "den/pair_graph.hpp"
#include "den/pipeline.hpp"
#include "den/plot.hpp"
#include "den/siamese.hpp"
#include "den/spectral.hpp"
#include "den/synthetic.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace den;

namespace {

RunConfig make_config(const py::dict& overrides) {
  RunConfig cfg;
  for (const auto& [key, value] : overrides) {
    std::string text;
    if (py::isinstance<py::bool_>(value))
      text = value.cast<bool>() ? "true" : "false";
    else
      text = py::str(value).cast<std::string>();
    cfg.set(key.cast<std::string>(), text);
  }
  cfg.validate();
  return cfg;
}

Dataset make_dataset(const Matrix& x, const std::optional<std::vector<int>>& labels) {
  Dataset d;
  d.samples = x;
  d.labels = labels;
  d.validate();
  return d;
}

Matrix pairs_to_array(const std::vector<IndexPair>& pairs) {
  Matrix out(static_cast<Eigen::Index>(pairs.size()), 2);
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    out(static_cast<Eigen::Index>(q), 0) = pairs[q].first;
    out(static_cast<Eigen::Index>(q), 1) = pairs[q].second;
  }
  return out;
}

std::vector<IndexPair> array_to_pairs(const Eigen::Matrix<int, Eigen::Dynamic, 2>& a) {
  std::vector<IndexPair> out;
  for (Eigen::Index q = 0; q < a.rows(); ++q) out.emplace_back(a(q, 0), a(q, 1));
  return out;
}

py::dict attribution_dict(const Attribution& a) {
  py::dict d;
  d["sample_index"] = a.sample_index;
  d["cluster"] = a.cluster_id;
  d["base_value"] = a.base_value;
  d["output"] = a.output;
  d["phi"] = a.phi;
  return d;
}

}  // namespace

PYBIND11_MODULE(_den, m) {
  m.doc() = "Differentiating embedding networks: pair graph, Siamese embedding, spectral clustering, Kernel SHAP.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("f_cdf_exact", &fdist::f_cdf_exact, py::arg("d2"), py::arg("n"));
  m.def("f_cdf_laplace", &fdist::f_cdf_laplace, py::arg("d2"), py::arg("n"));
  m.def("f_cdf_grad", &fdist::f_cdf_grad, py::arg("d2"), py::arg("n"));

  m.def("config_keys", &RunConfig::keys);
  m.def(
      "config_text", [](const py::dict& overrides) { return make_config(overrides).to_text(); },
      py::arg("overrides") = py::dict(), "Full config with the given overrides, as key = value lines.");

  m.def(
      "make_blobs",
      [](int clusters, int per_cluster, int dim, double spread, std::uint64_t seed) {
        Matrix centers;
        const Dataset d = make_blobs(clusters, per_cluster, dim, spread, Rng(seed), &centers);
        return py::make_tuple(d.samples, *d.labels, centers);
      },
      py::arg("n_clusters"), py::arg("points_per_cluster"), py::arg("dim"), py::arg("spread") = 1.0,
      py::arg("seed") = 0, "Returns (samples, labels, centers).");

  m.def(
      "standardize", [](const Matrix& x) { return standardize(make_dataset(x, std::nullopt)).samples; },
      py::arg("samples"));

  m.def(
      "pair_graph",
      [](const Matrix& x, const py::dict& config) {
        const RunConfig cfg = make_config(config);
        const PairGraph g = build_pair_graph(x, cfg, Rng(cfg.seed).child("graph"));
        return py::make_tuple(pairs_to_array(g.positives), pairs_to_array(g.negatives));
      },
      py::arg("samples"), py::arg("config") = py::dict(), "Returns (positives, negatives) as (M, 2) arrays.");

  m.def(
      "embed",
      [](const Matrix& x, const py::dict& config) {
        const RunConfig cfg = make_config(config);
        const Rng root(cfg.seed);
        const Dataset data = make_dataset(x, std::nullopt);
        const PairGraph g = build_pair_graph(x, cfg, root.child("graph"));
        TrainedEmbedding t;
        {
          py::gil_scoped_release release;
          t = train_embedder(data, g, cfg, root.child("embed"));
        }
        return py::make_tuple(t.result.points, t.result.loss_history);
      },
      py::arg("samples"), py::arg("config") = py::dict(),
      "Builds the pair graph and trains the Siamese encoder. Returns (embedding, loss_history).");

  m.def(
      "cluster",
      [](const Matrix& points, const Eigen::Matrix<int, Eigen::Dynamic, 2>& positives, const py::dict& config) {
        const RunConfig cfg = make_config(config);
        const ClusterResult r =
            cluster(points, array_to_pairs(positives), SpectralConfig::from(cfg), Rng(cfg.seed).child("cluster"));
        return py::make_tuple(r.labels.labels, r.labels.n_clusters, r.k_raw);
      },
      py::arg("points"), py::arg("positives"), py::arg("config") = py::dict(),
      "Spectral clustering. Returns (labels, n_clusters, k_raw).");

  m.def(
      "run_pipeline",
      [](const Matrix& x, const std::optional<std::vector<int>>& labels, const py::dict& config) {
        const RunConfig cfg = make_config(config);
        Dataset data = make_dataset(x, labels);
        if (cfg.standardize != "off") data = standardize(data);
        PipelineManifest manifest;
        {
          py::gil_scoped_release release;
          manifest = run_pipeline(data, cfg);
        }
        return py::module_::import("json").attr("loads")(manifest.to_json());
      },
      py::arg("samples"), py::arg("labels") = py::none(), py::arg("config") = py::dict(),
      "Runs every stage, writing artifacts under config['out_dir']. Returns the manifest as a dict.");

  m.def(
      "predict",
      [](const std::filesystem::path& model_path, const Matrix& samples) {
        const ClusterModel model = load_cluster_model(model_path);
        const Prediction p = predict_cluster(model, samples);
        return py::make_tuple(p.cluster, p.probabilities);
      },
      py::arg("model_path"), py::arg("samples"), "Returns (clusters, probabilities).");

  m.def(
      "kernel_shap",
      [](const std::function<Vector(const Matrix&)>& f, const Vector& sample, const Matrix& background, int budget,
         std::uint64_t seed) { return attribution_dict(kernel_shap(f, sample, background, budget, Rng(seed))); },
      py::arg("f"), py::arg("sample"), py::arg("background"), py::arg("n_coalitions"), py::arg("seed") = 0,
      "Kernel SHAP of a batch function f: (rows, D) -> (rows,).");

  m.def(
      "explain",
      [](const std::filesystem::path& model_path, const Matrix& samples, const Matrix& background,
         const py::dict& config) {
        const RunConfig cfg = make_config(config);
        const ClusterModel model = load_cluster_model(model_path);
        std::vector<Attribution> out;
        {
          py::gil_scoped_release release;
          out = explain_batch(model, samples, background, cfg, Rng(cfg.seed).child("explain"));
        }
        py::list result;
        for (const auto& a : out) result.append(attribution_dict(a));
        return result;
      },
      py::arg("model_path"), py::arg("samples"), py::arg("background"), py::arg("config") = py::dict());

  m.def(
      "accuracy",
      [](const std::vector<int>& pred, const std::vector<int>& truth) { return metrics::accuracy(pred, truth); },
      py::arg("pred"), py::arg("truth"), "Best-bijection accuracy, or None when the cluster counts differ.");
  m.def("nmi", &metrics::nmi, py::arg("pred"), py::arg("truth"));
  m.def("adjusted_rand_index", &metrics::adjusted_rand_index, py::arg("pred"), py::arg("truth"));

  m.def("scatter_svg", &scatter_svg, py::arg("points"), py::arg("labels"), py::arg("title") = "");
  m.def("set_num_threads", &set_num_threads, py::arg("threads"));
}
