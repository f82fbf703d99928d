#include "den/pipeline.hpp"

#include "den/cluster_head.hpp"
#include "den/explain.hpp"
#include "den/metrics.hpp"
#include "den/pair_graph.hpp"
#include "den/plot.hpp"
#include "den/siamese.hpp"
#include "den/spectral.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace den {

namespace fs = std::filesystem;

namespace {

// Runs one stage, records its wall clock and prefixes errors with its name.
template <typename Fn>
void stage(PipelineManifest& m, const std::string& name, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  const std::string tag = "[" + name + "] ";
  try {
    fn();
  } catch (const ConfigError& e) {
    throw ConfigError(tag + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(tag + e.what());
  } catch (const DataError& e) {
    throw DataError(tag + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(tag + e.what());
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  m.stage_seconds.emplace_back(name, elapsed.count());
}

void write_loss_history(const std::vector<double>& history, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < history.size(); ++e) out << e << ',' << format_double(history[e]) << '\n';
}

int image_side(int d) {
  const auto side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d))));
  return side > 1 && side * side == d ? side : 0;
}

}  // namespace

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.data.empty()) throw ConfigError("config key 'data' is required");
  Dataset data;
  if (cfg.format == "csv") {
    data = load_csv(cfg.data, cfg.has_labels);
  } else if (cfg.format == "idx") {
    if (cfg.labels_path.empty()) throw ConfigError("config key 'labels_path' is required for idx data");
    data = load_idx(cfg.data, cfg.labels_path);
  } else {
    throw ConfigError("config key 'format' must be csv or idx, got '" + cfg.format + "'");
  }
  if (cfg.vocab_size > 0) data = as_tokens(std::move(data), cfg.vocab_size);
  const bool dense = data.kind == DataKind::kDense;
  if (cfg.standardize == "on" && !dense) throw ConfigError("config key 'standardize': token data cannot be standardized");
  if (cfg.standardize == "on" || (cfg.standardize == "auto" && dense)) data = standardize(data);
  return data;
}

std::string PipelineManifest::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = config.seed;
  nlohmann::ordered_json paths = nlohmann::ordered_json::object();
  for (const auto& [name, path] : artifacts) paths[name] = path.string();
  j["artifacts"] = paths;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  std::istringstream lines(config.to_text());
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) cfg[line.substr(0, eq)] = line.substr(eq + 3);
  }
  j["config"] = cfg;
  nlohmann::ordered_json stages = nlohmann::ordered_json::object();
  for (const auto& [name, sec] : stage_seconds) stages[name] = sec;
  j["stage_seconds"] = stages;
  j["n_clusters"] = n_clusters;
  j["k_raw"] = k_raw;
  j["head_accuracy"] = head_accuracy;
  j["finetune_accuracy"] = finetune_accuracy;
  j["finetune_reverted"] = finetune_reverted;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  j["metrics"] = {{"spectral_acc", opt(spectral_acc)},
                  {"spectral_nmi", opt(spectral_nmi)},
                  {"head_acc", opt(head_acc)},
                  {"head_nmi", opt(head_nmi)}};
  return j.dump(2) + "\n";
}

PipelineManifest run_pipeline(const RunConfig& cfg) {
  PipelineManifest m;
  Dataset data;
  stage(m, "load", [&] {
    cfg.validate();
    data = load_dataset(cfg);
  });
  PipelineManifest rest = run_pipeline(data, cfg);
  rest.stage_seconds.insert(rest.stage_seconds.begin(), m.stage_seconds.front());
  // Rewrite the manifest so it includes the load stage.
  std::ofstream(rest.artifacts.at("manifest")) << rest.to_json();
  return rest;
}

PipelineManifest run_pipeline(const Dataset& data, const RunConfig& cfg) {
  PipelineManifest m;
  m.config = cfg;
  const Rng root(cfg.seed);
  const fs::path dir = cfg.out_dir;
  auto artifact = [&](const std::string& name, const std::string& file) {
    m.artifacts[name] = dir / file;
    return dir / file;
  };

  PairGraph graph;
  TrainedEmbedding trained;
  ClusterResult clusters;
  ClusterModel model;

  stage(m, "setup", [&] {
    cfg.validate();
    data.validate();
    fs::create_directories(dir);
    std::ofstream(artifact("config", "config.txt")) << cfg.to_text();
  });
  stage(m, "graph", [&] {
    graph = build_pair_graph(data.samples, cfg, root.child("graph"));
    write_pair_graph(graph, artifact("pairs", "pairs.txt"));
  });
  stage(m, "embed", [&] {
    trained = train_embedder(data, graph, cfg, root.child("embed"));
    write_indexed_matrix(trained.result.points, "dim_", artifact("embedding", "embedding.csv"));
    write_loss_history(trained.result.loss_history, artifact("embed_loss", "embed_loss.csv"));
    save_embedding_model(trained.model, artifact("encoder", "encoder.ckpt"));
  });
  stage(m, "cluster", [&] {
    clusters = cluster(trained.result.points, graph.positives, SpectralConfig::from(cfg), root.child("cluster"));
    m.n_clusters = clusters.labels.n_clusters;
    m.k_raw = clusters.k_raw;
    m.spectral_labels = clusters.labels.labels;
    write_labels(m.spectral_labels, artifact("labels", "labels.csv"));
  });
  stage(m, "fit-head", [&] {
    HeadTraining head = train_head(trained.result.points, m.spectral_labels, cfg, root.child("head"));
    m.head_accuracy = head.train_accuracy;
    model.encoder = trained.model;
    model.head = std::move(head.head);
    model.trivial = head.trivial;
    write_loss_history(head.loss_history, artifact("head_loss", "head_loss.csv"));
  });
  stage(m, "finetune", [&] {
    const FinetuneReport report = finetune_end_to_end(model, data, m.spectral_labels, cfg, root.child("finetune"));
    m.finetune_accuracy = report.accuracy_after;
    m.finetune_reverted = report.reverted;
    write_loss_history(report.loss_history, artifact("finetune_loss", "finetune_loss.csv"));
    save_cluster_model(model, artifact("model", "cluster_model.ckpt"));
    m.predicted_labels = predict_cluster(model, data.samples).cluster;
    write_labels(m.predicted_labels, artifact("predictions", "predictions.csv"));
  });
  stage(m, "explain", [&] {
    const Rng rng = root.child("explain");
    const int count = std::min(cfg.explain_samples, data.n());
    if (count == 0 || data.kind != DataKind::kDense) return;
    Rng pick = rng.child("samples");
    std::vector<int> idx = pick.sample_without_replacement(data.n(), count);
    std::sort(idx.begin(), idx.end());
    Matrix rows(count, data.d());
    for (int q = 0; q < count; ++q) rows.row(q) = data.samples.row(idx[static_cast<std::size_t>(q)]);
    const Matrix background = select_background(data.samples, cfg.background_size, rng);
    std::vector<Attribution> attributions = explain_batch(model, rows, background, cfg, rng);
    for (std::size_t q = 0; q < attributions.size(); ++q) attributions[q].sample_index = idx[q];
    write_attributions(attributions, artifact("attributions", "attributions.csv"));
    if (const int side = image_side(data.d()); side > 0)
      write_attribution_svg(attributions.front(), side, side, artifact("attribution_svg", "attribution_0.svg"));
  });
  stage(m, "plot", [&] {
    if (trained.result.points.cols() == 2)
      plot_scatter(trained.result.points, m.spectral_labels, artifact("plot", "embedding.svg"), "embedding");
  });
  stage(m, "metrics", [&] {
    if (!data.labels) return;
    m.spectral_acc = metrics::accuracy(m.spectral_labels, *data.labels);
    m.spectral_nmi = metrics::nmi(m.spectral_labels, *data.labels);
    m.head_acc = metrics::accuracy(m.predicted_labels, *data.labels);
    m.head_nmi = metrics::nmi(m.predicted_labels, *data.labels);
  });
  std::ofstream out(artifact("manifest", "manifest.json"));
  if (!out) throw DataError("cannot write manifest under " + dir.string());
  out << m.to_json();
  return m;
}

}  // namespace den
