// den: command-line driver for the embedding / clustering / explanation stages.

#include "den/cluster_head.hpp"
#include "den/config.hpp"
#include "den/data_io.hpp"
#include "den/explain.hpp"
#include "den/fdist_loss.hpp"
#include "den/metrics.hpp"
#include "den/pair_graph.hpp"
#include "den/pipeline.hpp"
#include "den/plot.hpp"
#include "den/siamese.hpp"
#include "den/spectral.hpp"
#include "den/synthetic.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace den;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out_dir;
  std::vector<std::string> overrides;  // key=value
};

struct DataOptions {
  std::string data;
  bool has_labels = false;
  std::string format;
  std::string labels_path;
  std::string standardize;
  int vocab_size = 0;
};

void add_data_options(CLI::App* sub, DataOptions& d, bool required) {
  auto* opt = sub->add_option("--data", d.data, "input samples (CSV, or IDX images)");
  if (required) opt->required();
  sub->add_flag("--has-labels", d.has_labels, "last CSV column holds labels");
  sub->add_option("--format", d.format, "csv or idx");
  sub->add_option("--labels-path", d.labels_path, "IDX label file");
  sub->add_option("--standardize", d.standardize, "auto, on or off");
  sub->add_option("--vocab-size", d.vocab_size, "treat the CSV as token ids in [0, vocab)");
}

RunConfig build_config(const GlobalOptions& g, const DataOptions* d) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (d) {
    if (!d->data.empty()) cfg.data = d->data;
    if (d->has_labels) cfg.has_labels = true;
    if (!d->format.empty()) cfg.format = d->format;
    if (!d->labels_path.empty()) cfg.labels_path = d->labels_path;
    if (!d->standardize.empty()) cfg.standardize = d->standardize;
    if (d->vocab_size > 0) cfg.vocab_size = d->vocab_size;
  }
  cfg.validate();
  return cfg;
}

fs::path out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return fs::path(cfg.out_dir) / name;
}

void write_history(const std::vector<double>& h, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < h.size(); ++e) out << e << ',' << format_double(h[e]) << '\n';
}

std::vector<int> parse_indices(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ConfigError("--samples: '" + tok + "' is not an index");
    }
  }
  return out;
}

int run_embed(const GlobalOptions& g, const DataOptions& d) {
  const RunConfig cfg = build_config(g, &d);
  const Dataset data = load_dataset(cfg);
  const Rng root(cfg.seed);
  const PairGraph graph = build_pair_graph(data.samples, cfg, root.child("graph"));
  write_pair_graph(graph, out_path(cfg, "pairs.txt"));
  const TrainedEmbedding t = train_embedder(data, graph, cfg, root.child("embed"));
  write_indexed_matrix(t.result.points, "dim_", out_path(cfg, "embedding.csv"));
  write_history(t.result.loss_history, out_path(cfg, "embed_loss.csv"));
  save_embedding_model(t.model, out_path(cfg, "encoder.ckpt"));
  std::cout << "embedded " << data.n() << " samples into " << t.result.points.cols() << " dimensions; final loss "
            << t.result.loss_history.back() << '\n';
  return 0;
}

int run_cluster(const GlobalOptions& g, const std::string& embedding, const std::string& pairs) {
  const RunConfig cfg = build_config(g, nullptr);
  const Matrix points = read_indexed_matrix(embedding);
  std::vector<IndexPair> positives;
  if (!pairs.empty()) {
    positives = read_pair_graph(pairs).positives;
  } else {
    const int k = std::min(cfg.k, static_cast<int>(points.rows()) - 1);
    positives = build_positive_pairs(build_knn(points, k), std::max(1, std::min(cfg.j, k - 1)));
  }
  const ClusterResult r = cluster(points, positives, SpectralConfig::from(cfg), Rng(cfg.seed).child("cluster"));
  write_labels(r.labels.labels, out_path(cfg, "labels.csv"));
  std::cout << "n_clusters " << r.labels.n_clusters << " (k_raw " << r.k_raw << ", d_avg " << r.labels.d_avg << ")\n";
  return 0;
}

int run_fit_head(const GlobalOptions& g, const std::string& embedding, const std::string& labels,
                 const std::string& encoder) {
  const RunConfig cfg = build_config(g, nullptr);
  const Matrix points = read_indexed_matrix(embedding);
  const std::vector<int> y = read_label_column(labels);
  HeadTraining h = train_head(points, y, cfg, Rng(cfg.seed).child("head"));
  ClusterModel model;
  model.encoder = load_embedding_model(encoder);
  model.head = std::move(h.head);
  model.trivial = h.trivial;
  save_cluster_model(model, out_path(cfg, "cluster_model.ckpt"));
  write_history(h.loss_history, out_path(cfg, "head_loss.csv"));
  std::cout << "head training accuracy " << h.train_accuracy << (h.trivial ? " (trivial: single cluster)" : "")
            << '\n';
  return 0;
}

int run_finetune(const GlobalOptions& g, const DataOptions& d, const std::string& labels, const std::string& model_path) {
  const RunConfig cfg = build_config(g, &d);
  const Dataset data = load_dataset(cfg);
  ClusterModel model = load_cluster_model(model_path);
  const std::vector<int> y = read_label_column(labels);
  const FinetuneReport r = finetune_end_to_end(model, data, y, cfg, Rng(cfg.seed).child("finetune"));
  save_cluster_model(model, out_path(cfg, "cluster_model_finetuned.ckpt"));
  write_history(r.loss_history, out_path(cfg, "finetune_loss.csv"));
  write_labels(predict_cluster(model, data.samples).cluster, out_path(cfg, "predictions.csv"));
  std::cout << "accuracy before " << r.accuracy_before << ", after " << r.accuracy_after
            << (r.reverted ? " (reverted: accuracy dropped beyond tolerance)" : "") << '\n';
  return 0;
}

int run_explain(const GlobalOptions& g, const DataOptions& d, const std::string& model_path,
                const std::string& samples, int image_width, int image_height) {
  const RunConfig cfg = build_config(g, &d);
  const Dataset data = load_dataset(cfg);
  const ClusterModel model = load_cluster_model(model_path);
  std::vector<int> idx = samples.empty() ? std::vector<int>{} : parse_indices(samples);
  if (samples.empty())
    for (int i = 0; i < std::min(cfg.explain_samples, data.n()); ++i) idx.push_back(i);
  Matrix rows(static_cast<Eigen::Index>(idx.size()), data.d());
  for (std::size_t q = 0; q < idx.size(); ++q) {
    if (idx[q] < 0 || idx[q] >= data.n()) throw DataError("sample index " + std::to_string(idx[q]) + " out of range");
    rows.row(static_cast<Eigen::Index>(q)) = data.samples.row(idx[q]);
  }
  const Rng rng = Rng(cfg.seed).child("explain");
  const Matrix background = select_background(data.samples, cfg.background_size, rng);
  std::vector<Attribution> a = explain_batch(model, rows, background, cfg, rng);
  for (std::size_t q = 0; q < a.size(); ++q) a[q].sample_index = idx[q];
  write_attributions(a, out_path(cfg, "attributions.csv"));
  if (image_width > 0 && image_height > 0)
    for (const auto& at : a)
      write_attribution_svg(at, image_width, image_height,
                            out_path(cfg, "attribution_" + std::to_string(at.sample_index) + ".svg"));
  std::cout << "explained " << a.size() << " samples\n";
  return 0;
}

int run_metrics(const GlobalOptions& g, const std::string& pred, const std::string& truth) {
  build_config(g, nullptr);
  const std::vector<int> p = read_label_column(pred);
  const std::vector<int> t = read_label_column(truth);
  if (p.size() != t.size()) throw DataError("prediction and truth files differ in length");
  const auto acc = metrics::accuracy(p, t);
  if (acc)
    std::cout << "ACC " << *acc << '\n';
  else
    std::cout << "ACC n/a (cluster counts differ)\n";
  std::cout << "NMI " << metrics::nmi(p, t) << '\n';
  std::cout << "ARI " << metrics::adjusted_rand_index(p, t) << '\n';
  return 0;
}

int run_check_loss(int n, double d2_max, int steps, const std::string& out) {
  if (n < 1 || steps < 1 || !(d2_max > 0)) throw ConfigError("check-loss: need n >= 1, steps >= 1, d2-max > 0");
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw DataError("cannot write " + out);
  }
  std::ostream& os = out.empty() ? std::cout : file;
  os << "d2,n,exact,laplace,grad,fd_grad\n";
  for (int s = 1; s <= steps; ++s) {
    const double d2 = d2_max * s / steps;
    const double h = 1e-6 * std::max(1.0, d2);
    const double fd = (fdist::f_cdf_exact(d2 + h, n) - fdist::f_cdf_exact(d2 - h, n)) / (2 * h);
    os << format_double(d2) << ',' << n << ',' << format_double(fdist::f_cdf_exact(d2, n)) << ','
       << format_double(fdist::f_cdf_laplace(d2, n)) << ',' << format_double(fdist::f_cdf_grad(d2, n)) << ','
       << format_double(fd) << '\n';
  }
  return 0;
}

int run_pipeline_cmd(const GlobalOptions& g, const DataOptions& d) {
  const RunConfig cfg = build_config(g, &d);
  const PipelineManifest m = run_pipeline(cfg);
  std::cout << "n_clusters " << m.n_clusters << " (k_raw " << m.k_raw << ")\n";
  if (m.spectral_nmi) {
    std::cout << "spectral ACC " << (m.spectral_acc ? std::to_string(*m.spectral_acc) : "n/a") << " NMI "
              << *m.spectral_nmi << '\n';
    std::cout << "head ACC " << (m.head_acc ? std::to_string(*m.head_acc) : "n/a") << " NMI " << *m.head_nmi << '\n';
  }
  std::cout << "manifest " << m.artifacts.at("manifest").string() << '\n';
  return 0;
}

int run_make_blobs(const GlobalOptions& g, int clusters, int per_cluster, int dim, double spread, const std::string& out) {
  const RunConfig cfg = build_config(g, nullptr);
  const Dataset blobs = make_blobs(clusters, per_cluster, dim, spread, Rng(cfg.seed).child("blobs"));
  const fs::path path = out.empty() ? out_path(cfg, "blobs.csv") : fs::path(out);
  write_csv(blobs, path);
  std::cout << "wrote " << blobs.n() << " samples to " << path.string() << '\n';
  return 0;
}

int run_plot(const GlobalOptions& g, const std::string& embedding, const std::string& labels, const std::string& out,
             const std::string& title) {
  const RunConfig cfg = build_config(g, nullptr);
  const Matrix points = read_indexed_matrix(embedding);
  const std::vector<int> y = labels.empty() ? std::vector<int>{} : read_label_column(labels);
  plot_scatter(points, y, out.empty() ? out_path(cfg, "embedding.svg") : fs::path(out), title);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"den: differentiating embedding networks"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "random seed (overrides the config)");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "output directory (overrides the config)");
  app.add_option("--set", g.overrides, "override any config key: --set key=value");
  app.fallthrough();

  DataOptions data_opts;
  std::string embedding, pairs, labels, encoder, model, samples, pred, truth, out, title;
  int image_width = 0, image_height = 0;
  int loss_n = 2, loss_steps = 100;
  double loss_d2_max = 10.0;
  int blob_clusters = 5, blob_per = 200, blob_dim = 20;
  double blob_spread = 1.0;

  auto* embed_cmd = app.add_subcommand("embed", "build the pair graph and train the Siamese encoder");
  add_data_options(embed_cmd, data_opts, false);

  auto* cluster_cmd = app.add_subcommand("cluster", "spectral clustering of an embedding");
  cluster_cmd->add_option("--embedding", embedding, "embedding CSV")->required();
  cluster_cmd->add_option("--pairs", pairs, "pair graph dump (positives set the bandwidth)");

  auto* head_cmd = app.add_subcommand("fit-head", "train the cluster head on an embedding");
  head_cmd->add_option("--embedding", embedding, "embedding CSV")->required();
  head_cmd->add_option("--labels", labels, "cluster labels CSV")->required();
  head_cmd->add_option("--encoder", encoder, "encoder checkpoint")->required();

  auto* finetune_cmd = app.add_subcommand("finetune", "fine-tune encoder and head end to end");
  add_data_options(finetune_cmd, data_opts, false);
  finetune_cmd->add_option("--labels", labels, "cluster labels CSV")->required();
  finetune_cmd->add_option("--model", model, "cluster model checkpoint")->required();

  auto* explain_cmd = app.add_subcommand("explain", "Kernel SHAP attributions of cluster assignments");
  add_data_options(explain_cmd, data_opts, false);
  explain_cmd->add_option("--model", model, "cluster model checkpoint")->required();
  explain_cmd->add_option("--samples", samples, "comma-separated sample indices");
  explain_cmd->add_option("--image-width", image_width, "write heat maps for width x height images");
  explain_cmd->add_option("--image-height", image_height);

  auto* metrics_cmd = app.add_subcommand("metrics", "ACC, NMI and ARI of a labeling");
  metrics_cmd->add_option("--pred", pred, "predicted labels CSV")->required();
  metrics_cmd->add_option("--true", truth, "true labels CSV")->required();

  auto* loss_cmd = app.add_subcommand("check-loss", "tabulate the pair probability and its gradient");
  loss_cmd->add_option("--n", loss_n, "embedding dimension");
  loss_cmd->add_option("--d2-max", loss_d2_max, "largest squared distance");
  loss_cmd->add_option("--steps", loss_steps, "number of rows");
  loss_cmd->add_option("--out", out, "CSV path (default stdout)");

  auto* pipeline_cmd = app.add_subcommand("pipeline", "run every stage and write a manifest");
  add_data_options(pipeline_cmd, data_opts, false);

  auto* blobs_cmd = app.add_subcommand("make-blobs", "write a synthetic Gaussian blob dataset");
  blobs_cmd->add_option("--clusters", blob_clusters);
  blobs_cmd->add_option("--per-cluster", blob_per);
  blobs_cmd->add_option("--dim", blob_dim);
  blobs_cmd->add_option("--spread", blob_spread);
  blobs_cmd->add_option("--out", out, "CSV path (default <out-dir>/blobs.csv)");

  auto* plot_cmd = app.add_subcommand("plot", "SVG scatter plot of a 2-D embedding");
  plot_cmd->add_option("--embedding", embedding, "embedding CSV")->required();
  plot_cmd->add_option("--labels", labels, "labels CSV for colors");
  plot_cmd->add_option("--out", out, "SVG path (default <out-dir>/embedding.svg)");
  plot_cmd->add_option("--title", title);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    set_num_threads(g.threads);
    if (*embed_cmd) return run_embed(g, data_opts);
    if (*cluster_cmd) return run_cluster(g, embedding, pairs);
    if (*head_cmd) return run_fit_head(g, embedding, labels, encoder);
    if (*finetune_cmd) return run_finetune(g, data_opts, labels, model);
    if (*explain_cmd) return run_explain(g, data_opts, model, samples, image_width, image_height);
    if (*metrics_cmd) return run_metrics(g, pred, truth);
    if (*loss_cmd) return run_check_loss(loss_n, loss_d2_max, loss_steps, out);
    if (*pipeline_cmd) return run_pipeline_cmd(g, data_opts);
    if (*blobs_cmd) return run_make_blobs(g, blob_clusters, blob_per, blob_dim, blob_spread, out);
    if (*plot_cmd) return run_plot(g, embedding, labels, out, title);
  } catch (const ConfigError& e) {
    std::cerr << "den: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "den: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "den: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "den: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "den: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "den: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
