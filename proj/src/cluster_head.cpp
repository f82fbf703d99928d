#include "den/cluster_head.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

namespace den {

namespace {

int argmax_row(const Matrix& m, Eigen::Index r) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c)
    if (m(r, c) > m(r, best)) best = c;
  return static_cast<int>(best);
}

std::vector<int> to_targets(const std::vector<int>& labels, const std::vector<int>& label_map) {
  std::map<int, int> index;
  for (std::size_t c = 0; c < label_map.size(); ++c) index[label_map[c]] = static_cast<int>(c);
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    const auto it = index.find(l);
    if (it == index.end()) throw DataError("label " + std::to_string(l) + " is not a cluster of this model");
    out.push_back(it->second);
  }
  return out;
}

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& order, std::size_t start, std::size_t end) {
  Matrix out(static_cast<Eigen::Index>(end - start), x.cols());
  for (std::size_t q = start; q < end; ++q) out.row(static_cast<Eigen::Index>(q - start)) = x.row(static_cast<Eigen::Index>(order[q]));
  return out;
}

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double read_hex(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw DataError("truncated cluster checkpoint");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) throw DataError("malformed checkpoint value '" + tok + "'");
  return v;
}

void expect(std::istream& in, const std::string& want) {
  std::string got;
  if (!(in >> got) || got != want)
    throw DataError("malformed cluster checkpoint: expected '" + want + "', got '" + got + "'");
}

}  // namespace

ClusterHead::ClusterHead(const ClusterHead& other)
    : mean(other.mean),
      scale(other.scale),
      net(other.net ? std::make_unique<nn::DenseNet>(*other.net) : nullptr),
      label_map(other.label_map) {}

ClusterHead& ClusterHead::operator=(const ClusterHead& other) {
  if (this != &other) {
    mean = other.mean;
    scale = other.scale;
    net = other.net ? std::make_unique<nn::DenseNet>(*other.net) : nullptr;
    label_map = other.label_map;
  }
  return *this;
}

Matrix ClusterHead::normalize(const Matrix& points) const {
  if (points.cols() != mean.size())
    throw std::invalid_argument("head expects " + std::to_string(mean.size()) + "-dimensional points, got " +
                                std::to_string(points.cols()));
  return ((points.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

Matrix ClusterHead::logits(const Matrix& points) const {
  if (!net) throw std::invalid_argument("head has no network");
  return net->infer(normalize(points));
}

HeadTraining train_head(const Matrix& points, const std::vector<int>& labels, const RunConfig& cfg,
                        const Rng& rng) {
  if (static_cast<Eigen::Index>(labels.size()) != points.rows())
    throw DataError("train_head: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(points.rows()) + " points");
  if (points.rows() == 0) throw DataError("train_head: no points");

  HeadTraining out;
  ClusterHead& head = out.head;
  for (int l : labels) head.label_map.push_back(l);
  std::sort(head.label_map.begin(), head.label_map.end());
  head.label_map.erase(std::unique(head.label_map.begin(), head.label_map.end()), head.label_map.end());
  const std::vector<int> targets = to_targets(labels, head.label_map);

  const auto n = static_cast<double>(points.rows());
  head.mean = points.colwise().mean().transpose();
  head.scale.resize(points.cols());
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    const double sd = std::sqrt((points.col(c).array() - head.mean[c]).square().sum() / n);
    head.scale[c] = sd > kStdFloor ? sd : 1.0;
  }

  std::vector<nn::LayerSpec> layers;
  for (int h : parse_layer_sizes(cfg.head_hidden)) layers.push_back({h, nn::Activation::kSelu});
  layers.push_back({head.n_clusters(), nn::Activation::kLinear});
  head.net = std::make_unique<nn::DenseNet>(static_cast<int>(points.cols()), std::move(layers));
  Rng init = rng.child("head-init");
  head.net->init(init);

  out.trivial = head.n_clusters() == 1;
  if (!out.trivial) {
    const Matrix x = head.normalize(points);
    Rng shuffler = rng.child("head-shuffle");
    nn::Adam adam(cfg.lr);
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    nn::ForwardCache cache;
    Matrix g;
    Vector grad;
    std::vector<int> bt;
    for (int epoch = 0; epoch < cfg.epochs_head; ++epoch) {
      shuffler.shuffle(order);
      double epoch_loss = 0.0;
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t end = std::min(order.size(), start + batch);
        bt.clear();
        for (std::size_t q = start; q < end; ++q) bt.push_back(targets[order[q]]);
        const Matrix logits = head.net->forward(gather_rows(x, order, start, end), &cache);
        const double loss = nn::softmax_cross_entropy(logits, bt, &g);
        if (!std::isfinite(loss)) throw NumericalError("head loss diverged at epoch " + std::to_string(epoch));
        grad.setZero(head.net->num_params());
        head.net->backward(cache, g, grad);
        adam.step(*head.net, grad);
        epoch_loss += loss * static_cast<double>(end - start);
      }
      out.loss_history.push_back(epoch_loss / n);
    }
  }

  const Matrix logits = head.logits(points);
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r)
    if (argmax_row(logits, r) == targets[static_cast<std::size_t>(r)]) ++hits;
  out.train_accuracy = static_cast<double>(hits) / n;
  return out;
}

Prediction predict_cluster(const ClusterModel& model, const Matrix& samples) {
  if (!model.encoder.encoder) throw std::invalid_argument("cluster model has no encoder");
  if (samples.cols() != model.input_dim())
    throw std::invalid_argument("samples have " + std::to_string(samples.cols()) + " features, model expects " +
                                std::to_string(model.input_dim()));
  Prediction out;
  out.probabilities = nn::softmax(model.head.logits(embed(model.encoder, samples)));
  out.cluster.reserve(static_cast<std::size_t>(samples.rows()));
  for (Eigen::Index r = 0; r < out.probabilities.rows(); ++r)
    out.cluster.push_back(model.head.label_map[static_cast<std::size_t>(argmax_row(out.probabilities, r))]);
  return out;
}

double training_accuracy(const ClusterModel& model, const Matrix& samples, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != samples.rows())
    throw DataError("label count does not match sample count");
  if (labels.empty()) return 0.0;
  const Prediction p = predict_cluster(model, samples);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (p.cluster[i] == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

FinetuneReport finetune_end_to_end(ClusterModel& model, const Dataset& data, const std::vector<int>& labels,
                                   const RunConfig& cfg, const Rng& rng) {
  if (!model.encoder.encoder || !model.head.net) throw std::invalid_argument("finetune: model is incomplete");
  if (static_cast<Eigen::Index>(labels.size()) != data.n())
    throw DataError("finetune: label count does not match sample count");
  const std::vector<int> targets = to_targets(labels, model.head.label_map);

  FinetuneReport report;
  report.accuracy_before = training_accuracy(model, data.samples, labels);
  report.accuracy_after = report.accuracy_before;
  if (model.n_clusters() == 1 || cfg.epochs_finetune == 0) return report;

  nn::Network& enc = *model.encoder.encoder;
  nn::DenseNet& head = *model.head.net;
  const Vector enc_saved = enc.params();
  const Vector head_saved = head.params();
  const Eigen::Index pe = enc.num_params();
  const Eigen::Index ph = head.num_params();
  const RowVector inv_scale = model.head.scale.cwiseInverse().transpose();

  Vector theta(pe + ph);
  theta << enc_saved, head_saved;
  Vector grad(pe + ph);
  nn::Adam adam(cfg.lr_finetune);
  Rng shuffler = rng.child("finetune");
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  nn::ForwardCache enc_cache;
  nn::ForwardCache head_cache;
  std::vector<int> bt;
  Matrix g;

  for (int epoch = 0; epoch < cfg.epochs_finetune; ++epoch) {
    shuffler.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      bt.clear();
      for (std::size_t q = start; q < end; ++q) bt.push_back(targets[order[q]]);
      const Matrix z = enc.forward(gather_rows(data.samples, order, start, end), &enc_cache);
      const Matrix logits = head.forward(model.head.normalize(z), &head_cache);
      const double loss = nn::softmax_cross_entropy(logits, bt, &g);
      if (!std::isfinite(loss)) throw NumericalError("fine-tune loss diverged at epoch " + std::to_string(epoch));
      grad.setZero();
      Matrix gz = head.backward(head_cache, g, grad.tail(ph));
      gz.array().rowwise() *= inv_scale.array();
      enc.backward(enc_cache, gz, grad.head(pe));
      adam.step(theta, grad);
      enc.mutable_params() = theta.head(pe);
      head.mutable_params() = theta.tail(ph);
      epoch_loss += loss * static_cast<double>(end - start);
    }
    report.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
  }

  report.accuracy_after = training_accuracy(model, data.samples, labels);
  if (report.accuracy_after < report.accuracy_before - kFinetuneTolerance) {
    enc.mutable_params() = enc_saved;
    head.mutable_params() = head_saved;
    report.reverted = true;
    report.accuracy_after = report.accuracy_before;
  }
  return report;
}

void save_cluster_model(const ClusterModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  const ClusterHead& h = model.head;
  out << "den-checkpoint 1\ncluster-model\ntrivial " << (model.trivial ? 1 : 0) << "\nclusters "
      << h.label_map.size() << '\n';
  for (int l : h.label_map) out << l << '\n';
  out << "normalization " << h.mean.size() << '\n';
  for (Eigen::Index i = 0; i < h.mean.size(); ++i) out << hexfloat(h.mean[i]) << ' ' << hexfloat(h.scale[i]) << '\n';
  out << "encoder\n";
  model.encoder.encoder->save(out);
  out << "head\n";
  h.net->save(out);
}

ClusterModel load_cluster_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "den-checkpoint" || version != 1)
    throw DataError(path.string() + ": not a den checkpoint");
  expect(in, "cluster-model");
  ClusterModel model;
  expect(in, "trivial");
  int trivial = 0;
  std::size_t clusters = 0;
  in >> trivial;
  expect(in, "clusters");
  if (!(in >> clusters) || clusters == 0) throw DataError(path.string() + ": bad cluster count");
  model.trivial = trivial != 0;
  model.head.label_map.resize(clusters);
  for (auto& l : model.head.label_map)
    if (!(in >> l)) throw DataError(path.string() + ": truncated label map");
  expect(in, "normalization");
  Eigen::Index dim = 0;
  if (!(in >> dim) || dim < 1) throw DataError(path.string() + ": bad normalization size");
  model.head.mean.resize(dim);
  model.head.scale.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    model.head.mean[i] = read_hex(in);
    model.head.scale[i] = read_hex(in);
  }
  expect(in, "encoder");
  model.encoder = EmbeddingModel(nn::load_network(in));
  expect(in, "head");
  auto head = nn::load_network(in);
  auto* dense = dynamic_cast<nn::DenseNet*>(head.get());
  if (!dense) throw DataError(path.string() + ": head must be a dense network");
  head.release();
  model.head.net.reset(dense);
  if (model.head.net->input_dim() != dim || model.head.net->output_dim() != static_cast<int>(clusters) ||
      model.encoder.embed_dim() != dim)
    throw DataError(path.string() + ": inconsistent cluster checkpoint shapes");
  return model;
}

}  // namespace den
