#include "den/siamese.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace den {

EmbeddingModel make_encoder(const Dataset& data, const RunConfig& cfg, Rng& rng) {
  const auto hidden = parse_layer_sizes(cfg.hidden);
  std::unique_ptr<nn::Network> net;
  if (data.kind == DataKind::kTokens) {
    const int width = hidden.empty() ? 64 : hidden.front();
    net = std::make_unique<nn::TokenAverageNet>(data.vocab_size, data.d(), cfg.token_embed_dim, width,
                                                cfg.embed_dim);
  } else {
    std::vector<nn::LayerSpec> layers;
    for (int h : hidden) layers.push_back({h, nn::Activation::kRelu});
    layers.push_back({cfg.embed_dim, nn::Activation::kLinear});
    net = std::make_unique<nn::DenseNet>(data.d(), std::move(layers));
  }
  net->init(rng);
  return EmbeddingModel(std::move(net));
}

double siamese_batch_loss(const nn::Network& encoder, const Matrix& samples, const std::vector<IndexPair>& pairs,
                          const std::vector<char>& is_positive, Vector* grad, fdist::Forward forward) {
  const auto b = static_cast<Eigen::Index>(pairs.size());
  if (b == 0) throw std::invalid_argument("siamese_batch_loss: empty batch");
  Matrix x(2 * b, samples.cols());
  for (Eigen::Index p = 0; p < b; ++p) {
    x.row(p) = samples.row(pairs[static_cast<std::size_t>(p)].first);
    x.row(b + p) = samples.row(pairs[static_cast<std::size_t>(p)].second);
  }
  nn::ForwardCache cache;
  const Matrix z = encoder.forward(x, grad ? &cache : nullptr);
  if (!z.allFinite()) throw NumericalError("encoder produced non-finite outputs");
  const Matrix diff = z.topRows(b) - z.bottomRows(b);
  const int n = static_cast<int>(z.cols());

  double total = 0.0;
  Matrix grad_out;
  if (grad) grad_out.resize(2 * b, z.cols());
  for (Eigen::Index p = 0; p < b; ++p) {
    const double d2 = diff.row(p).squaredNorm();
    const auto pl = fdist::pair_loss(d2, n, is_positive[static_cast<std::size_t>(p)] != 0, forward);
    total += pl.loss;
    if (grad) {
      const double g = 2.0 * pl.dloss_dd2 / static_cast<double>(b);
      grad_out.row(p) = g * diff.row(p);
      grad_out.row(b + p) = -g * diff.row(p);
    }
  }
  if (grad) {
    grad->setZero(encoder.num_params());
    encoder.backward(cache, grad_out, *grad);
  }
  return total / static_cast<double>(b);
}

EmbeddingResult train_embedder(EmbeddingModel& model, const Dataset& data, const PairGraph& graph,
                               const RunConfig& cfg, const Rng& rng) {
  if (graph.positives.empty() && graph.negatives.empty()) throw DataError("pair graph has no pairs");
  if (graph.n_samples != data.n()) throw DataError("pair graph was built for a different dataset");
  auto check = [&](const IndexPair& p) {
    if (p.first < 0 || p.second < 0 || p.first >= data.n() || p.second >= data.n())
      throw DataError("pair index out of range");
  };
  std::vector<IndexPair> pairs;
  std::vector<char> positive;
  for (const auto& p : graph.positives) {
    check(p);
    pairs.push_back(p);
    positive.push_back(1);
  }
  for (const auto& p : graph.negatives) {
    check(p);
    pairs.push_back(p);
    positive.push_back(0);
  }

  Rng shuffler = rng.child("trainer");
  nn::Adam adam(cfg.lr);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  EmbeddingResult result;
  std::vector<IndexPair> bp;
  std::vector<char> bpos;
  Vector grad;
  for (int epoch = 0; epoch < cfg.epochs_embed; ++epoch) {
    shuffler.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      bp.clear();
      bpos.clear();
      for (std::size_t q = start; q < end; ++q) {
        bp.push_back(pairs[order[q]]);
        bpos.push_back(positive[order[q]]);
      }
      const double loss = siamese_batch_loss(*model.encoder, data.samples, bp, bpos, &grad);
      if (!std::isfinite(loss) || !grad.allFinite())
        throw NumericalError("embedding loss diverged at epoch " + std::to_string(epoch));
      epoch_loss += loss * static_cast<double>(end - start);
      adam.step(*model.encoder, grad);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  result.points = embed(model, data.samples);
  if (!result.points.allFinite()) throw NumericalError("embedding contains non-finite points");
  return result;
}

TrainedEmbedding train_embedder(const Dataset& data, const PairGraph& graph, const RunConfig& cfg, const Rng& rng) {
  Rng init = rng.child("init");
  TrainedEmbedding out{make_encoder(data, cfg, init), {}};
  out.result = train_embedder(out.model, data, graph, cfg, rng);
  return out;
}

Matrix embed(const EmbeddingModel& model, const Matrix& samples) {
  if (!model.encoder) throw std::invalid_argument("embed: model has no encoder");
  return model.encoder->infer(samples);
}

void save_embedding_model(const EmbeddingModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "den-checkpoint 1\nencoder\n";
  model.encoder->save(out);
}

EmbeddingModel load_embedding_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string magic;
  int version = 0;
  std::string section;
  if (!(in >> magic >> version >> section) || magic != "den-checkpoint" || version != 1 || section != "encoder")
    throw DataError(path.string() + ": not an encoder checkpoint");
  return EmbeddingModel(nn::load_network(in));
}

}  // namespace den
