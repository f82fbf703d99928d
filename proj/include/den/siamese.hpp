#pragma once

#include "den/config.hpp"
#include "den/data_io.hpp"
#include "den/fdist_loss.hpp"
#include "den/nn.hpp"
#include "den/pair_graph.hpp"
#include "den/random.hpp"

#include <filesystem>
#include <memory>
#include <vector>

namespace den {

/// Encoder mapping samples to embed_dim coordinates. Both Siamese branches
/// are this one parameter set.
struct EmbeddingModel {
  std::unique_ptr<nn::Network> encoder;

  EmbeddingModel() = default;
  explicit EmbeddingModel(std::unique_ptr<nn::Network> enc) : encoder(std::move(enc)) {}
  EmbeddingModel(const EmbeddingModel& other)
      : encoder(other.encoder ? other.encoder->clone() : nullptr) {}
  EmbeddingModel& operator=(const EmbeddingModel& other) {
    encoder = other.encoder ? other.encoder->clone() : nullptr;
    return *this;
  }
  EmbeddingModel(EmbeddingModel&&) noexcept = default;
  EmbeddingModel& operator=(EmbeddingModel&&) noexcept = default;

  int embed_dim() const { return encoder->output_dim(); }
};

struct EmbeddingResult {
  Matrix points;                      // N x embed_dim
  std::vector<double> loss_history;   // mean pair loss per epoch
};

/// Dense encoder input -> hidden... -> embed_dim (ReLU hidden, linear out),
/// or the token-average encoder for token datasets.
EmbeddingModel make_encoder(const Dataset& data, const RunConfig& cfg, Rng& rng);

/// Mean loss over the given pairs and its gradient with respect to the
/// encoder parameters. Pairs are encoded as one stacked batch
/// [first endpoints; second endpoints] so both branches accumulate into the
/// same gradient buffer.
double siamese_batch_loss(const nn::Network& encoder, const Matrix& samples,
                          const std::vector<IndexPair>& pairs, const std::vector<char>& is_positive,
                          Vector* grad, fdist::Forward forward = fdist::Forward::kLaplace);

struct TrainedEmbedding {
  EmbeddingModel model;
  EmbeddingResult result;
};

/// Trains a fresh encoder on the pair graph for cfg.epochs_embed epochs of
/// shuffled positive+negative pairs, minibatches of cfg.batch_size, Adam at
/// cfg.lr. Throws NumericalError if the loss turns non-finite.
TrainedEmbedding train_embedder(const Dataset& data, const PairGraph& graph, const RunConfig& cfg,
                                const Rng& rng);

/// Same as above but continues from an existing model.
EmbeddingResult train_embedder(EmbeddingModel& model, const Dataset& data, const PairGraph& graph,
                               const RunConfig& cfg, const Rng& rng);

/// Applies the encoder in fixed-size chunks; identical to row-at-a-time
/// evaluation.
Matrix embed(const EmbeddingModel& model, const Matrix& samples);

void save_embedding_model(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_embedding_model(const std::filesystem::path& path);

}  // namespace den
