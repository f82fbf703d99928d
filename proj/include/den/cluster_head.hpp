#pragma once

#include "den/config.hpp"
#include "den/data_io.hpp"
#include "den/nn.hpp"
#include "den/random.hpp"
#include "den/siamese.hpp"

#include <filesystem>
#include <memory>
#include <vector>

namespace den {

/// SELU classifier over embedding points. Inputs are shifted and scaled by
/// fixed per-dimension statistics of the training embedding before the
/// first layer; label_map[c] is the cluster id of output c.
struct ClusterHead {
  Vector mean;
  Vector scale;
  std::unique_ptr<nn::DenseNet> net;
  std::vector<int> label_map;

  ClusterHead() = default;
  ClusterHead(const ClusterHead& other);
  ClusterHead& operator=(const ClusterHead& other);
  ClusterHead(ClusterHead&&) noexcept = default;
  ClusterHead& operator=(ClusterHead&&) noexcept = default;

  int n_clusters() const { return static_cast<int>(label_map.size()); }
  int input_dim() const { return static_cast<int>(mean.size()); }
  Matrix normalize(const Matrix& points) const;
  /// Row-stable logits (see nn::Network::infer).
  Matrix logits(const Matrix& points) const;
};

struct HeadTraining {
  ClusterHead head;
  std::vector<double> loss_history;
  double train_accuracy = 0.0;
  bool trivial = false;  // a single cluster: the head is a constant predictor
};

/// Fits the head alone on (points, labels) with cross-entropy for
/// cfg.epochs_head epochs, Adam at cfg.lr. Labels may be any integers; they
/// are mapped to outputs in ascending order.
HeadTraining train_head(const Matrix& points, const std::vector<int>& labels, const RunConfig& cfg,
                        const Rng& rng);

/// Encoder composed with a head: the end-to-end cluster predictor.
struct ClusterModel {
  EmbeddingModel encoder;
  ClusterHead head;
  bool trivial = false;

  int n_clusters() const { return head.n_clusters(); }
  int input_dim() const { return encoder.encoder->input_dim(); }
};

struct FinetuneReport {
  std::vector<double> loss_history;
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
  /// Set when training accuracy fell by more than kFinetuneTolerance; the
  /// model is then restored to its pre-fine-tune parameters.
  bool reverted = false;
};

inline constexpr double kFinetuneTolerance = 0.01;

/// Trains encoder and head jointly against the fixed labels for
/// cfg.epochs_finetune epochs with a fresh Adam at cfg.lr_finetune.
/// Throws NumericalError on a non-finite loss.
FinetuneReport finetune_end_to_end(ClusterModel& model, const Dataset& data, const std::vector<int>& labels,
                                   const RunConfig& cfg, const Rng& rng);

struct Prediction {
  std::vector<int> cluster;  // cluster ids (through label_map)
  Matrix probabilities;      // N x C, rows sum to 1
};

Prediction predict_cluster(const ClusterModel& model, const Matrix& samples);

/// Fraction of samples whose predicted cluster id equals the label.
double training_accuracy(const ClusterModel& model, const Matrix& samples, const std::vector<int>& labels);

void save_cluster_model(const ClusterModel& model, const std::filesystem::path& path);
ClusterModel load_cluster_model(const std::filesystem::path& path);

}  // namespace den
