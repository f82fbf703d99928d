#pragma once

#include "den/common.hpp"
#include "den/random.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace den::nn {

enum class Activation { kLinear, kRelu, kSelu };

inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

double selu(double x);
/// Derivative; at exactly 0 the positive branch (lambda) is used.
double selu_grad(double x);

std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

struct LayerSpec {
  int out;
  Activation act;
};

/// Intermediates recorded by forward() and consumed by backward().
struct ForwardCache {
  std::vector<Matrix> inputs;  // input of every dense layer
  std::vector<Matrix> pre;     // pre-activation of every dense layer
  Matrix tokens;               // token ids (TokenAverageNet only)
  const void* owner = nullptr;
  std::uint64_t version = 0;
};

/// A network whose parameters live in one flat vector, so optimizers,
/// gradient checks and checkpoints treat every architecture alike.
class Network {
 public:
  virtual ~Network() = default;

  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  virtual std::unique_ptr<Network> clone() const = 0;

  /// Rows of x are samples. Records intermediates in cache when given.
  virtual Matrix forward(const Matrix& x, ForwardCache* cache) const = 0;

  /// Accumulates dLoss/dparams into grad_params and returns dLoss/dinput.
  /// Throws std::logic_error when the cache came from another network or
  /// from parameters that have since changed.
  virtual Matrix backward(const ForwardCache& cache, const Matrix& grad_out,
                          Eigen::Ref<Vector> grad_params) const = 0;

  virtual void save(std::ostream& out) const = 0;

  /// He normal for ReLU layers, LeCun normal otherwise; zero biases.
  virtual void init(Rng& rng) = 0;

  Matrix forward(const Matrix& x) const { return forward(x, nullptr); }

  /// Inference path whose output rows do not depend on the batch they were
  /// evaluated in: each output is accumulated in input order, so a batch
  /// equals the same rows evaluated one at a time, bit for bit. Slower than
  /// forward(), which uses blocked matrix products.
  virtual Matrix infer(const Matrix& x) const = 0;

  const Vector& params() const { return params_; }
  /// Mutable access invalidates existing caches.
  Vector& mutable_params() {
    ++version_;
    return params_;
  }
  Eigen::Index num_params() const { return params_.size(); }
  std::uint64_t version() const { return version_; }

 protected:
  void check_cache(const ForwardCache& cache) const;
  void stamp(ForwardCache& cache) const {
    cache.owner = this;
    cache.version = version_;
  }

  Vector params_;
  std::uint64_t version_ = 0;
};

/// Chain of fully connected layers stored at an offset inside a parameter
/// vector. Weights are out x in, column-major, followed by the bias.
class DenseStack {
 public:
  DenseStack() = default;
  DenseStack(int input_dim, std::vector<LayerSpec> layers, Eigen::Index offset);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return layers_.empty() ? input_dim_ : layers_.back().out; }
  Eigen::Index size() const { return size_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }

  Eigen::Map<const Matrix> weight(const Vector& params, std::size_t layer) const;
  Eigen::Map<const Vector> bias(const Vector& params, std::size_t layer) const;
  Eigen::Map<Matrix> weight(Vector& params, std::size_t layer) const;
  Eigen::Map<Vector> bias(Vector& params, std::size_t layer) const;

  Matrix forward(const Vector& params, const Matrix& x, ForwardCache* cache) const;
  Matrix infer(const Vector& params, const Matrix& x) const;
  Matrix backward(const Vector& params, const ForwardCache& cache, const Matrix& grad_out,
                  Eigen::Ref<Vector> grad_params) const;
  void init(Vector& params, Rng& rng) const;

 private:
  int input_dim_ = 0;
  std::vector<LayerSpec> layers_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index size_ = 0;
};

class DenseNet : public Network {
 public:
  DenseNet(int input_dim, std::vector<LayerSpec> layers);

  int input_dim() const override { return stack_.input_dim(); }
  int output_dim() const override { return stack_.output_dim(); }
  std::unique_ptr<Network> clone() const override { return std::make_unique<DenseNet>(*this); }
  Matrix forward(const Matrix& x, ForwardCache* cache) const override;
  using Network::forward;
  Matrix infer(const Matrix& x) const override { return stack_.infer(params_, x); }
  Matrix backward(const ForwardCache& cache, const Matrix& grad_out,
                  Eigen::Ref<Vector> grad_params) const override;
  void save(std::ostream& out) const override;
  void init(Rng& rng) override;

  const std::vector<LayerSpec>& layers() const { return stack_.layers(); }
  void set_layer(std::size_t layer, const Matrix& weight, const Vector& bias);

 private:
  DenseStack stack_;
};

/// Token embedding table, averaged over sequence positions, then a hidden
/// ReLU layer and a linear output layer.
class TokenAverageNet : public Network {
 public:
  TokenAverageNet(int vocab_size, int seq_len, int embed_dim, int hidden, int output_dim);

  int input_dim() const override { return seq_len_; }
  int output_dim() const override { return stack_.output_dim(); }
  int vocab_size() const { return vocab_; }
  std::unique_ptr<Network> clone() const override { return std::make_unique<TokenAverageNet>(*this); }
  Matrix forward(const Matrix& x, ForwardCache* cache) const override;
  using Network::forward;
  Matrix infer(const Matrix& x) const override;
  /// The input gradient is zero: token ids are not differentiable.
  Matrix backward(const ForwardCache& cache, const Matrix& grad_out,
                  Eigen::Ref<Vector> grad_params) const override;
  void save(std::ostream& out) const override;
  void init(Rng& rng) override;

 private:
  Matrix average_tokens(const Matrix& x) const;

  int vocab_;
  int seq_len_;
  int embed_;
  DenseStack stack_;
};

std::unique_ptr<Network> load_network(std::istream& in);

/// Bias-corrected Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
class Adam {
 public:
  explicit Adam(double lr) : lr_(lr) {}

  void step(Vector& params, const Vector& grad);
  void step(Network& net, const Vector& grad) { step(net.mutable_params(), grad); }

  double lr() const { return lr_; }
  long steps() const { return t_; }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

 private:
  double lr_;
  long t_ = 0;
  Vector m_;
  Vector v_;
};

/// Row-wise softmax of logits.
Matrix softmax(const Matrix& logits);

/// Mean cross-entropy of softmax(logits) against integer targets; writes
/// dLoss/dlogits to grad when given.
double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& targets, Matrix* grad);

struct GradCheckReport {
  double max_rel_error = 0.0;
  Eigen::Index worst_param = -1;
  bool passed = false;
};

/// Objective evaluated at the network's current parameters. Returns the loss
/// and, when grad is non-null, writes the analytic gradient into it.
using Objective = std::function<double(const Network& net, Vector* grad)>;

/// Compares the analytic gradient of objective with central differences for
/// every parameter. Relative error is |a - f| / max(|a|, |f|, kGradCheckFloor).
GradCheckReport grad_check(Network& net, const Objective& objective, double tolerance,
                           double step = 1e-5);

inline constexpr double kGradCheckFloor = 1e-6;

}  // namespace den::nn
