#include "den/nn.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace den::nn {

double selu(double x) { return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x); }

double selu_grad(double x) { return x >= 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x); }

std::string to_string(Activation act) {
  switch (act) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kSelu: return "selu";
  }
  return "linear";
}

Activation activation_from_string(const std::string& name) {
  if (name == "linear") return Activation::kLinear;
  if (name == "relu") return Activation::kRelu;
  if (name == "selu") return Activation::kSelu;
  throw DataError("unknown activation '" + name + "'");
}

namespace {

void apply_activation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::kLinear: break;
    case Activation::kRelu: z = z.cwiseMax(0.0); break;
    case Activation::kSelu: z = z.unaryExpr([](double v) { return selu(v); }); break;
  }
}

void scale_by_activation_grad(Activation act, const Matrix& pre, Matrix& grad) {
  switch (act) {
    case Activation::kLinear: break;
    case Activation::kRelu:
      grad.array() *= (pre.array() > 0.0).cast<double>();
      break;
    case Activation::kSelu:
      grad.array() *= pre.unaryExpr([](double v) { return selu_grad(v); }).array();
      break;
  }
}

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

void expect_token(std::istream& in, const std::string& want) {
  std::string got;
  if (!(in >> got) || got != want)
    throw DataError("malformed checkpoint: expected '" + want + "', got '" + got + "'");
}

template <typename T>
T read_value(std::istream& in, const std::string& what) {
  T v{};
  if (!(in >> v)) throw DataError("malformed checkpoint: cannot read " + what);
  return v;
}

void write_layers(std::ostream& out, const std::vector<LayerSpec>& layers) {
  out << "layers " << layers.size() << '\n';
  for (const auto& l : layers) out << l.out << ' ' << to_string(l.act) << '\n';
}

std::vector<LayerSpec> read_layers(std::istream& in) {
  expect_token(in, "layers");
  const auto count = read_value<std::size_t>(in, "layer count");
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < count; ++i) {
    const int out = read_value<int>(in, "layer width");
    const auto act = read_value<std::string>(in, "activation");
    layers.push_back({out, activation_from_string(act)});
  }
  return layers;
}

void write_params(std::ostream& out, const Vector& p) {
  out << "params " << p.size() << '\n';
  for (Eigen::Index i = 0; i < p.size(); ++i) out << hexfloat(p[i]) << '\n';
}

void read_params(std::istream& in, Vector& p) {
  expect_token(in, "params");
  const auto count = read_value<Eigen::Index>(in, "parameter count");
  if (count != p.size()) throw DataError("checkpoint parameter count does not match architecture");
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto tok = read_value<std::string>(in, "parameter");
    char* end = nullptr;
    p[i] = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw DataError("malformed checkpoint parameter '" + tok + "'");
  }
}

}  // namespace

void Network::check_cache(const ForwardCache& cache) const {
  if (cache.owner != this || cache.version != version_)
    throw std::logic_error("stale forward cache: parameters changed or cache belongs to another network");
}

DenseStack::DenseStack(int input_dim, std::vector<LayerSpec> layers, Eigen::Index offset)
    : input_dim_(input_dim), layers_(std::move(layers)) {
  if (input_dim < 1) throw std::invalid_argument("input dimension must be positive");
  Eigen::Index pos = offset;
  int in = input_dim;
  for (const auto& l : layers_) {
    if (l.out < 1) throw std::invalid_argument("layer width must be positive");
    offsets_.push_back(pos);
    pos += static_cast<Eigen::Index>(l.out) * in + l.out;
    in = l.out;
  }
  size_ = pos - offset;
}

Eigen::Map<const Matrix> DenseStack::weight(const Vector& params, std::size_t layer) const {
  const int in = layer == 0 ? input_dim_ : layers_[layer - 1].out;
  return {params.data() + offsets_[layer], layers_[layer].out, in};
}

Eigen::Map<const Vector> DenseStack::bias(const Vector& params, std::size_t layer) const {
  const int in = layer == 0 ? input_dim_ : layers_[layer - 1].out;
  return {params.data() + offsets_[layer] + static_cast<Eigen::Index>(layers_[layer].out) * in,
          layers_[layer].out};
}

Eigen::Map<Matrix> DenseStack::weight(Vector& params, std::size_t layer) const {
  const int in = layer == 0 ? input_dim_ : layers_[layer - 1].out;
  return {params.data() + offsets_[layer], layers_[layer].out, in};
}

Eigen::Map<Vector> DenseStack::bias(Vector& params, std::size_t layer) const {
  const int in = layer == 0 ? input_dim_ : layers_[layer - 1].out;
  return {params.data() + offsets_[layer] + static_cast<Eigen::Index>(layers_[layer].out) * in,
          layers_[layer].out};
}

Matrix DenseStack::forward(const Vector& params, const Matrix& x, ForwardCache* cache) const {
  if (x.cols() != input_dim_)
    throw std::invalid_argument("input has " + std::to_string(x.cols()) + " columns, network expects " +
                                std::to_string(input_dim_));
  Matrix a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = a * weight(params, l).transpose();
    z.rowwise() += bias(params, l).transpose();
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->pre.push_back(z);
    }
    apply_activation(layers_[l].act, z);
    a = std::move(z);
  }
  return a;
}

Matrix DenseStack::infer(const Vector& params, const Matrix& x) const {
  if (x.cols() != input_dim_)
    throw std::invalid_argument("input has " + std::to_string(x.cols()) + " columns, network expects " +
                                std::to_string(input_dim_));
  constexpr Eigen::Index kChunk = 256;
  Matrix a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto w = weight(params, l);
    const auto b = bias(params, l);
    Matrix z(a.rows(), w.rows());
    for (Eigen::Index r0 = 0; r0 < a.rows(); r0 += kChunk) {
      const Eigen::Index nb = std::min(kChunk, a.rows() - r0);
      for (Eigen::Index o = 0; o < w.rows(); ++o) {
        auto zc = z.col(o).segment(r0, nb);
        zc.setConstant(b[o]);
        for (Eigen::Index k = 0; k < w.cols(); ++k) zc += w(o, k) * a.col(k).segment(r0, nb);
      }
    }
    apply_activation(layers_[l].act, z);
    a = std::move(z);
  }
  return a;
}

Matrix DenseStack::backward(const Vector& params, const ForwardCache& cache, const Matrix& grad_out,
                            Eigen::Ref<Vector> grad_params) const {
  Matrix g = grad_out;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Matrix& pre = cache.pre[l];
    const Matrix& in = cache.inputs[l];
    scale_by_activation_grad(layers_[l].act, pre, g);
    const int in_dim = static_cast<int>(in.cols());
    const Eigen::Index off = offsets_[l];
    Eigen::Map<Matrix> gw(grad_params.data() + off, layers_[l].out, in_dim);
    Eigen::Map<Vector> gb(grad_params.data() + off + static_cast<Eigen::Index>(layers_[l].out) * in_dim,
                          layers_[l].out);
    gw.noalias() += g.transpose() * in;
    gb += g.colwise().sum().transpose();
    g = g * weight(params, l);
  }
  return g;
}

void DenseStack::init(Vector& params, Rng& rng) const {
  int in = input_dim_;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const double gain = layers_[l].act == Activation::kRelu ? 2.0 : 1.0;
    const double sd = std::sqrt(gain / in);
    auto w = weight(params, l);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = sd * rng.normal();
    bias(params, l).setZero();
    in = layers_[l].out;
  }
}

DenseNet::DenseNet(int input_dim, std::vector<LayerSpec> layers) : stack_(input_dim, std::move(layers), 0) {
  if (stack_.layers().empty()) throw std::invalid_argument("DenseNet needs at least one layer");
  params_ = Vector::Zero(stack_.size());
}

Matrix DenseNet::forward(const Matrix& x, ForwardCache* cache) const {
  if (cache) {
    *cache = ForwardCache{};
    stamp(*cache);
  }
  return stack_.forward(params_, x, cache);
}

Matrix DenseNet::backward(const ForwardCache& cache, const Matrix& grad_out, Eigen::Ref<Vector> grad_params) const {
  check_cache(cache);
  if (grad_params.size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");
  return stack_.backward(params_, cache, grad_out, grad_params);
}

void DenseNet::save(std::ostream& out) const {
  out << "network dense\ninput " << input_dim() << '\n';
  write_layers(out, layers());
  write_params(out, params_);
}

void DenseNet::init(Rng& rng) {
  stack_.init(params_, rng);
  ++version_;
}

void DenseNet::set_layer(std::size_t layer, const Matrix& weight, const Vector& bias) {
  auto w = stack_.weight(params_, layer);
  auto b = stack_.bias(params_, layer);
  if (w.rows() != weight.rows() || w.cols() != weight.cols() || b.size() != bias.size())
    throw std::invalid_argument("set_layer: shape mismatch");
  w = weight;
  b = bias;
  ++version_;
}

TokenAverageNet::TokenAverageNet(int vocab_size, int seq_len, int embed_dim, int hidden, int output_dim)
    : vocab_(vocab_size),
      seq_len_(seq_len),
      embed_(embed_dim),
      stack_(embed_dim, {{hidden, Activation::kRelu}, {output_dim, Activation::kLinear}},
             static_cast<Eigen::Index>(vocab_size) * embed_dim) {
  if (vocab_size < 1 || seq_len < 1) throw std::invalid_argument("TokenAverageNet: bad vocab or length");
  params_ = Vector::Zero(static_cast<Eigen::Index>(vocab_) * embed_ + stack_.size());
}

Matrix TokenAverageNet::average_tokens(const Matrix& x) const {
  if (x.cols() != seq_len_)
    throw std::invalid_argument("token batch has " + std::to_string(x.cols()) + " positions, expected " +
                                std::to_string(seq_len_));
  Eigen::Map<const Matrix> table(params_.data(), vocab_, embed_);
  Matrix avg = Matrix::Zero(x.rows(), embed_);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index p = 0; p < x.cols(); ++p) {
      const auto t = static_cast<Eigen::Index>(x(r, p));
      if (t < 0 || t >= vocab_) throw std::invalid_argument("token id out of range");
      avg.row(r) += table.row(t);
    }
  }
  avg /= static_cast<double>(seq_len_);
  return avg;
}

Matrix TokenAverageNet::infer(const Matrix& x) const { return stack_.infer(params_, average_tokens(x)); }

Matrix TokenAverageNet::forward(const Matrix& x, ForwardCache* cache) const {
  Matrix avg = average_tokens(x);
  if (cache) {
    *cache = ForwardCache{};
    stamp(*cache);
    cache->tokens = x;
  }
  return stack_.forward(params_, avg, cache);
}

Matrix TokenAverageNet::backward(const ForwardCache& cache, const Matrix& grad_out,
                                 Eigen::Ref<Vector> grad_params) const {
  check_cache(cache);
  if (grad_params.size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");
  const Matrix g_avg = stack_.backward(params_, cache, grad_out, grad_params);
  Eigen::Map<Matrix> g_table(grad_params.data(), vocab_, embed_);
  const double inv_len = 1.0 / seq_len_;
  for (Eigen::Index r = 0; r < cache.tokens.rows(); ++r)
    for (Eigen::Index p = 0; p < cache.tokens.cols(); ++p)
      g_table.row(static_cast<Eigen::Index>(cache.tokens(r, p))) += inv_len * g_avg.row(r);
  return Matrix::Zero(cache.tokens.rows(), cache.tokens.cols());
}

void TokenAverageNet::save(std::ostream& out) const {
  out << "network tokens\nvocab " << vocab_ << "\nlength " << seq_len_ << "\nembed " << embed_ << "\nhidden "
      << stack_.layers()[0].out << "\noutput " << output_dim() << '\n';
  write_params(out, params_);
}

void TokenAverageNet::init(Rng& rng) {
  Eigen::Map<Matrix> table(params_.data(), vocab_, embed_);
  for (Eigen::Index c = 0; c < table.cols(); ++c)
    for (Eigen::Index r = 0; r < table.rows(); ++r) table(r, c) = rng.normal();
  stack_.init(params_, rng);
  ++version_;
}

std::unique_ptr<Network> load_network(std::istream& in) {
  expect_token(in, "network");
  const auto kind = read_value<std::string>(in, "network kind");
  if (kind == "dense") {
    expect_token(in, "input");
    const int input = read_value<int>(in, "input width");
    auto net = std::make_unique<DenseNet>(input, read_layers(in));
    read_params(in, net->mutable_params());
    return net;
  }
  if (kind == "tokens") {
    expect_token(in, "vocab");
    const int vocab = read_value<int>(in, "vocab");
    expect_token(in, "length");
    const int len = read_value<int>(in, "length");
    expect_token(in, "embed");
    const int embed = read_value<int>(in, "embed");
    expect_token(in, "hidden");
    const int hidden = read_value<int>(in, "hidden");
    expect_token(in, "output");
    const int output = read_value<int>(in, "output");
    auto net = std::make_unique<TokenAverageNet>(vocab, len, embed, hidden, output);
    read_params(in, net->mutable_params());
    return net;
  }
  throw DataError("unknown network kind '" + kind + "'");
}

void Adam::step(Vector& params, const Vector& grad) {
  if (grad.size() != params.size()) throw std::invalid_argument("Adam: gradient/parameter size mismatch");
  if (!grad.allFinite()) throw NumericalError("Adam: non-finite gradient");
  if (m_.size() != params.size()) {
    m_ = Vector::Zero(params.size());
    v_ = Vector::Zero(params.size());
    t_ = 0;
  }
  ++t_;
  m_ = kBeta1 * m_ + (1.0 - kBeta1) * grad;
  v_ = kBeta2 * v_ + (1.0 - kBeta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + kEps);
}

Matrix softmax(const Matrix& logits) {
  Matrix out = logits;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double mx = out.row(r).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      out(r, c) = std::exp(out(r, c) - mx);
      sum += out(r, c);
    }
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) /= sum;
  }
  return out;
}

double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& targets, Matrix* grad) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows())
    throw std::invalid_argument("cross-entropy: target count mismatch");
  const Matrix p = softmax(logits);
  const auto n = static_cast<double>(logits.rows());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= logits.cols()) throw std::invalid_argument("cross-entropy: target out of range");
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    loss += lse - logits(r, t);
  }
  if (grad) {
    *grad = p;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) (*grad)(r, targets[static_cast<std::size_t>(r)]) -= 1.0;
    *grad /= n;
  }
  return loss / n;
}

GradCheckReport grad_check(Network& net, const Objective& objective, double tolerance, double step) {
  Vector analytic = Vector::Zero(net.num_params());
  objective(net, &analytic);
  GradCheckReport report;
  for (Eigen::Index i = 0; i < net.num_params(); ++i) {
    const double saved = net.params()[i];
    net.mutable_params()[i] = saved + step;
    const double up = objective(net, nullptr);
    net.mutable_params()[i] = saved - step;
    const double down = objective(net, nullptr);
    net.mutable_params()[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), kGradCheckFloor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > report.max_rel_error || report.worst_param < 0) {
      report.max_rel_error = rel;
      report.worst_param = i;
    }
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace den::nn
