#include "fairpath/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "fairpath/random.hpp"

namespace fairpath {

namespace {

constexpr char kMagic[8] = {'F', 'P', 'M', 'L', 'P', 0, 0, 0};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return value;
}

}  // namespace

MlpPredictor::MlpPredictor(std::vector<int> widths, OutputHead head, std::uint64_t seed)
    : widths_(std::move(widths)), head_(head) {
  if (widths_.size() < 2) throw std::invalid_argument("mlp: need at least input and output widths");
  for (int w : widths_)
    if (w <= 0) throw std::invalid_argument("mlp: widths must be positive");
  if (widths_.back() != 1) throw std::invalid_argument("mlp: output width must be 1");
  Rng rng(seed);
  for (std::size_t k = 0; k + 1 < widths_.size(); ++k) {
    const int in = widths_[k], out = widths_[k + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> init(-bound, bound);
    Layer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = init(rng);
    for (int r = 0; r < out; ++r) layer.bias(r) = init(rng);
    layers_.push_back(std::move(layer));
  }
}

std::size_t MlpPredictor::parameter_count() const {
  std::size_t count = 0;
  for (const auto& l : layers_) count += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return count;
}

Eigen::VectorXd MlpPredictor::parameters() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index pos = 0;
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat(pos++) = l.weight(r, c);
    flat.segment(pos, l.bias.size()) = l.bias;
    pos += l.bias.size();
  }
  return flat;
}

void MlpPredictor::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count()))
    throw std::invalid_argument("mlp: parameter vector has the wrong length");
  Eigen::Index pos = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat(pos++);
    l.bias = flat.segment(pos, l.bias.size());
    pos += l.bias.size();
  }
}

Eigen::VectorXd MlpPredictor::forward(const Eigen::MatrixXd& inputs, Cache& cache) const {
  if (inputs.rows() != widths_.front())
    throw std::invalid_argument("mlp: input has " + std::to_string(inputs.rows()) +
                                " features, expected " + std::to_string(widths_.front()));
  cache.inputs.resize(layers_.size());
  cache.pre.resize(layers_.size());
  Eigen::MatrixXd a = inputs;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    cache.inputs[k] = a;
    cache.pre[k] = (layers_[k].weight * a).colwise() + layers_[k].bias;
    if (k + 1 < layers_.size()) a = cache.pre[k].cwiseMax(0.0);
  }
  return cache.pre.back().row(0).transpose();
}

Eigen::VectorXd MlpPredictor::logits(const Eigen::MatrixXd& inputs) const {
  Cache cache;
  return forward(inputs, cache);
}

Eigen::VectorXd MlpPredictor::backward(const Cache& cache, const Eigen::VectorXd& d_logits) const {
  Eigen::VectorXd grad(static_cast<Eigen::Index>(parameter_count()));
  // Offsets of each layer inside the flat vector.
  std::vector<Eigen::Index> offset(layers_.size());
  Eigen::Index pos = 0;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    offset[k] = pos;
    pos += layers_[k].weight.size() + layers_[k].bias.size();
  }
  Eigen::MatrixXd delta = d_logits.transpose();  // 1 x n
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Eigen::MatrixXd gw = delta * cache.inputs[k].transpose();
    const Eigen::VectorXd gb = delta.rowwise().sum();
    Eigen::Index p = offset[k];
    for (Eigen::Index r = 0; r < gw.rows(); ++r)
      for (Eigen::Index c = 0; c < gw.cols(); ++c) grad(p++) = gw(r, c);
    grad.segment(p, gb.size()) = gb;
    if (k > 0) {
      delta = layers_[k].weight.transpose() * delta;
      delta.array() *= (cache.pre[k - 1].array() > 0.0).cast<double>();
    }
  }
  return grad;
}

Eigen::VectorXd MlpPredictor::apply_head(const Eigen::VectorXd& logits) const {
  if (head_ == OutputHead::identity) return logits;
  return logits.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Eigen::VectorXd MlpPredictor::predict(const Eigen::MatrixXd& inputs) const {
  return apply_head(logits(inputs));
}

PredictionFunction MlpPredictor::as_function() const {
  return [model = *this](const Eigen::MatrixXd& inputs) { return model.predict(inputs); };
}

void MlpPredictor::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, head_ == OutputHead::identity ? 0u : 1u);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(widths_.size()));
  for (int w : widths_) put<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  const Eigen::VectorXd flat = parameters();
  for (Eigen::Index i = 0; i < flat.size(); ++i) put<double>(out, flat(i));
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

void MlpPredictor::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save(out);
}

MlpPredictor MlpPredictor::load(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const auto head = get<std::uint32_t>(in);
  if (head > 1) throw std::runtime_error("checkpoint: unknown output head");
  const auto count = get<std::uint32_t>(in);
  if (count < 2 || count > 64) throw std::runtime_error("checkpoint: implausible layer count");
  std::vector<int> widths(count);
  for (auto& w : widths) {
    w = static_cast<int>(get<std::uint32_t>(in));
    if (w <= 0 || w > (1 << 20)) throw std::runtime_error("checkpoint: implausible width");
  }
  MlpPredictor model(widths, head == 0 ? OutputHead::identity : OutputHead::logistic, 0);
  Eigen::VectorXd flat(static_cast<Eigen::Index>(model.parameter_count()));
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = get<double>(in);
  model.set_parameters(flat);
  return model;
}

MlpPredictor MlpPredictor::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load(in);
}

bool operator==(const MlpPredictor& a, const MlpPredictor& b) {
  if (a.widths_ != b.widths_ || a.head_ != b.head_) return false;
  const Eigen::VectorXd pa = a.parameters(), pb = b.parameters();
  return std::memcmp(pa.data(), pb.data(), sizeof(double) * static_cast<std::size_t>(pa.size())) == 0;
}

Adam::Adam(std::size_t size, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace fairpath
