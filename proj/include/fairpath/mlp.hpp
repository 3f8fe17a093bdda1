#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "fairpath/estimators.hpp"

namespace fairpath {

enum class OutputHead { identity, logistic };

/// Fully connected ReLU network with a single output. Inputs are laid out one
/// sample per column.
class MlpPredictor {
 public:
  struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
  };

  /// Activations kept for backpropagation: inputs[k] feeds layer k and
  /// pre[k] is its affine output.
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> pre;
  };

  MlpPredictor() = default;
  /// widths = {input, hidden..., 1}. Weights and biases ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
  MlpPredictor(std::vector<int> widths, OutputHead head, std::uint64_t seed);

  const std::vector<int>& widths() const { return widths_; }
  OutputHead head() const { return head_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::size_t parameter_count() const;
  /// Per layer: weight in row-major order, then bias.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);

  Eigen::VectorXd logits(const Eigen::MatrixXd& inputs) const;
  Eigen::VectorXd forward(const Eigen::MatrixXd& inputs, Cache& cache) const;
  /// Gradient of sum_i d_logits(i) * logit_i with respect to parameters().
  Eigen::VectorXd backward(const Cache& cache, const Eigen::VectorXd& d_logits) const;

  /// Head applied to the logits.
  Eigen::VectorXd predict(const Eigen::MatrixXd& inputs) const;
  Eigen::VectorXd apply_head(const Eigen::VectorXd& logits) const;
  PredictionFunction as_function() const;

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static MlpPredictor load(std::istream& in);
  static MlpPredictor load(const std::filesystem::path& path);

  friend bool operator==(const MlpPredictor& a, const MlpPredictor& b);

 private:
  std::vector<int> widths_;
  OutputHead head_ = OutputHead::identity;
  std::vector<Layer> layers_;
};

/// Adam on a flat parameter vector.
class Adam {
 public:
  explicit Adam(std::size_t size, double learning_rate = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

}  // namespace fairpath
