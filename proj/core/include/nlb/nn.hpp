#pragma once

/// @file nn.hpp
/// Fully connected ReLU networks with exact reverse-mode gradients.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlb/types.hpp"

namespace nlb {

class Mlp;

/// Parameter-shaped container for gradients or optimizer state.
struct GradientSet {
  std::vector<Mat> weights;
  std::vector<Vec> biases;

  static GradientSet zeros_like(const Mlp& net);
  bool congruent_with(const Mlp& net) const;
  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double k);
  Vec flatten() const;
};

/// Activations recorded by Mlp::record; columns are samples.
struct ForwardTape {
  std::vector<Mat> pre;   ///< affine outputs, one per layer
  std::vector<Mat> post;  ///< post[0] is the input, post[l+1] = act(pre[l])

  bool empty() const { return pre.empty(); }
  const Mat& output() const { return pre.back(); }
};

/// ReLU on every hidden layer, linear output layer.
class Mlp {
 public:
  Mlp() = default;
  /// Throws ShapeError on inconsistent shapes and Error on non-finite values.
  Mlp(std::vector<int> layer_sizes, std::vector<Mat> weights, std::vector<Vec> biases);

  static Mlp zeros(std::vector<int> layer_sizes);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.empty() ? 0 : sizes_.front(); }
  int output_dim() const { return sizes_.empty() ? 0 : sizes_.back(); }
  int num_layers() const { return static_cast<int>(weights_.size()); }
  bool empty() const { return weights_.empty(); }

  const Mat& weight(int layer) const { return weights_[layer]; }
  const Vec& bias(int layer) const { return biases_[layer]; }
  Mat& weight(int layer) { return weights_[layer]; }
  Vec& bias(int layer) { return biases_[layer]; }

  Vec forward(const Vec& input) const;
  double forward_scalar(const Vec& input) const { return forward(input)[0]; }
  /// Columns of `inputs` are samples.
  Mat forward_batch(const Mat& inputs) const;
  ForwardTape record(const Mat& inputs) const;

  std::size_t parameter_count() const;
  bool finite() const;
  Vec flatten() const;
  /// Same shapes as *this, values from `params` (layout of flatten()).
  Mlp with_parameters(const Vec& params) const;

  bool operator==(const Mlp& other) const;

 private:
  std::vector<int> sizes_;
  std::vector<Mat> weights_;
  std::vector<Vec> biases_;
};

struct BackwardResult {
  GradientSet grads;
  Mat input_adjoint;  ///< d(loss)/d(input), same shape as the recorded input
};

/// Reverse-mode pass for a recorded forward. The ReLU subgradient at 0 is 0.
/// Throws Error when the tape is empty, ShapeError on adjoint mismatch.
BackwardResult gradients(const Mlp& net, const ForwardTape& tape, const Mat& output_adjoint);

/// Kaiming-uniform weights in +-sqrt(6 / fan_in), zero biases.
Mlp init(const std::vector<int>& layer_sizes, std::uint64_t seed);

/// params <- params - lr * grads. Throws ShapeError on mismatch.
Mlp sgd_step(const Mlp& net, const GradientSet& grads, double lr);

enum class OptimizerKind { Sgd, Momentum, Adam };

/// Stateful first-order optimizer bound to one network's shapes.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, const Mlp& shape_of, double momentum = 0.9, double beta1 = 0.9,
            double beta2 = 0.999, double eps = 1e-8);
  void step(Mlp& net, const GradientSet& grads, double lr);
  void reset();
  OptimizerKind kind() const { return kind_; }

 private:
  OptimizerKind kind_;
  double momentum_, beta1_, beta2_, eps_;
  long steps_ = 0;
  GradientSet first_, second_;
};

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

nlohmann::json to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& doc);
void save(const Mlp& net, const std::string& path);
/// Throws ParseError on malformed/truncated files and ShapeError on bad shapes.
Mlp load(const std::string& path);

}  // namespace nlb
