#include "nlb/nn.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "nlb/error.hpp"
#include "nlb/rng.hpp"

namespace nlb {

namespace {

void check_shapes(const std::vector<int>& sizes, const std::vector<Mat>& w, const std::vector<Vec>& b) {
  if (sizes.size() < 2) throw ShapeError("Mlp: need at least input and output sizes");
  for (int s : sizes) {
    if (s <= 0) throw ShapeError("Mlp: layer sizes must be positive");
  }
  if (w.size() != sizes.size() - 1 || b.size() != w.size()) {
    throw ShapeError("Mlp: expected one weight matrix and bias per layer");
  }
  for (std::size_t l = 0; l < w.size(); ++l) {
    if (w[l].rows() != sizes[l + 1] || w[l].cols() != sizes[l] || b[l].size() != sizes[l + 1]) {
      std::ostringstream os;
      os << "Mlp: layer " << l << " has shape " << w[l].rows() << "x" << w[l].cols()
         << " (bias " << b[l].size() << "), expected " << sizes[l + 1] << "x" << sizes[l];
      throw ShapeError(os.str());
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- GradientSet

GradientSet GradientSet::zeros_like(const Mlp& net) {
  GradientSet g;
  for (int l = 0; l < net.num_layers(); ++l) {
    g.weights.push_back(Mat::Zero(net.weight(l).rows(), net.weight(l).cols()));
    g.biases.push_back(Vec::Zero(net.bias(l).size()));
  }
  return g;
}

bool GradientSet::congruent_with(const Mlp& net) const {
  if (static_cast<int>(weights.size()) != net.num_layers() || biases.size() != weights.size()) {
    return false;
  }
  for (int l = 0; l < net.num_layers(); ++l) {
    if (weights[l].rows() != net.weight(l).rows() || weights[l].cols() != net.weight(l).cols() ||
        biases[l].size() != net.bias(l).size()) {
      return false;
    }
  }
  return true;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  if (other.weights.size() != weights.size()) throw ShapeError("GradientSet: layer count mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double k) {
  for (auto& w : weights) w *= k;
  for (auto& b : biases) b *= k;
  return *this;
}

Vec GradientSet::flatten() const {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) total += weights[l].size() + biases[l].size();
  Vec out(total);
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    // row-major, matching the file format
    for (Eigen::Index i = 0; i < weights[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < weights[l].cols(); ++j) out[k++] = weights[l](i, j);
    }
    for (Eigen::Index i = 0; i < biases[l].size(); ++i) out[k++] = biases[l][i];
  }
  return out;
}

// ---------------------------------------------------------------- Mlp

Mlp::Mlp(std::vector<int> layer_sizes, std::vector<Mat> weights, std::vector<Vec> biases)
    : sizes_(std::move(layer_sizes)), weights_(std::move(weights)), biases_(std::move(biases)) {
  check_shapes(sizes_, weights_, biases_);
  if (!finite()) throw Error("Mlp: parameters must be finite");
}

Mlp Mlp::zeros(std::vector<int> layer_sizes) {
  std::vector<Mat> w;
  std::vector<Vec> b;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    w.push_back(Mat::Zero(layer_sizes[l + 1], layer_sizes[l]));
    b.push_back(Vec::Zero(layer_sizes[l + 1]));
  }
  return Mlp(std::move(layer_sizes), std::move(w), std::move(b));
}

Vec Mlp::forward(const Vec& input) const {
  if (empty()) throw Error("Mlp::forward on an empty network");
  if (input.size() != input_dim()) {
    throw ShapeError("Mlp::forward: input has " + std::to_string(input.size()) +
                     " components, expected " + std::to_string(input_dim()));
  }
  Vec h = input;
  for (int l = 0; l < num_layers(); ++l) {
    Vec z = weights_[l] * h + biases_[l];
    h = (l + 1 < num_layers()) ? Vec(z.cwiseMax(0.0)) : z;
  }
  return h;
}

Mat Mlp::forward_batch(const Mat& inputs) const {
  if (empty()) throw Error("Mlp::forward_batch on an empty network");
  if (inputs.rows() != input_dim()) throw ShapeError("Mlp::forward_batch: input row count mismatch");
  Mat h = inputs;
  for (int l = 0; l < num_layers(); ++l) {
    Mat z = (weights_[l] * h).colwise() + biases_[l];
    h = (l + 1 < num_layers()) ? Mat(z.cwiseMax(0.0)) : z;
  }
  return h;
}

ForwardTape Mlp::record(const Mat& inputs) const {
  if (empty()) throw Error("Mlp::record on an empty network");
  if (inputs.rows() != input_dim()) throw ShapeError("Mlp::record: input row count mismatch");
  ForwardTape tape;
  tape.post.push_back(inputs);
  for (int l = 0; l < num_layers(); ++l) {
    tape.pre.push_back((weights_[l] * tape.post.back()).colwise() + biases_[l]);
    if (l + 1 < num_layers()) tape.post.push_back(tape.pre.back().cwiseMax(0.0));
  }
  return tape;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (int l = 0; l < num_layers(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

bool Mlp::finite() const {
  for (int l = 0; l < num_layers(); ++l) {
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
  }
  return true;
}

Vec Mlp::flatten() const {
  GradientSet g{weights_, biases_};
  return g.flatten();
}

Mlp Mlp::with_parameters(const Vec& params) const {
  if (static_cast<std::size_t>(params.size()) != parameter_count()) {
    throw ShapeError("Mlp::with_parameters: parameter count mismatch");
  }
  Mlp out = *this;
  Eigen::Index k = 0;
  for (int l = 0; l < num_layers(); ++l) {
    for (Eigen::Index i = 0; i < out.weights_[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < out.weights_[l].cols(); ++j) out.weights_[l](i, j) = params[k++];
    }
    for (Eigen::Index i = 0; i < out.biases_[l].size(); ++i) out.biases_[l][i] = params[k++];
  }
  return out;
}

bool Mlp::operator==(const Mlp& other) const {
  if (sizes_ != other.sizes_) return false;
  for (int l = 0; l < num_layers(); ++l) {
    if (weights_[l] != other.weights_[l] || biases_[l] != other.biases_[l]) return false;
  }
  return true;
}

// ---------------------------------------------------------------- gradients

BackwardResult gradients(const Mlp& net, const ForwardTape& tape, const Mat& output_adjoint) {
  if (tape.empty()) throw Error("gradients: no recorded forward pass");
  if (static_cast<int>(tape.pre.size()) != net.num_layers()) {
    throw ShapeError("gradients: tape does not belong to this network");
  }
  if (output_adjoint.rows() != net.output_dim() || output_adjoint.cols() != tape.pre.back().cols()) {
    throw ShapeError("gradients: adjoint shape does not match the recorded outputs");
  }
  BackwardResult r;
  r.grads = GradientSet::zeros_like(net);
  Mat delta = output_adjoint;  // d loss / d pre[l]
  for (int l = net.num_layers() - 1; l >= 0; --l) {
    r.grads.weights[l] = delta * tape.post[l].transpose();
    r.grads.biases[l] = delta.rowwise().sum();
    Mat back = net.weight(l).transpose() * delta;
    if (l > 0) {
      // subgradient of ReLU at 0 is 0
      back.array() *= (tape.pre[l - 1].array() > 0.0).cast<double>();
    }
    delta = std::move(back);
  }
  r.input_adjoint = std::move(delta);
  return r;
}

Mlp init(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 3) throw PreconditionError("init: need at least one hidden layer");
  Rng rng(seed);
  std::vector<Mat> w;
  std::vector<Vec> b;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    if (layer_sizes[l] <= 0 || layer_sizes[l + 1] <= 0) throw ShapeError("init: sizes must be > 0");
    const double bound = std::sqrt(6.0 / layer_sizes[l]);
    Mat m(layer_sizes[l + 1], layer_sizes[l]);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = uniform(rng, -bound, bound);
    }
    w.push_back(std::move(m));
    b.push_back(Vec::Zero(layer_sizes[l + 1]));
  }
  return Mlp(layer_sizes, std::move(w), std::move(b));
}

Mlp sgd_step(const Mlp& net, const GradientSet& grads, double lr) {
  if (!grads.congruent_with(net)) throw ShapeError("sgd_step: gradient shapes do not match");
  Mlp out = net;
  for (int l = 0; l < net.num_layers(); ++l) {
    out.weight(l) -= lr * grads.weights[l];
    out.bias(l) -= lr * grads.biases[l];
  }
  return out;
}

// ---------------------------------------------------------------- Optimizer

Optimizer::Optimizer(OptimizerKind kind, const Mlp& shape_of, double momentum, double beta1,
                     double beta2, double eps)
    : kind_(kind), momentum_(momentum), beta1_(beta1), beta2_(beta2), eps_(eps) {
  first_ = GradientSet::zeros_like(shape_of);
  second_ = GradientSet::zeros_like(shape_of);
}

void Optimizer::reset() {
  steps_ = 0;
  first_ *= 0.0;
  second_ *= 0.0;
}

void Optimizer::step(Mlp& net, const GradientSet& grads, double lr) {
  if (!grads.congruent_with(net) || !first_.congruent_with(net)) {
    throw ShapeError("Optimizer::step: shape mismatch");
  }
  ++steps_;
  switch (kind_) {
    case OptimizerKind::Sgd: net = sgd_step(net, grads, lr); return;
    case OptimizerKind::Momentum:
      for (int l = 0; l < net.num_layers(); ++l) {
        first_.weights[l] = momentum_ * first_.weights[l] + grads.weights[l];
        first_.biases[l] = momentum_ * first_.biases[l] + grads.biases[l];
        net.weight(l) -= lr * first_.weights[l];
        net.bias(l) -= lr * first_.biases[l];
      }
      return;
    case OptimizerKind::Adam: {
      const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
      const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
      auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
      };
      for (int l = 0; l < net.num_layers(); ++l) {
        update(net.weight(l), first_.weights[l], second_.weights[l], grads.weights[l]);
        update(net.bias(l), first_.biases[l], second_.biases[l], grads.biases[l]);
      }
      return;
    }
  }
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Momentum: return "momentum";
    case OptimizerKind::Adam: return "adam";
  }
  return "sgd";
}

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "momentum") return OptimizerKind::Momentum;
  if (name == "adam") return OptimizerKind::Adam;
  throw ParseError("unknown optimizer '" + name + "' (expected sgd, momentum or adam)");
}

// ---------------------------------------------------------------- files

nlohmann::json to_json(const Mlp& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (int l = 0; l < net.num_layers(); ++l) {
    std::vector<double> w;
    w.reserve(net.weight(l).size());
    for (Eigen::Index i = 0; i < net.weight(l).rows(); ++i) {
      for (Eigen::Index j = 0; j < net.weight(l).cols(); ++j) w.push_back(net.weight(l)(i, j));
    }
    std::vector<double> b(net.bias(l).data(), net.bias(l).data() + net.bias(l).size());
    layers.push_back({{"weights", w}, {"biases", b}});
  }
  return {{"format", "nlb-mlp"}, {"version", 1}, {"layer_sizes", net.layer_sizes()}, {"layers", layers}};
}

Mlp mlp_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object() || doc.value("format", "") != "nlb-mlp") {
      throw ParseError("network document: missing \"format\": \"nlb-mlp\"");
    }
    if (doc.at("version").get<int>() != 1) throw ParseError("network document: unsupported version");
    const auto sizes = doc.at("layer_sizes").get<std::vector<int>>();
    const auto& layers = doc.at("layers");
    if (sizes.size() < 2 || layers.size() != sizes.size() - 1) {
      throw ShapeError("network document: layer count does not match layer_sizes");
    }
    std::vector<Mat> w;
    std::vector<Vec> b;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto wv = layers[l].at("weights").get<std::vector<double>>();
      const auto bv = layers[l].at("biases").get<std::vector<double>>();
      const std::size_t rows = sizes[l + 1], cols = sizes[l];
      if (wv.size() != rows * cols || bv.size() != rows) {
        throw ShapeError("network document: layer " + std::to_string(l) + " has wrong parameter count");
      }
      Mat m(rows, cols);
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = wv[i * cols + j];
      }
      w.push_back(std::move(m));
      b.push_back(Eigen::Map<const Vec>(bv.data(), static_cast<Eigen::Index>(bv.size())));
    }
    return Mlp(sizes, std::move(w), std::move(b));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("network document: ") + e.what());
  }
}

void save(const Mlp& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << to_json(net).dump(1) << '\n';
  if (!out) throw Error("failed writing " + path);
}

Mlp load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return mlp_from_json(doc);
}

}  // namespace nlb
