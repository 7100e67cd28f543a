#include "nlb/expr_graph.hpp"

#include "nlb/error.hpp"
#include "nlb/nn.hpp"

namespace nlb {

ExprGraph::ExprGraph(int input_dim) {
  if (input_dim <= 0) throw ShapeError("ExprGraph: input dimension must be positive");
  Node in;
  in.op = Op::Input;
  in.size = input_dim;
  nodes_.push_back(std::move(in));
}

int ExprGraph::push(Node n) {
  nodes_.push_back(std::move(n));
  return num_nodes() - 1;
}

int ExprGraph::affine(int parent, Mat weight, Vec offset) {
  if (weight.cols() != size_of(parent) || weight.rows() != offset.size()) {
    throw ShapeError("ExprGraph::affine: shape mismatch");
  }
  Node n;
  n.op = Op::Affine;
  n.parents = {parent};
  n.size = static_cast<int>(weight.rows());
  n.weight = std::move(weight);
  n.offset = std::move(offset);
  return push(std::move(n));
}

int ExprGraph::relu(int parent) {
  Node n;
  n.op = Op::Relu;
  n.parents = {parent};
  n.size = size_of(parent);
  return push(std::move(n));
}

int ExprGraph::concat(std::vector<int> parents) {
  if (parents.empty()) throw ShapeError("ExprGraph::concat: no parents");
  if (parents.size() == 1) return parents[0];
  Node n;
  n.op = Op::Concat;
  for (int p : parents) n.size += size_of(p);
  n.parents = std::move(parents);
  return push(std::move(n));
}

int ExprGraph::rows(int parent, const std::vector<int>& index) {
  Mat w = Mat::Zero(static_cast<Eigen::Index>(index.size()), size_of(parent));
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= size_of(parent)) throw ShapeError("ExprGraph::rows: bad index");
    w(static_cast<Eigen::Index>(i), index[i]) = 1.0;
  }
  return affine(parent, std::move(w), Vec::Zero(static_cast<Eigen::Index>(index.size())));
}

int ExprGraph::clip(int parent, double lo, double hi) {
  if (!(lo <= hi)) throw PreconditionError("ExprGraph::clip: lo must be <= hi");
  const int k = size_of(parent);
  const Mat eye = Mat::Identity(k, k);
  // max(x, lo) = lo + relu(x - lo); min(y, hi) = hi - relu(hi - y)
  const int above_lo = relu(affine(parent, eye, Vec::Constant(k, -lo)));
  const int room = relu(affine(above_lo, -eye, Vec::Constant(k, hi - lo)));
  return affine(room, -eye, Vec::Constant(k, hi));
}

int ExprGraph::max2(int a, int b) {
  const int k = size_of(a);
  if (size_of(b) != k) throw ShapeError("ExprGraph::max2: size mismatch");
  const Mat eye = Mat::Identity(k, k);
  Mat diff(k, 2 * k);
  diff << -eye, eye;
  const int r = relu(affine(concat({a, b}), diff, Vec::Zero(k)));
  Mat sum(k, 2 * k);
  sum << eye, eye;
  return affine(concat({a, r}), sum, Vec::Zero(k));
}

int ExprGraph::min2(int a, int b) {
  const int k = size_of(a);
  if (size_of(b) != k) throw ShapeError("ExprGraph::min2: size mismatch");
  const Mat eye = Mat::Identity(k, k);
  Mat diff(k, 2 * k);
  diff << eye, -eye;
  const int r = relu(affine(concat({a, b}), diff, Vec::Zero(k)));
  Mat sub(k, 2 * k);
  sub << eye, -eye;
  return affine(concat({a, r}), sub, Vec::Zero(k));
}

int ExprGraph::max_reduce(int parent) {
  const int k = size_of(parent);
  int acc = rows(parent, {0});
  for (int i = 1; i < k; ++i) acc = max2(acc, rows(parent, {i}));
  return acc;
}

int ExprGraph::abs(int parent) {
  const int k = size_of(parent);
  const Mat eye = Mat::Identity(k, k);
  Mat split(2 * k, k);
  split << eye, -eye;
  const int r = relu(affine(parent, split, Vec::Zero(2 * k)));
  Mat sum(k, 2 * k);
  sum << eye, eye;
  return affine(r, sum, Vec::Zero(k));
}

int ExprGraph::network(int parent, const Mlp& net) {
  if (net.input_dim() != size_of(parent)) throw ShapeError("ExprGraph::network: input size mismatch");
  int h = parent;
  for (int l = 0; l < net.num_layers(); ++l) {
    h = affine(h, net.weight(l), net.bias(l));
    if (l + 1 < net.num_layers()) h = relu(h);
  }
  return h;
}

std::vector<Vec> ExprGraph::evaluate_all(const Vec& x) const {
  if (x.size() != input_dim()) throw ShapeError("ExprGraph::evaluate: input size mismatch");
  std::vector<Vec> v(nodes_.size());
  v[0] = x;
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::Affine: v[i] = n.weight * v[n.parents[0]] + n.offset; break;
      case Op::Relu: v[i] = v[n.parents[0]].cwiseMax(0.0); break;
      case Op::Concat: {
        v[i].resize(n.size);
        Eigen::Index off = 0;
        for (int p : n.parents) {
          v[i].segment(off, v[p].size()) = v[p];
          off += v[p].size();
        }
        break;
      }
      case Op::Input: break;
    }
  }
  return v;
}

Vec ExprGraph::evaluate(int id, const Vec& x) const { return evaluate_all(x).at(id); }

}  // namespace nlb
