#pragma once

/// @file expr_graph.hpp
/// Piecewise-linear computation graphs built from four primitive ops. Clip,
/// min, max, abs and whole networks are lowered to those primitives so the
/// bound propagators only need to understand Affine and Relu.

#include <cstdint>
#include <vector>

#include "nlb/types.hpp"

namespace nlb {

class Mlp;

class ExprGraph {
 public:
  enum class Op : std::uint8_t { Input, Affine, Relu, Concat };

  struct Node {
    Op op = Op::Input;
    std::vector<int> parents;
    Mat weight;  ///< Affine only
    Vec offset;  ///< Affine only
    int size = 0;
  };

  explicit ExprGraph(int input_dim);

  int input() const { return 0; }
  int input_dim() const { return nodes_[0].size; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_.at(id); }
  int size_of(int id) const { return nodes_.at(id).size; }

  int affine(int parent, Mat weight, Vec offset);
  int relu(int parent);
  int concat(std::vector<int> parents);

  /// Row selection (rows may repeat).
  int rows(int parent, const std::vector<int>& index);
  /// Elementwise clamp to [lo, hi] as max then min.
  int clip(int parent, double lo, double hi);
  int max2(int a, int b);
  int min2(int a, int b);
  /// Max over the rows of parent; one output row.
  int max_reduce(int parent);
  int abs(int parent);
  /// Appends net's layers on top of parent.
  int network(int parent, const Mlp& net);

  /// Value of every node at x.
  std::vector<Vec> evaluate_all(const Vec& x) const;
  Vec evaluate(int id, const Vec& x) const;

 private:
  int push(Node n);
  std::vector<Node> nodes_;
};

}  // namespace nlb
