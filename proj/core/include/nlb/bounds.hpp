#pragma once

/// @file bounds.hpp
/// Sound output bounds of an ExprGraph over a box: interval propagation,
/// forward symbolic (triangle-relaxed) propagation, and backward linear
/// bounds for single outputs.

#include <vector>

#include "nlb/expr_graph.hpp"
#include "nlb/geometry.hpp"

namespace nlb {

enum class Relaxation : std::uint8_t { Interval, Linear };

/// Per-node lower/upper vectors, indexed like the graph's nodes.
struct IntervalBounds {
  std::vector<Vec> lower;
  std::vector<Vec> upper;

  double lo(int node, int row) const { return lower[node][row]; }
  double hi(int node, int row) const { return upper[node][row]; }
};

/// a . x + c
struct LinearFunction {
  RowVec a;
  double c = 0.0;

  double at(const Vec& x) const { return a.dot(x) + c; }
  /// Sound min / max over the box (rounding slack included).
  double min_over(const BoxRegion& box) const;
  double max_over(const BoxRegion& box) const;
};

struct LinearEnclosure {
  LinearFunction lower;  ///< lower.at(x) <= g(x) on the box
  LinearFunction upper;  ///< g(x) <= upper.at(x) on the box
};

/// Bounds for every node. Linear mode is intersected with interval mode, so
/// it is never looser.
IntervalBounds bound(const ExprGraph& graph, const BoxRegion& box, Relaxation relaxation);

/// Backward linear relaxation of one output row, using `pre` for the
/// pre-activation intervals of every Relu on the way down.
LinearEnclosure backward_enclosure(const ExprGraph& graph, const IntervalBounds& pre,
                                   int node, int row);

}  // namespace nlb
