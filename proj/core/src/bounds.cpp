#include "nlb/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlb/error.hpp"

namespace nlb {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
// Relative slack on concretized symbolic bounds. Coefficients carry a few
// hundred roundings at most for the graphs built here.
constexpr double kSymbolicSlack = 1e-12;

struct Symbolic {
  Mat lw, uw;  // rows = node size, cols = input dim
  Vec lc, uc;
};

Vec magnitude(const BoxRegion& box) { return box.lower.cwiseAbs().cwiseMax(box.upper.cwiseAbs()); }

void concretize(const Symbolic& s, const BoxRegion& box, Vec& lo, Vec& hi) {
  const Vec mid = box.center();
  const Vec rad = 0.5 * box.width();
  const Vec mag = magnitude(box);
  lo = s.lw * mid - s.lw.cwiseAbs() * rad + s.lc;
  hi = s.uw * mid + s.uw.cwiseAbs() * rad + s.uc;
  lo -= kSymbolicSlack * (s.lw.cwiseAbs() * mag + s.lc.cwiseAbs());
  hi += kSymbolicSlack * (s.uw.cwiseAbs() * mag + s.uc.cwiseAbs());
}

void affine_interval(const ExprGraph::Node& n, const Vec& plo, const Vec& phi, Vec& lo, Vec& hi) {
  const Vec mid = 0.5 * (plo + phi);
  const Vec rad = 0.5 * (phi - plo);
  const Mat aw = n.weight.cwiseAbs();
  const Vec c = n.weight * mid + n.offset;
  const Vec r = aw * rad;
  // Rows with all-zero weights are exact; others get a rounding allowance.
  const double k = (n.weight.cols() + 4) * kEps;
  Vec slack = k * (aw * (mid.cwiseAbs() + rad) + n.offset.cwiseAbs());
  for (Eigen::Index i = 0; i < aw.rows(); ++i) {
    if (aw.row(i).maxCoeff() == 0.0) slack[i] = 0.0;
  }
  lo = c - r - slack;
  hi = c + r + slack;
}

}  // namespace

double LinearFunction::min_over(const BoxRegion& box) const {
  const Vec mid = box.center();
  const Vec rad = 0.5 * box.width();
  const double v = a.dot(mid) - a.cwiseAbs().dot(rad) + c;
  return v - kSymbolicSlack * (a.cwiseAbs().dot(magnitude(box)) + std::abs(c));
}

double LinearFunction::max_over(const BoxRegion& box) const {
  const Vec mid = box.center();
  const Vec rad = 0.5 * box.width();
  const double v = a.dot(mid) + a.cwiseAbs().dot(rad) + c;
  return v + kSymbolicSlack * (a.cwiseAbs().dot(magnitude(box)) + std::abs(c));
}

IntervalBounds bound(const ExprGraph& graph, const BoxRegion& box, Relaxation relaxation) {
  const int d = graph.input_dim();
  if (box.dim() != d) throw ShapeError("bound: box dimension does not match the graph input");
  if (!box.is_finite()) throw PreconditionError("bound: box must be finite");

  const int count = graph.num_nodes();
  IntervalBounds b;
  b.lower.resize(count);
  b.upper.resize(count);
  b.lower[0] = box.lower;
  b.upper[0] = box.upper;

  const bool linear = relaxation == Relaxation::Linear;
  std::vector<Symbolic> sym(linear ? count : 0);
  if (linear) {
    sym[0] = {Mat::Identity(d, d), Mat::Identity(d, d), Vec::Zero(d), Vec::Zero(d)};
  }

  for (int i = 1; i < count; ++i) {
    const auto& n = graph.node(i);
    Vec lo, hi;
    switch (n.op) {
      case ExprGraph::Op::Affine: {
        const int p = n.parents[0];
        affine_interval(n, b.lower[p], b.upper[p], lo, hi);
        if (linear) {
          const Mat wp = n.weight.cwiseMax(0.0);
          const Mat wn = n.weight.cwiseMin(0.0);
          const Symbolic& s = sym[p];
          sym[i] = {wp * s.lw + wn * s.uw, wp * s.uw + wn * s.lw,
                    wp * s.lc + wn * s.uc + n.offset, wp * s.uc + wn * s.lc + n.offset};
        }
        break;
      }
      case ExprGraph::Op::Relu: {
        const int p = n.parents[0];
        const Vec& pl = b.lower[p];
        const Vec& pu = b.upper[p];
        lo = pl.cwiseMax(0.0);
        hi = pu.cwiseMax(0.0);
        if (linear) {
          Symbolic s = sym[p];
          for (int j = 0; j < n.size; ++j) {
            if (pu[j] <= 0.0) {
              s.lw.row(j).setZero();
              s.uw.row(j).setZero();
              s.lc[j] = s.uc[j] = 0.0;
            } else if (pl[j] < 0.0) {
              const double slope = pu[j] / (pu[j] - pl[j]);
              s.uw.row(j) *= slope;
              s.uc[j] = slope * (s.uc[j] - pl[j]);
              if (pu[j] <= -pl[j]) {
                s.lw.row(j).setZero();
                s.lc[j] = 0.0;
              }
            }
          }
          sym[i] = std::move(s);
        }
        break;
      }
      case ExprGraph::Op::Concat: {
        lo.resize(n.size);
        hi.resize(n.size);
        Eigen::Index off = 0;
        for (int p : n.parents) {
          const auto k = b.lower[p].size();
          lo.segment(off, k) = b.lower[p];
          hi.segment(off, k) = b.upper[p];
          off += k;
        }
        if (linear) {
          Symbolic s{Mat(n.size, d), Mat(n.size, d), Vec(n.size), Vec(n.size)};
          off = 0;
          for (int p : n.parents) {
            const auto k = b.lower[p].size();
            s.lw.middleRows(off, k) = sym[p].lw;
            s.uw.middleRows(off, k) = sym[p].uw;
            s.lc.segment(off, k) = sym[p].lc;
            s.uc.segment(off, k) = sym[p].uc;
            off += k;
          }
          sym[i] = std::move(s);
        }
        break;
      }
      case ExprGraph::Op::Input: break;
    }
    if (linear && n.op != ExprGraph::Op::Concat) {
      Vec slo, shi;
      concretize(sym[i], box, slo, shi);
      for (Eigen::Index j = 0; j < lo.size(); ++j) {
        const double l2 = std::max(lo[j], slo[j]);
        const double h2 = std::min(hi[j], shi[j]);
        // Crossed bounds can only come from rounding; keep the interval ones.
        if (l2 <= h2) {
          lo[j] = l2;
          hi[j] = h2;
        }
      }
    }
    b.lower[i] = std::move(lo);
    b.upper[i] = std::move(hi);
  }
  return b;
}

namespace {

LinearFunction backward(const ExprGraph& graph, const IntervalBounds& pre, int node, int row,
                        bool upper) {
  const int d = graph.input_dim();
  std::vector<RowVec> lam(node + 1);
  lam[node] = RowVec::Zero(graph.size_of(node));
  lam[node][row] = 1.0;
  double cst = 0.0;

  auto add = [&](int p, const RowVec& v) {
    if (lam[p].size() == 0) {
      lam[p] = v;
    } else {
      lam[p] += v;
    }
  };

  for (int k = node; k >= 1; --k) {
    if (lam[k].size() == 0) continue;
    const auto& n = graph.node(k);
    const RowVec& l = lam[k];
    switch (n.op) {
      case ExprGraph::Op::Affine:
        cst += l.dot(n.offset);
        add(n.parents[0], l * n.weight);
        break;
      case ExprGraph::Op::Concat: {
        Eigen::Index off = 0;
        for (int p : n.parents) {
          const int sz = graph.size_of(p);
          add(p, l.segment(off, sz));
          off += sz;
        }
        break;
      }
      case ExprGraph::Op::Relu: {
        const int p = n.parents[0];
        RowVec out = RowVec::Zero(n.size);
        for (int j = 0; j < n.size; ++j) {
          const double coef = l[j];
          if (coef == 0.0) continue;
          const double lo = pre.lower[p][j];
          const double hi = pre.upper[p][j];
          if (hi <= 0.0) continue;
          if (lo >= 0.0) {
            out[j] = coef;
            continue;
          }
          const bool use_upper = (coef > 0.0) == upper;
          if (use_upper) {
            const double slope = hi / (hi - lo);
            out[j] = coef * slope;
            cst += coef * (-slope * lo);
          } else if (hi > -lo) {
            out[j] = coef;
          }
        }
        add(p, out);
        break;
      }
      case ExprGraph::Op::Input: break;
    }
    lam[k] = RowVec();
  }
  LinearFunction f;
  f.a = lam[0].size() ? lam[0] : RowVec::Zero(d);
  f.c = cst;
  return f;
}

}  // namespace

LinearEnclosure backward_enclosure(const ExprGraph& graph, const IntervalBounds& pre, int node,
                                   int row) {
  if (node < 0 || node >= graph.num_nodes() || row < 0 || row >= graph.size_of(node)) {
    throw ShapeError("backward_enclosure: output out of range");
  }
  return {backward(graph, pre, node, row, false), backward(graph, pre, node, row, true)};
}

}  // namespace nlb
