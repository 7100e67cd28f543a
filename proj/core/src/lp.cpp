#include "nlb/lp.hpp"

#include <cmath>
#include <vector>

#include "nlb/error.hpp"

namespace nlb {

namespace {

constexpr double kPivotEps = 1e-11;
constexpr int kMaxPivots = 500;

// Dense tableau for  max c.y  s.t.  M y <= q, y >= 0, with the usual
// auxiliary-variable phase one. Column n is the auxiliary variable.
class Tableau {
 public:
  Tableau(const Mat& m, const Vec& q)
      : rows_(static_cast<int>(m.rows())), cols_(static_cast<int>(m.cols())),
        d_(Mat::Zero(rows_ + 2, cols_ + 2)), basic_(rows_), nonbasic_(cols_ + 1) {
    d_.topLeftCorner(rows_, cols_) = m;
    for (int i = 0; i < rows_; ++i) {
      basic_[i] = cols_ + i;
      d_(i, cols_) = -1.0;
      d_(i, cols_ + 1) = q[i];
    }
    for (int j = 0; j < cols_; ++j) nonbasic_[j] = j;
    nonbasic_[cols_] = -1;
    d_(rows_ + 1, cols_) = 1.0;
  }

  // Returns the phase-one optimum (0 when feasible), or nullopt when the
  // pivot budget ran out.
  std::optional<double> phase_one() {
    int r = 0;
    for (int i = 1; i < rows_; ++i) {
      if (d_(i, cols_ + 1) < d_(r, cols_ + 1)) r = i;
    }
    if (rows_ == 0 || d_(r, cols_ + 1) >= 0.0) return 0.0;
    pivot(r, cols_);
    if (!simplex(rows_ + 1)) return std::nullopt;
    return d_(rows_ + 1, cols_ + 1);
  }

  Vec primal() const {
    Vec y = Vec::Zero(cols_);
    for (int i = 0; i < rows_; ++i) {
      if (basic_[i] >= 0 && basic_[i] < cols_) y[basic_[i]] = d_(i, cols_ + 1);
    }
    return y;
  }

  // Multipliers of the constraint rows read off the phase-one objective row.
  Vec duals() const {
    Vec lam = Vec::Zero(rows_);
    for (int j = 0; j <= cols_; ++j) {
      const int v = nonbasic_[j];
      if (v >= cols_) lam[v - cols_] = std::max(0.0, d_(rows_ + 1, j));
    }
    return lam;
  }

 private:
  void pivot(int r, int s) {
    const double inv = 1.0 / d_(r, s);
    for (int i = 0; i < rows_ + 2; ++i) {
      if (i == r) continue;
      const double f = d_(i, s) * inv;
      if (f == 0.0) continue;
      for (int j = 0; j < cols_ + 2; ++j) {
        if (j != s) d_(i, j) -= d_(r, j) * f;
      }
    }
    for (int j = 0; j < cols_ + 2; ++j) {
      if (j != s) d_(r, j) *= inv;
    }
    for (int i = 0; i < rows_ + 2; ++i) {
      if (i != r) d_(i, s) *= -inv;
    }
    d_(r, s) = inv;
    std::swap(basic_[r], nonbasic_[s]);
  }

  bool simplex(int objective_row) {
    for (int iter = 0; iter < kMaxPivots; ++iter) {
      int s = -1;
      for (int j = 0; j <= cols_; ++j) {
        // Bland: smallest index among improving columns.
        if (d_(objective_row, j) < -kPivotEps && (s == -1 || nonbasic_[j] < nonbasic_[s])) s = j;
      }
      if (s == -1) return true;
      int r = -1;
      for (int i = 0; i < rows_; ++i) {
        if (d_(i, s) <= kPivotEps) continue;
        if (r == -1) {
          r = i;
          continue;
        }
        const double lhs = d_(i, cols_ + 1) / d_(i, s);
        const double rhs = d_(r, cols_ + 1) / d_(r, s);
        if (lhs < rhs || (lhs == rhs && basic_[i] < basic_[r])) r = i;
      }
      if (r == -1) return false;  // unbounded; cannot happen in phase one
      pivot(r, s);
    }
    return false;
  }

  int rows_, cols_;
  Mat d_;
  std::vector<int> basic_, nonbasic_;
};

}  // namespace

LpResult box_lp_feasibility(const Mat& a, const Vec& b, const BoxRegion& box) {
  const int d = box.dim();
  if (a.cols() != d || a.rows() != b.size()) throw ShapeError("box_lp_feasibility: shape mismatch");
  if (!box.is_finite()) throw PreconditionError("box_lp_feasibility: box must be finite");
  const int k = static_cast<int>(a.rows());

  LpResult res;
  if (k == 0) {
    res.status = LpResult::Status::Feasible;
    res.point = box.center();
    return res;
  }

  // Substitute y = x - lo so y >= 0; box upper faces become rows.
  const Vec w = box.width();
  Mat m(k + d, d);
  Vec q(k + d);
  m.topRows(k) = a;
  q.head(k) = b - a * box.lower;
  m.bottomRows(d) = Mat::Identity(d, d);
  q.tail(d) = w;

  // Row scaling keeps the pivot tolerances meaningful.
  for (int i = 0; i < k; ++i) {
    const double s = m.row(i).cwiseAbs().maxCoeff();
    if (s > 0) {
      m.row(i) /= s;
      q[i] /= s;
    }
  }

  Tableau t(m, q);
  const auto opt = t.phase_one();
  if (!opt) return res;

  const double feas_tol = 1e-9;
  if (*opt >= -feas_tol) {
    Vec x = box.lower + t.primal();
    x = x.cwiseMax(box.lower).cwiseMin(box.upper);
    res.status = LpResult::Status::Feasible;
    res.point = std::move(x);
    return res;
  }

  // Check the certificate in the original coordinates: with lambda >= 0, if
  // min over the box of sum_k lambda_k (a_k x - b_k) > 0 no point satisfies all rows.
  Vec lam = t.duals().head(k);
  for (int i = 0; i < k; ++i) {
    const double s = a.row(i).cwiseAbs().maxCoeff();
    if (s > 0) lam[i] /= s;
  }
  const RowVec comb = lam.transpose() * a;
  const double rhs = lam.dot(b);
  const Vec mid = box.center();
  const Vec rad = 0.5 * w;
  const double min_val = comb.dot(mid) - comb.cwiseAbs().dot(rad) - rhs;
  const Vec mag = box.lower.cwiseAbs().cwiseMax(box.upper.cwiseAbs());
  const double scale = comb.cwiseAbs().dot(mag) + lam.cwiseAbs().dot(b.cwiseAbs()) +
                       (lam.transpose() * a.cwiseAbs()).dot(mag);
  if (lam.maxCoeff() > 0 && min_val > 1e-12 * scale) {
    res.status = LpResult::Status::Infeasible;
  }
  return res;
}

}  // namespace nlb
