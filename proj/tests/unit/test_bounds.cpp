#include <doctest.h>

#include <random>

#include "nlb/bounds.hpp"
#include "nlb/lp.hpp"
#include "nlb/nn.hpp"
#include "nlb/rng.hpp"
#include "oracles.hpp"

using namespace nlb;

namespace {

BoxRegion random_box(std::mt19937_64& rng, int dim, double spread = 1.0) {
  std::uniform_real_distribution<double> c(-spread, spread), w(0.01, spread);
  Vec lo(dim), hi(dim);
  for (int i = 0; i < dim; ++i) {
    const double m = c(rng), h = w(rng);
    lo[i] = m - h;
    hi[i] = m + h;
  }
  return {lo, hi};
}

}  // namespace

TEST_CASE("affine graphs get exact bounds") {
  ExprGraph g(3);
  Mat w(2, 3);
  w << 1, -2, 0.5, -1, 0, 3;
  Vec b(2);
  b << 0.25, -1;
  const int out = g.affine(g.input(), w, b);
  const BoxRegion box(Vec::Constant(3, -1), Vec::Constant(3, 2));
  for (auto mode : {Relaxation::Interval, Relaxation::Linear}) {
    const auto bd = bound(g, box, mode);
    // Brute force over the 8 corners.
    Vec lo = Vec::Constant(2, 1e300), hi = Vec::Constant(2, -1e300);
    for (int c = 0; c < 8; ++c) {
      Vec x(3);
      for (int i = 0; i < 3; ++i) x[i] = (c >> i & 1) ? 2.0 : -1.0;
      const Vec y = w * x + b;
      lo = lo.cwiseMin(y);
      hi = hi.cwiseMax(y);
    }
    for (int r = 0; r < 2; ++r) {
      CHECK(bd.lo(out, r) == doctest::Approx(lo[r]).epsilon(1e-12));
      CHECK(bd.hi(out, r) == doctest::Approx(hi[r]).epsilon(1e-12));
      CHECK(bd.lo(out, r) <= lo[r]);
      CHECK(bd.hi(out, r) >= hi[r]);
    }
  }
}

TEST_CASE("network bounds contain a 50^4 grid") {
  const Mlp net = oracle::random_net({4, 8, 1}, 21);
  std::mt19937_64 rng(5);
  const BoxRegion box = random_box(rng, 4);
  ExprGraph g(4);
  const int out = g.network(g.input(), net);
  const auto lin = bound(g, box, Relaxation::Linear);
  const auto itv = bound(g, box, Relaxation::Interval);
  const int n = 50;
  Mat pts(4, n * n * n * n);
  int col = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          const int idx[4] = {a, b, c, d};
          for (int i = 0; i < 4; ++i) pts(i, col) = box.lower[i] + box.width()[i] * idx[i] / (n - 1);
          ++col;
        }
  const Mat y = net.forward_batch(pts);
  CHECK(lin.lo(out, 0) <= y.minCoeff());
  CHECK(lin.hi(out, 0) >= y.maxCoeff());
  CHECK(itv.lo(out, 0) <= lin.lo(out, 0));
  CHECK(itv.hi(out, 0) >= lin.hi(out, 0));
}

TEST_CASE("linear relaxation is never looser than intervals") {
  std::mt19937_64 rng(13);
  for (int k = 0; k < 100; ++k) {
    const Mlp net = oracle::random_net({4, 10, 10, 1}, 1000 + k);
    ExprGraph g(4);
    const int out = g.clip(g.network(g.input(), net), -1.0, 1.0);
    const BoxRegion box = random_box(rng, 4);
    const auto lin = bound(g, box, Relaxation::Linear);
    const auto itv = bound(g, box, Relaxation::Interval);
    for (int id = 0; id < g.num_nodes(); ++id) {
      REQUIRE((lin.lower[id].array() >= itv.lower[id].array()).all());
      REQUIRE((lin.upper[id].array() <= itv.upper[id].array()).all());
    }
    // Soundness at random points.
    for (int s = 0; s < 50; ++s) {
      const Vec x = uniform_in_box(rng, box.lower, box.upper);
      const double v = g.evaluate(out, x)[0];
      REQUIRE(lin.lo(out, 0) <= v);
      REQUIRE(v <= lin.hi(out, 0));
    }
  }
}

TEST_CASE("splitting never loosens interval bounds") {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 50; ++k) {
    const Mlp net = oracle::random_net({4, 12, 1}, 500 + k);
    ExprGraph g(4);
    const int out = g.network(g.input(), net);
    const BoxRegion box = random_box(rng, 4);
    int dim = 0;
    box.width().maxCoeff(&dim);
    BoxRegion left = box, right = box;
    left.upper[dim] = right.lower[dim] = box.center()[dim];
    // Adaptive linear relaxations may pick different slopes on a half, so
    // only interval propagation is monotone under splitting.
    const auto p = bound(g, box, Relaxation::Interval);
    for (const auto& half : {left, right}) {
      const auto c = bound(g, half, Relaxation::Interval);
      REQUIRE(c.lo(out, 0) >= p.lo(out, 0) - 1e-12);
      REQUIRE(c.hi(out, 0) <= p.hi(out, 0) + 1e-12);
    }
  }
}

TEST_CASE("backward enclosure brackets the output") {
  std::mt19937_64 rng(23);
  const Mlp net = oracle::random_net({4, 10, 10, 1}, 77);
  ExprGraph g(4);
  const int out = g.network(g.input(), net);
  const BoxRegion box = random_box(rng, 4, 0.5);
  const auto pre = bound(g, box, Relaxation::Linear);
  const LinearEnclosure e = backward_enclosure(g, pre, out, 0);
  double lo = 1e300, hi = -1e300;
  for (int s = 0; s < 2000; ++s) {
    const Vec x = uniform_in_box(rng, box.lower, box.upper);
    const double v = g.evaluate(out, x)[0];
    REQUIRE(e.lower.at(x) <= v + 1e-12);
    REQUIRE(v <= e.upper.at(x) + 1e-12);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(e.lower.min_over(box) <= lo);
  CHECK(e.upper.max_over(box) >= hi);
}

TEST_CASE("graph helpers evaluate to their concrete definitions") {
  ExprGraph g(3);
  const int x = g.input();
  const int c = g.clip(x, -0.5, 0.5);
  const int m = g.max_reduce(x);
  const int a = g.abs(x);
  const int r = g.rows(x, {2, 0, 2});
  const int mn = g.min2(g.rows(x, {0}), g.rows(x, {1}));
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const Vec v = uniform_in_box(rng, Vec::Constant(3, -2), Vec::Constant(3, 2));
    CHECK((g.evaluate(c, v) - v.cwiseMax(-0.5).cwiseMin(0.5)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(g.evaluate(m, v)[0] == doctest::Approx(v.maxCoeff()).epsilon(1e-15));
    CHECK((g.evaluate(a, v) - v.cwiseAbs()).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(g.evaluate(r, v)[1] == v[0]);
    CHECK(g.evaluate(mn, v)[0] == doctest::Approx(std::min(v[0], v[1])).epsilon(1e-15));
  }
}

TEST_CASE("LP feasibility over a box") {
  const BoxRegion box(Vec::Constant(2, 0), Vec::Constant(2, 1));
  // x + y <= 0.5 is feasible in the unit box.
  Mat a(1, 2);
  a << 1, 1;
  Vec b(1);
  b << 0.5;
  auto r = box_lp_feasibility(a, b, box);
  REQUIRE(r.status == LpResult::Status::Feasible);
  CHECK(r.point.sum() <= 0.5 + 1e-9);
  CHECK(box.contains(r.point.cwiseMax(0).cwiseMin(1)));
  // x + y <= -0.1 is not.
  b << -0.1;
  CHECK(box_lp_feasibility(a, b, box).status == LpResult::Status::Infeasible);
  // x >= 0.6 and x <= 0.4: contradictory rows.
  Mat a2(2, 2);
  a2 << -1, 0, 1, 0;
  Vec b2(2);
  b2 << -0.6, 0.4;
  CHECK(box_lp_feasibility(a2, b2, box).status == LpResult::Status::Infeasible);
  b2 << -0.4, 0.6;
  CHECK(box_lp_feasibility(a2, b2, box).status == LpResult::Status::Feasible);
}

TEST_CASE("LP infeasibility claims agree with sampling") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> d(-1, 1);
  const BoxRegion box(Vec::Constant(3, -1), Vec::Constant(3, 1));
  int infeasible = 0;
  for (int k = 0; k < 200; ++k) {
    Mat a(3, 3);
    Vec b(3);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a(i, j) = d(rng);
      b[i] = d(rng) - 0.6;
    }
    const auto r = box_lp_feasibility(a, b, box);
    if (r.status == LpResult::Status::Feasible) {
      REQUIRE(((a * r.point - b).array() <= 1e-7).all());
    } else if (r.status == LpResult::Status::Infeasible) {
      ++infeasible;
      for (int s = 0; s < 2000; ++s) {
        const Vec x = uniform_in_box(rng, box.lower, box.upper);
        REQUIRE_FALSE(((a * x - b).array() <= 0).all());
      }
    }
  }
  CHECK(infeasible > 0);
}
