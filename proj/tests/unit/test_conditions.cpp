#include <doctest.h>

#include <random>

#include "nlb/conditions.hpp"
#include "nlb/error.hpp"
#include "nlb/rng.hpp"
#include "oracles.hpp"

using namespace nlb;

namespace {

constexpr double kN = 0.001027;

FrwaCertificate frwa(const RwaTask& task, Mlp net, Witness w = {}) {
  FrwaCertificate c;
  c.net = std::make_shared<const Mlp>(std::move(net));
  c.witness = w;
  c.goal = task.goal;
  c.unsafe = task.unsafe;
  return c;
}

Mlp constant_controller(int in, const std::vector<double>& u) {
  Mlp net = Mlp::zeros({in, 2, static_cast<int>(u.size())});
  for (std::size_t i = 0; i < u.size(); ++i) net.bias(1)[static_cast<Eigen::Index>(i)] = u[i];
  return net;
}

BnbConfig quick(const Plant& plant, std::size_t boxes = 200000) {
  BnbConfig cfg = with_plant_widths(BnbConfig{}, plant);
  cfg.max_boxes = boxes;
  return cfg;
}

// Hand-written one-step safety implication on the spacecraft.
bool oracle_direct_violation(const Mlp& ctrl, const Plant& plant, const Vec& x) {
  const double lim = 0.2;
  if (oracle::under(x[2], x[3], 8) > lim + 2 * kN * oracle::over(x[0], x[1], 8)) return false;
  const auto u = oracle::forward(ctrl, oracle::as_std(x));
  Vec uc(2);
  uc << std::clamp(u[0], -1.0, 1.0), std::clamp(u[1], -1.0, 1.0);
  const Vec n = plant.step.a_matrix * x + plant.step.b_matrix * uc;
  return oracle::over(n[2], n[3], 8) >= lim + 2 * kN * oracle::under(n[0], n[1], 8);
}

}  // namespace

TEST_CASE("condition 1 on constant networks") {
  const RwaTask task = make_docking_task(1.0);
  const Plant plant = spacecraft_plant(SystemParams{});
  CHECK(check_condition1(frwa(task, oracle::constant_net(4, 0.0)), task, quick(plant)).verified());
  const Verdict bad = check_condition1(frwa(task, oracle::constant_net(4, 2.0)), task, quick(plant));
  REQUIRE(bad.has_counterexample());
  CHECK(task.initial.contains(bad.counterexample));
  CHECK_FALSE(task.goal.contains(bad.counterexample));
}

TEST_CASE("condition 1 agrees with a 40^4 grid over X_I") {
  const RwaTask task = make_docking_task(1.0);
  const Plant plant = spacecraft_plant(SystemParams{});
  const auto cover = box_cover(task.initial, task.domain);
  REQUIRE(cover.size() == 1);
  const BoxRegion xi = cover[0];
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const Mlp net = oracle::random_net({4, 10, 1}, 70 + seed);
    // Grid maximum over X_I outside the goal (the filter forces c1 on the goal).
    double grid_max = -1e300;
    const int n = 40;
    Mat pts(4, n * n * n * n);
    int col = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) {
            const int idx[4] = {a, b, c, d};
            for (int i = 0; i < 4; ++i) pts(i, col) = xi.lower[i] + xi.width()[i] * idx[i] / (n - 1);
            ++col;
          }
    const Mat v = net.forward_batch(pts);
    for (int k = 0; k < pts.cols(); ++k) {
      if (!task.goal.contains(pts.col(k))) grid_max = std::max(grid_max, v(0, k));
    }
    for (double shift : {-0.05, 0.05}) {
      // Shift the network so beta sits clearly below or above the grid maximum.
      Mlp moved = net;
      moved.bias(1)[0] += 1.0 - grid_max + shift;
      const FrwaCertificate c = frwa(task, moved);
      const Verdict verdict = check_condition1(c, task, quick(plant));
      if (shift < 0) {
        CHECK(verdict.kind != Verdict::Kind::Counterexample);
      } else {
        REQUIRE(verdict.has_counterexample());
        CHECK(violates_condition1(c, task, verdict.counterexample));
        CHECK(oracle::forward(moved, oracle::as_std(verdict.counterexample))[0] > 1.0);
      }
    }
  }
}

TEST_CASE("condition 2: one-step-to-goal fixture verifies through the goal disjunct") {
  // A plant that maps every state to the origin.
  Plant plant = spacecraft_plant(SystemParams{});
  plant.name = "collapse";
  plant.step.a_matrix.setZero();
  plant.step.b_matrix.setZero();
  const RwaTask task = make_docking_task(1.0);
  // A certificate that never decreases; only goal entry can discharge condition 2.
  const FrwaCertificate c = frwa(task, oracle::constant_net(4, 0.0));
  const Verdict v = check_condition2_filtered(c, constant_controller(4, {0, 0}), plant, task, quick(plant));
  CHECK(v.verified());
}

TEST_CASE("condition 2: a non-decreasing certificate is refuted concretely") {
  const Plant plant = spacecraft_plant(SystemParams{});
  const RwaTask task = make_docking_task(1.0);
  const FrwaCertificate c = frwa(task, oracle::constant_net(4, 0.0));
  const Mlp ctrl = constant_controller(4, {0, 0});
  const Verdict v = check_condition2_filtered(c, ctrl, plant, task, quick(plant));
  REQUIRE(v.has_counterexample());
  const Vec& x = v.counterexample;
  CHECK(violates_condition2_filtered(c, ctrl, plant, task, x));
  const Vec next = plant.next(x, ctrl.forward(x));
  CHECK_FALSE(task.goal.contains(x));
  CHECK_FALSE(task.unsafe.contains(x));
  const bool no_decrease = evaluate(c, next) - evaluate(c, x) > -c.witness.epsilon;
  CHECK((task.unsafe.contains(next) || (no_decrease && !task.goal.contains(next))));
}

TEST_CASE("condition 2 agrees with a dense grid on the 2-state surrogate") {
  const Plant plant = double_integrator_plant(SystemParams{});
  const RwaTask task = make_surrogate_task(1.0);
  const BoxRegion& dom = task.domain;
  int refuted = 0, verified = 0;
  for (int k = 0; k < 8; ++k) {
    const Mlp ctrl = oracle::random_net({2, 6, 1}, 900 + k, 0.1);
    Mlp cert = oracle::random_net({2, 6, 1}, 950 + k);
    // Odd k: push V above beta everywhere so the premise is empty.
    if (k % 2 == 1) cert.bias(1)[0] += 100.0;
    const FrwaCertificate c = frwa(task, cert);
    const Verdict v = check_condition2_filtered(c, ctrl, plant, task, quick(plant, 400000));
    bool grid_violation = false;
    const int n = 400;
    for (int i = 0; i <= n && !grid_violation; ++i) {
      for (int j = 0; j <= n && !grid_violation; ++j) {
        Vec x(2);
        x << dom.lower[0] + dom.width()[0] * i / n, dom.lower[1] + dom.width()[1] * j / n;
        if (task.goal.contains(x) || task.unsafe.contains(x)) continue;
        const double vx = oracle::forward(cert, oracle::as_std(x))[0];
        if (vx > 1.0) continue;
        Vec u(1);
        u << std::clamp(oracle::forward(ctrl, oracle::as_std(x))[0], -1.0, 1.0);
        const Vec nx = plant.step.a_matrix * x + plant.step.b_matrix * u;
        const double vn = evaluate(c, nx);
        const bool ok = (vx - vn >= c.witness.epsilon || task.goal.contains(nx)) && !task.unsafe.contains(nx);
        grid_violation = !ok;
      }
    }
    if (grid_violation) CHECK(v.kind != Verdict::Kind::Verified);
    if (v.verified()) {
      CHECK_FALSE(grid_violation);
      ++verified;
    }
    if (v.has_counterexample()) {
      CHECK(violates_condition2_filtered(c, ctrl, plant, task, v.counterexample));
      ++refuted;
    }
  }
  CHECK(verified >= 4);
  CHECK(refuted >= 1);
}

TEST_CASE("condition 3 (plain certificates)") {
  const RwaTask task = make_docking_task(1.0);
  const Plant plant = spacecraft_plant(SystemParams{});
  const Witness w;
  const RwaCertificate at_alpha{std::make_shared<const Mlp>(oracle::constant_net(4, w.alpha)), w};
  CHECK(check_condition3(at_alpha, task, quick(plant)).verified());
  const RwaCertificate zero{std::make_shared<const Mlp>(oracle::constant_net(4, 0.0)), w};
  const Verdict v = check_condition3(zero, task, quick(plant));
  REQUIRE(v.has_counterexample());
  CHECK(task.unsafe.contains(v.counterexample));
  CHECK(task.domain.contains(v.counterexample));
}

TEST_CASE("plain condition 2 requires the successor to stay in the domain") {
  const Plant plant = spacecraft_plant(SystemParams{});
  const RwaTask task = make_docking_task(1.0);
  const RwaCertificate zero{std::make_shared<const Mlp>(oracle::constant_net(4, 0.0)), Witness{}};
  const Mlp ctrl = constant_controller(4, {0, 0});
  const Verdict v = check_condition2(zero, ctrl, plant, task, quick(plant));
  REQUIRE(v.has_counterexample());
  CHECK(violates_condition2(zero, ctrl, plant, task, v.counterexample));
}

TEST_CASE("direct safety check") {
  const SystemParams p;
  const Plant plant = spacecraft_plant(p);
  BnbConfig cfg;
  cfg.max_boxes = 200000;
  // Zero controller near the origin at rest.
  const BoxRegion small(Vec::Constant(4, -0.1).eval(), Vec::Constant(4, 0.1).eval());
  BoxRegion rest_small = small;
  rest_small.lower.tail(2).setZero();
  rest_small.upper.tail(2).setZero();
  CHECK(check_safety_direct(constant_controller(4, {0, 0}), p, rest_small, 8, cfg).verified());
  // Full thrust from rest: one step adds at most sqrt(2)/12 ~ 0.118 m/s < 0.2.
  CHECK(check_safety_direct(constant_controller(4, {1, 1}), p, rest_small, 8, cfg).verified());
  CHECK(check_safety_direct(constant_controller(4, {-5, 3}), p, rest_small, 8, cfg).verified());

  // Random controllers against a grid.
  Vec lo(4), hi(4);
  lo << -2, -2, -0.3, -0.3;
  hi << 2, 2, 0.3, 0.3;
  const BoxRegion dom(lo, hi);
  for (int k = 0; k < 3; ++k) {
    const Mlp ctrl = oracle::random_net({4, 6, 2}, 60 + k, 1.0);
    BnbConfig c2 = cfg;
    c2.time_budget_s = 60;
    const Verdict v = check_safety_direct(ctrl, p, dom, 8, c2);
    bool grid_violation = false;
    const int n = 16;
    for (int a = 0; a <= n && !grid_violation; ++a)
      for (int b = 0; b <= n && !grid_violation; ++b)
        for (int c = 0; c <= n && !grid_violation; ++c)
          for (int d = 0; d <= n && !grid_violation; ++d) {
            const int idx[4] = {a, b, c, d};
            Vec x(4);
            for (int i = 0; i < 4; ++i) x[i] = lo[i] + (hi[i] - lo[i]) * idx[i] / n;
            grid_violation = oracle_direct_violation(ctrl, plant, x);
          }
    if (grid_violation) CHECK(v.kind != Verdict::Kind::Verified);
    if (v.verified()) CHECK_FALSE(grid_violation);
    if (v.has_counterexample()) CHECK(oracle_direct_violation(ctrl, plant, v.counterexample));
  }
}

TEST_CASE("containment and membership searches") {
  const BoxRegion universe(Vec::Constant(2, -3), Vec::Constant(2, 3));
  const Region small = Region::box(BoxRegion(Vec::Constant(2, -1), Vec::Constant(2, 1)));
  const Region big = Region::box(BoxRegion(Vec::Constant(2, -2), Vec::Constant(2, 2)));
  BnbConfig cfg;
  CHECK(check_containment(small, big, universe, cfg).verified());
  const Verdict v = check_containment(big, small, universe, cfg);
  REQUIRE(v.has_counterexample());
  CHECK(big.contains(v.counterexample));
  CHECK_FALSE(small.contains(v.counterexample));
  const Region empty = Region::intersection_of({small, Region::complement(big)});
  CHECK(find_members(empty, universe, cfg).verified());
  const Verdict m = find_members(Region::intersection_of({big, Region::complement(small)}), universe, cfg);
  REQUIRE(m.has_counterexample());
  CHECK(big.contains(m.counterexample));
  CHECK_FALSE(small.contains(m.counterexample));
}
