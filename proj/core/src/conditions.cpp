#include "nlb/conditions.hpp"

#include <cmath>

#include "nlb/error.hpp"
#include "nlb/region_compile.hpp"

namespace nlb {

namespace {

// x' = A x + B clip(pi(x)) + c as a graph node.
int successor_node(ExprGraph& g, const Mlp& controller, const Plant& plant) {
  if (controller.input_dim() != plant.state_dim() || controller.output_dim() != plant.input_dim()) {
    throw ShapeError("controller shape does not match the plant");
  }
  const int u = g.clip(g.network(g.input(), controller), -plant.thrust_limit, plant.thrust_limit);
  const int d = plant.state_dim();
  const int k = plant.input_dim();
  Mat ab(d, d + k);
  ab << plant.step.a_matrix, plant.step.b_matrix;
  return g.affine(g.concat({g.input(), u}), ab, plant.step.c_vector);
}

std::vector<BoxRegion> cover_or_throw(const Region& r, const BoxRegion& domain) {
  if (!domain.is_finite()) throw PreconditionError("verification domain must be finite");
  return box_cover(r, domain);
}

int difference_node(ExprGraph& g, int a, int b) {
  Mat w(1, 2);
  w << 1.0, -1.0;
  return g.affine(g.concat({a, b}), w, Vec::Zero(1));
}

void check_state(const RwaTask& task, const Vec& x) {
  if (x.size() != task.domain.dim()) throw ShapeError("state dimension does not match the task");
}

}  // namespace

BnbConfig with_plant_widths(BnbConfig cfg, const Plant& plant) {
  if (cfg.min_box_width.size() == 0) {
    cfg.min_box_width = Vec::Constant(plant.state_dim(), 1e-5);
    for (int p : plant.position_dims) cfg.min_box_width[p] = 1e-4;
  }
  return cfg;
}

// ---------------------------------------------------------------- concrete predicates

bool violates_condition1(const FrwaCertificate& cert, const RwaTask& task, const Vec& x) {
  check_state(task, x);
  return task.initial.contains(x) && evaluate(cert, x) > cert.witness.beta;
}

bool violates_condition1(const RwaCertificate& cert, const RwaTask& task, const Vec& x) {
  check_state(task, x);
  return task.initial.contains(x) && evaluate(cert, x) > cert.witness.beta;
}

bool violates_condition2_filtered(const FrwaCertificate& cert, const Mlp& controller,
                                  const Plant& plant, const RwaTask& task, const Vec& x) {
  check_state(task, x);
  if (!task.domain.contains(x) || cert.unsafe.contains(x) || cert.goal.contains(x)) return false;
  const double v = cert.net->forward_scalar(x);
  if (v > cert.witness.beta) return false;
  const Vec next = plant.next(x, controller.forward(x));
  const bool decrease = v - evaluate(cert, next) >= cert.witness.epsilon;
  const bool ok = (decrease || cert.goal.contains(next)) && !cert.unsafe.contains(next);
  return !ok;
}

bool violates_condition2(const RwaCertificate& cert, const Mlp& controller, const Plant& plant,
                         const RwaTask& task, const Vec& x) {
  check_state(task, x);
  if (!task.domain.contains(x) || task.goal.contains(x)) return false;
  const double v = cert.net->forward_scalar(x);
  if (v > cert.witness.beta) return false;
  const Vec next = plant.next(x, controller.forward(x));
  const bool ok = v - cert.net->forward_scalar(next) >= cert.witness.epsilon && task.domain.contains(next);
  return !ok;
}

bool violates_condition3(const RwaCertificate& cert, const RwaTask& task, const Vec& x) {
  check_state(task, x);
  return task.domain.contains(x) && task.unsafe.contains(x) &&
         cert.net->forward_scalar(x) < cert.witness.alpha;
}

bool violates_safety_direct(const Mlp& controller, const Plant& plant, const SpeedLimit& limit,
                            const Vec& x) {
  auto norms = [&](const Vec& s, const std::vector<int>& dims) {
    if (dims.size() == 1) {
      const double a = std::abs(s[dims[0]]);
      return std::make_pair(a, a);
    }
    return std::make_pair(under_norm(s[dims[0]], s[dims[1]], limit.n_directions),
                          over_norm(s[dims[0]], s[dims[1]], limit.n_directions));
  };
  const auto [v_under, v_over] = norms(x, limit.velocity_dims);
  const auto [p_under, p_over] = norms(x, limit.position_dims);
  (void)v_over;
  (void)p_under;
  const bool within = v_under <= limit.base_speed + limit.slope * p_over;
  if (!within) return false;
  const Vec next = plant.next(x, controller.forward(x));
  return limit.violation_margin(next) >= 0.0;
}

// ---------------------------------------------------------------- queries

Query condition1_query(const FrwaCertificate& cert, const RwaTask& task) {
  cert.validate();
  Query q(task.domain.dim(), "condition1");
  const int x = q.graph.input();
  const int v = q.graph.network(x, *cert.net);
  const Formula outside = !in_region(q, task.initial, x);
  // Filtered value <= beta: goal gives c1 <= beta; unsafe would give c2 > beta.
  const Formula ok = in_region(q, cert.goal, x) ||
                     (!in_region(q, cert.unsafe, x) && q.le(v, 0, cert.witness.beta));
  q.condition = outside || ok;
  q.domain = cover_or_throw(task.initial, task.domain);
  q.violates = [cert, task](const Vec& p) { return violates_condition1(cert, task, p); };
  return q;
}

Query condition1_query(const RwaCertificate& cert, const RwaTask& task) {
  cert.validate();
  Query q(task.domain.dim(), "condition1");
  const int x = q.graph.input();
  const int v = q.graph.network(x, *cert.net);
  q.condition = !in_region(q, task.initial, x) || q.le(v, 0, cert.witness.beta);
  q.domain = cover_or_throw(task.initial, task.domain);
  q.violates = [cert, task](const Vec& p) { return violates_condition1(cert, task, p); };
  return q;
}

Query condition2_filtered_query(const FrwaCertificate& cert, const Mlp& controller,
                                const Plant& plant, const RwaTask& task) {
  cert.validate();
  Query q(task.domain.dim(), "condition2_filtered");
  auto& g = q.graph;
  const int x = g.input();
  const int next = successor_node(g, controller, plant);
  const int v = g.network(x, *cert.net);
  const int v_next = g.network(next, *cert.net);
  const int diff = difference_node(g, v, v_next);

  const Formula excluded = in_region(q, cert.unsafe, x) || in_region(q, cert.goal, x) ||
                           q.gt(v, 0, cert.witness.beta);
  const Formula progress = q.ge(diff, 0, cert.witness.epsilon) || in_region(q, cert.goal, next);
  q.condition = excluded || (progress && !in_region(q, cert.unsafe, next));
  q.domain = {task.domain};
  auto ctrl = std::make_shared<const Mlp>(controller);
  q.violates = [cert, ctrl, plant, task](const Vec& p) {
    return violates_condition2_filtered(cert, *ctrl, plant, task, p);
  };
  return q;
}

Query condition2_query(const RwaCertificate& cert, const Mlp& controller, const Plant& plant,
                       const RwaTask& task) {
  cert.validate();
  Query q(task.domain.dim(), "condition2");
  auto& g = q.graph;
  const int x = g.input();
  const int next = successor_node(g, controller, plant);
  const int v = g.network(x, *cert.net);
  const int v_next = g.network(next, *cert.net);
  const int diff = difference_node(g, v, v_next);
  const Formula excluded = in_region(q, task.goal, x) || q.gt(v, 0, cert.witness.beta);
  // The conditions only speak about X, so the successor must stay inside it.
  const Formula stays = in_region(q, Region::box(task.domain), next);
  q.condition = excluded || (q.ge(diff, 0, cert.witness.epsilon) && stays);
  q.domain = {task.domain};
  auto ctrl = std::make_shared<const Mlp>(controller);
  q.violates = [cert, ctrl, plant, task](const Vec& p) {
    return violates_condition2(cert, *ctrl, plant, task, p);
  };
  return q;
}

Query condition3_query(const RwaCertificate& cert, const RwaTask& task) {
  cert.validate();
  Query q(task.domain.dim(), "condition3");
  const int x = q.graph.input();
  const int v = q.graph.network(x, *cert.net);
  q.condition = !in_region(q, task.unsafe, x) || q.ge(v, 0, cert.witness.alpha);
  q.domain = cover_or_throw(task.unsafe, task.domain);
  q.violates = [cert, task](const Vec& p) { return violates_condition3(cert, task, p); };
  return q;
}

// ---------------------------------------------------------------- checks

Verdict check_condition1(const FrwaCertificate& cert, const RwaTask& task, const BnbConfig& cfg) {
  return branch_and_bound(condition1_query(cert, task), cfg);
}

Verdict check_condition1(const RwaCertificate& cert, const RwaTask& task, const BnbConfig& cfg) {
  return branch_and_bound(condition1_query(cert, task), cfg);
}

Verdict check_condition2_filtered(const FrwaCertificate& cert, const Mlp& controller,
                                  const Plant& plant, const RwaTask& task, const BnbConfig& cfg) {
  return branch_and_bound(condition2_filtered_query(cert, controller, plant, task), cfg);
}

Verdict check_condition2_filtered(const FrwaCertificate& cert, const Mlp& controller,
                                  const SystemParams& params, const RwaTask& task,
                                  const BnbConfig& cfg) {
  const Plant plant = spacecraft_plant(params);
  return check_condition2_filtered(cert, controller, plant, task, with_plant_widths(cfg, plant));
}

Verdict check_condition2(const RwaCertificate& cert, const Mlp& controller, const Plant& plant,
                         const RwaTask& task, const BnbConfig& cfg) {
  return branch_and_bound(condition2_query(cert, controller, plant, task), cfg);
}

Verdict check_condition3(const RwaCertificate& cert, const RwaTask& task, const BnbConfig& cfg) {
  return branch_and_bound(condition3_query(cert, task), cfg);
}

Verdict check_safety_direct(const Mlp& controller, const Plant& plant, const BoxRegion& domain,
                            const SpeedLimit& limit, const BnbConfig& cfg) {
  if (!domain.is_finite()) throw PreconditionError("verification domain must be finite");
  Query q(plant.state_dim(), "safety_direct");
  auto& g = q.graph;
  const int x = g.input();
  const int next = successor_node(g, controller, plant);
  // under(v) - base - slope * over(p) <= 0 at time t ...
  const int vel = g.rows(x, limit.velocity_dims);
  const int pos = g.rows(x, limit.position_dims);
  Mat w(1, 2);
  w << 1.0, -limit.slope;
  Vec c(1);
  c << -limit.base_speed;
  const int pre = g.affine(g.concat({under_norm_node(g, vel, limit.n_directions),
                                     over_norm_node(g, pos, limit.n_directions)}),
                           w, c);
  // ... must not step into over(v') >= base + slope * under(p').
  const int post = speed_margin_node(q, limit, next);
  q.condition = q.gt(pre, 0, 0.0) || q.lt(post, 0, 0.0);
  q.domain = {domain};
  auto ctrl = std::make_shared<const Mlp>(controller);
  q.violates = [ctrl, plant, limit](const Vec& p) {
    return violates_safety_direct(*ctrl, plant, limit, p);
  };
  return branch_and_bound(q, cfg);
}

Verdict check_safety_direct(const Mlp& controller, const SystemParams& params,
                            const BoxRegion& domain, int n_directions, const BnbConfig& cfg) {
  const Plant plant = spacecraft_plant(params);
  SpeedLimit limit;
  limit.position_dims = plant.position_dims;
  limit.velocity_dims = plant.velocity_dims;
  limit.slope = 2.0 * params.mean_motion;
  limit.n_directions = n_directions;
  return check_safety_direct(controller, plant, domain, limit, with_plant_widths(cfg, plant));
}

Verdict check_containment(const Region& inner, const Region& outer, const BoxRegion& universe,
                          const BnbConfig& cfg) {
  Query q(universe.dim(), "containment");
  const int x = q.graph.input();
  q.condition = !in_region(q, inner, x) || in_region(q, outer, x);
  q.domain = cover_or_throw(inner, universe);
  q.violates = [inner, outer](const Vec& p) { return inner.contains(p) && !outer.contains(p); };
  return branch_and_bound(q, cfg);
}

Verdict find_members(const Region& r, const BoxRegion& universe, const BnbConfig& cfg) {
  Query q(universe.dim(), "membership");
  q.condition = !in_region(q, r, q.graph.input());
  q.domain = cover_or_throw(r, universe);
  q.violates = [r](const Vec& p) { return r.contains(p); };
  return branch_and_bound(q, cfg);
}

}  // namespace nlb
