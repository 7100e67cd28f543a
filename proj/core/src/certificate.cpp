#include "nlb/certificate.hpp"

#include <cmath>
#include <limits>
#include <queue>

#include "nlb/bounds.hpp"
#include "nlb/error.hpp"
#include "nlb/verifier.hpp"

namespace nlb {

void Witness::validate() const {
  if (!(alpha > beta)) throw PreconditionError("witness: alpha must exceed beta");
  if (!(epsilon > 0)) throw PreconditionError("witness: epsilon must be positive");
}

void FrwaCertificate::validate() const {
  witness.validate();
  if (!net) throw PreconditionError("certificate: missing network");
  if (net->output_dim() != 1) throw ShapeError("certificate: network must have one output");
  if (!goal.valid() || !unsafe.valid()) throw PreconditionError("certificate: missing filter regions");
  if (!(c1 <= witness.beta && witness.alpha <= c2)) {
    throw PreconditionError("certificate: clamps must satisfy c1 <= beta < alpha <= c2");
  }
}

void RwaCertificate::validate() const {
  witness.validate();
  if (!net) throw PreconditionError("certificate: missing network");
  if (net->output_dim() != 1) throw ShapeError("certificate: network must have one output");
}

double evaluate(const FrwaCertificate& cert, const Vec& s) {
  if (cert.goal.contains(s)) return cert.c1;
  if (cert.unsafe.contains(s)) return cert.c2;
  return cert.net->forward_scalar(s);
}

double evaluate_raw(const FrwaCertificate& cert, const Vec& s) { return cert.net->forward_scalar(s); }

double evaluate(const RwaCertificate& cert, const Vec& s) { return cert.net->forward_scalar(s); }

double network_lower_bound(const Mlp& net, const BoxRegion& box, std::size_t max_boxes, double target) {
  ExprGraph g(net.input_dim());
  const int out = g.network(g.input(), net);

  struct Item {
    double lb;
    BoxRegion box;
    bool operator<(const Item& o) const { return lb > o.lb; }  // min-heap
  };
  auto lower = [&](const BoxRegion& b) { return bound(g, b, Relaxation::Linear).lo(out, 0); };

  std::priority_queue<Item> heap;
  heap.push({lower(box), box});
  double best_value = net.forward_scalar(box.center());
  for (std::size_t used = 1; used < max_boxes;) {
    Item top = heap.top();
    // Nothing left to gain below the target or the sampled minimum.
    if (top.lb >= target || best_value - top.lb < 1e-9) break;
    heap.pop();
    const Vec w = top.box.width();
    Eigen::Index dim;
    w.maxCoeff(&dim);
    const double mid = 0.5 * (top.box.lower[dim] + top.box.upper[dim]);
    BoxRegion l = top.box, r = top.box;
    l.upper[dim] = mid;
    r.lower[dim] = mid;
    for (auto* b : {&l, &r}) {
      heap.push({lower(*b), *b});
      best_value = std::min(best_value, net.forward_scalar(b->center()));
    }
    used += 2;
  }
  return heap.top().lb;
}

namespace {

StepBound finish(double psi, const Witness& w) {
  StepBound sb;
  if (!std::isfinite(psi)) {
    sb.reason = "lower bound of the certificate is not finite";
    return sb;
  }
  sb.known = true;
  sb.psi = psi;
  const double gap = w.beta - psi;
  sb.steps = gap <= 0 ? 0 : static_cast<long long>(std::ceil(gap / w.epsilon));
  return sb;
}

std::size_t bound_budget(const BnbConfig& cfg) { return std::min<std::size_t>(cfg.max_boxes, 4096); }

}  // namespace

StepBound step_bound(const FrwaCertificate& cert, const BoxRegion& domain, const BnbConfig& cfg) {
  cert.validate();
  // Goal points evaluate to c1, so psi never exceeds min(c1, inf of the raw net).
  const double floor = std::min(cert.c1, cert.c2);
  const double lb = network_lower_bound(*cert.net, domain, bound_budget(cfg), floor);
  return finish(std::min(floor, lb), cert.witness);
}

StepBound step_bound(const RwaCertificate& cert, const BoxRegion& domain, const BnbConfig& cfg) {
  cert.validate();
  return finish(network_lower_bound(*cert.net, domain, bound_budget(cfg)), cert.witness);
}

}  // namespace nlb
