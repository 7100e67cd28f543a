#include "nlb/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "nlb/error.hpp"

namespace nlb {

namespace {

// theta - sin(theta) without cancellation for small theta.
double theta_minus_sin(double theta) {
  if (std::abs(theta) < 1e-2) {
    const double t2 = theta * theta;
    return theta * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0)));
  }
  return theta - std::sin(theta);
}

// 1 - cos(theta), cancellation-free.
double one_minus_cos(double theta) {
  const double h = std::sin(0.5 * theta);
  return 2.0 * h * h;
}

struct CwCoefficients {
  double s, c, omc, tms, n, t;
};

CwCoefficients coefficients(const SystemParams& p) {
  const double theta = p.mean_motion * p.t_step;
  return {std::sin(theta), std::cos(theta), one_minus_cos(theta), theta_minus_sin(theta),
          p.mean_motion, p.t_step};
}

}  // namespace

Vec State::to_vector() const {
  Vec v(4);
  v << x, y, xdot, ydot;
  return v;
}

State State::from_vector(const Vec& v) {
  if (v.size() != 4) throw ShapeError("State::from_vector: expected 4 components");
  return {v[0], v[1], v[2], v[3]};
}

bool State::finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(xdot) && std::isfinite(ydot);
}

Vec ControlInput::to_vector() const {
  Vec v(2);
  v << fx, fy;
  return v;
}

ControlInput ControlInput::from_vector(const Vec& v) {
  if (v.size() != 2) throw ShapeError("ControlInput::from_vector: expected 2 components");
  return {v[0], v[1]};
}

void SystemParams::validate() const {
  if (!(mass > 0) || !(mean_motion > 0) || !(t_step > 0) || !(thrust_limit > 0)) {
    throw PreconditionError("SystemParams: mass, mean_motion, t_step and thrust_limit must be > 0");
  }
}

Vec AffineStep::apply(const Vec& s, const Vec& u) const {
  return a_matrix * s + b_matrix * u + c_vector;
}

ControlInput clip_thrust(const ControlInput& u, const SystemParams& params) {
  const double l = params.thrust_limit;
  return {std::clamp(u.fx, -l, l), std::clamp(u.fy, -l, l)};
}

Vec clip_thrust(const Vec& u, double limit) {
  return u.cwiseMax(-limit).cwiseMin(limit);
}

State cw_step(const State& s0, const ControlInput& u, const SystemParams& params) {
  const auto k = coefficients(params);
  const double n = k.n;
  const double ax = u.fx / params.mass;
  const double ay = u.fy / params.mass;
  const double n2 = n * n;

  State r;
  r.x = (4.0 - 3.0 * k.c) * s0.x + (k.s / n) * s0.xdot + (2.0 / n) * k.omc * s0.ydot +
        ax / n2 * k.omc + 2.0 * ay / n2 * k.tms;
  r.y = 6.0 * (k.s - n * k.t) * s0.x + s0.y - (2.0 / n) * k.omc * s0.xdot +
        ((4.0 * k.s - 3.0 * n * k.t) / n) * s0.ydot - 2.0 * ax / n2 * k.tms +
        ay * (4.0 * k.omc / n2 - 1.5 * k.t * k.t);
  r.xdot = 3.0 * n * k.s * s0.x + k.c * s0.xdot + 2.0 * k.s * s0.ydot + ax / n * k.s +
           2.0 * ay / n * k.omc;
  r.ydot = -6.0 * n * k.omc * s0.x - 2.0 * k.s * s0.xdot + (4.0 * k.c - 3.0) * s0.ydot -
           2.0 * ax / n * k.omc + ay * (4.0 * k.s / n - 3.0 * k.t);
  return r;
}

AffineStep affine_step(const SystemParams& params) {
  const auto k = coefficients(params);
  const double n = k.n;
  const double n2 = n * n;
  const double m = params.mass;

  AffineStep step;
  step.a_matrix.resize(4, 4);
  step.a_matrix << 4.0 - 3.0 * k.c, 0.0, k.s / n, 2.0 / n * k.omc,
      6.0 * (k.s - n * k.t), 1.0, -2.0 / n * k.omc, (4.0 * k.s - 3.0 * n * k.t) / n,
      3.0 * n * k.s, 0.0, k.c, 2.0 * k.s,
      -6.0 * n * k.omc, 0.0, -2.0 * k.s, 4.0 * k.c - 3.0;
  step.b_matrix.resize(4, 2);
  step.b_matrix << k.omc / (m * n2), 2.0 * k.tms / (m * n2),
      -2.0 * k.tms / (m * n2), (4.0 * k.omc / n2 - 1.5 * k.t * k.t) / m,
      k.s / (m * n), 2.0 * k.omc / (m * n),
      -2.0 * k.omc / (m * n), (4.0 * k.s / n - 3.0 * k.t) / m;
  step.c_vector = Vec::Zero(4);
  return step;
}

State rk4_reference(const State& s, const ControlInput& u, const SystemParams& params,
                    int substeps) {
  if (substeps < 1) throw PreconditionError("rk4_reference: substeps must be >= 1");
  const double n = params.mean_motion;
  const double ax = u.fx / params.mass;
  const double ay = u.fy / params.mass;
  auto deriv = [&](const Eigen::Vector4d& z) {
    Eigen::Vector4d d;
    d << z[2], z[3], 2.0 * n * z[3] + 3.0 * n * n * z[0] + ax, -2.0 * n * z[2] + ay;
    return d;
  };
  Eigen::Vector4d z(s.x, s.y, s.xdot, s.ydot);
  const double h = params.t_step / substeps;
  for (int i = 0; i < substeps; ++i) {
    const Eigen::Vector4d k1 = deriv(z);
    const Eigen::Vector4d k2 = deriv(z + 0.5 * h * k1);
    const Eigen::Vector4d k3 = deriv(z + 0.5 * h * k2);
    const Eigen::Vector4d k4 = deriv(z + h * k3);
    z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return {z[0], z[1], z[2], z[3]};
}

Vec Plant::next(const Vec& s, const Vec& raw_u) const {
  return step.apply(s, clip_thrust(raw_u, thrust_limit));
}

Plant spacecraft_plant(const SystemParams& params) {
  params.validate();
  Plant p;
  p.name = "spacecraft";
  p.step = affine_step(params);
  p.thrust_limit = params.thrust_limit;
  p.t_step = params.t_step;
  p.position_dims = {0, 1};
  p.velocity_dims = {2, 3};
  p.state_names = {"x", "y", "xdot", "ydot"};
  p.input_names = {"fx", "fy"};
  return p;
}

Plant double_integrator_plant(const SystemParams& params) {
  params.validate();
  const double t = params.t_step;
  const double m = params.mass;
  Plant p;
  p.name = "double_integrator";
  p.step.a_matrix.resize(2, 2);
  p.step.a_matrix << 1.0, t, 0.0, 1.0;
  p.step.b_matrix.resize(2, 1);
  p.step.b_matrix << 0.5 * t * t / m, t / m;
  p.step.c_vector = Vec::Zero(2);
  p.thrust_limit = params.thrust_limit;
  p.t_step = params.t_step;
  p.position_dims = {0};
  p.velocity_dims = {1};
  p.state_names = {"p", "v"};
  p.input_names = {"f"};
  return p;
}

Plant make_plant(const std::string& name, const SystemParams& params) {
  if (name == "spacecraft") return spacecraft_plant(params);
  if (name == "double_integrator") return double_integrator_plant(params);
  throw PreconditionError("unknown plant '" + name + "' (expected spacecraft or double_integrator)");
}

}  // namespace nlb
