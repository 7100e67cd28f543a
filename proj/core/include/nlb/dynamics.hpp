#pragma once

/// @file dynamics.hpp
/// Discrete-time Clohessy-Wiltshire relative motion with clipped thrust, plus
/// the double-integrator surrogate plant used for fast end-to-end runs.

#include <string>
#include <vector>

#include "nlb/types.hpp"

namespace nlb {

struct State {
  double x = 0.0;     ///< radial position [m]
  double y = 0.0;     ///< along-track position [m]
  double xdot = 0.0;  ///< [m/s]
  double ydot = 0.0;  ///< [m/s]

  Vec to_vector() const;
  static State from_vector(const Vec& v);
  bool finite() const;
};

struct ControlInput {
  double fx = 0.0;  ///< [N]
  double fy = 0.0;  ///< [N]

  Vec to_vector() const;
  static ControlInput from_vector(const Vec& v);
};

struct SystemParams {
  double mass = 12.0;            ///< [kg]
  double mean_motion = 0.001027; ///< [rad/s]
  double t_step = 1.0;           ///< [s]
  double thrust_limit = 1.0;     ///< [N], per component

  /// Throws PreconditionError unless every field is strictly positive.
  void validate() const;
};

/// next = A * s + B * u + c, exact for one step with constant (clipped) u.
struct AffineStep {
  Mat a_matrix;
  Mat b_matrix;
  Vec c_vector;

  Vec apply(const Vec& s, const Vec& u) const;
};

ControlInput clip_thrust(const ControlInput& u, const SystemParams& params);
Vec clip_thrust(const Vec& u, double limit);

/// Closed-form solution of the CW equations over one step of length t_step.
State cw_step(const State& s, const ControlInput& u, const SystemParams& params);

AffineStep affine_step(const SystemParams& params);

/// Classical RK4 on the continuous CW ODE with u held constant. Test oracle.
State rk4_reference(const State& s, const ControlInput& u, const SystemParams& params,
                    int substeps);

/// A linear plant with box-clipped inputs, described generically so the
/// certificate pipeline does not care which vehicle it is certifying.
struct Plant {
  std::string name;
  AffineStep step;
  double thrust_limit = 1.0;
  double t_step = 1.0;  ///< [s], for time stamps only
  std::vector<int> position_dims;
  std::vector<int> velocity_dims;
  std::vector<std::string> state_names;
  std::vector<std::string> input_names;

  int state_dim() const { return static_cast<int>(step.a_matrix.rows()); }
  int input_dim() const { return static_cast<int>(step.b_matrix.cols()); }

  /// Clips the raw controller output and applies the affine step.
  Vec next(const Vec& s, const Vec& raw_u) const;
};

Plant spacecraft_plant(const SystemParams& params);

/// 1-D double integrator with state (p, v) and force f: the reduced surrogate
/// of the docking problem (same mass, step and thrust limit).
Plant double_integrator_plant(const SystemParams& params);

/// "spacecraft" or "double_integrator"; throws PreconditionError otherwise.
Plant make_plant(const std::string& name, const SystemParams& params);

}  // namespace nlb
