#pragma once

/// @file certificate.hpp
/// Plain and filtered reach-while-avoid certificates.

#include <limits>
#include <memory>
#include <string>

#include "nlb/geometry.hpp"
#include "nlb/nn.hpp"

namespace nlb {

struct BnbConfig;

struct Witness {
  double alpha = 1.0 + 1e-5;
  double beta = 1.0;
  double epsilon = 1e-7;

  /// Throws PreconditionError unless alpha > beta and epsilon > 0.
  void validate() const;
};

/// V wrapped with hard-coded values on the goal (c1) and unsafe (c2) sets.
struct FrwaCertificate {
  std::shared_ptr<const Mlp> net;
  Witness witness;
  Region goal;
  Region unsafe;
  double c1 = -10.0;
  double c2 = 1.2;

  /// Throws unless net is scalar and c1 <= beta < alpha <= c2.
  void validate() const;
};

struct RwaCertificate {
  std::shared_ptr<const Mlp> net;
  Witness witness;

  void validate() const;
};

/// c1 on goal, else c2 on unsafe, else the network value.
double evaluate(const FrwaCertificate& cert, const Vec& s);
double evaluate_raw(const FrwaCertificate& cert, const Vec& s);
double evaluate(const RwaCertificate& cert, const Vec& s);

struct StepBound {
  bool known = false;
  long long steps = 0;
  double psi = 0.0;  ///< verified lower bound of the certificate over the domain
  std::string reason;
};

/// ceil((beta - psi) / epsilon) with psi a sound lower bound of the
/// certificate over domain (refined by splitting up to the box budget).
StepBound step_bound(const FrwaCertificate& cert, const BoxRegion& domain, const BnbConfig& cfg);
StepBound step_bound(const RwaCertificate& cert, const BoxRegion& domain, const BnbConfig& cfg);

/// Sound lower bound of a scalar network over a box, refined best-first
/// until it reaches `target`, the sampled minimum, or max_boxes.
double network_lower_bound(const Mlp& net, const BoxRegion& box, std::size_t max_boxes,
                           double target = std::numeric_limits<double>::infinity());

}  // namespace nlb
