#pragma once

/// @file region_compile.hpp
/// Lowering of Region trees and norm approximations into verifier queries.

#include "nlb/geometry.hpp"
#include "nlb/verifier.hpp"

namespace nlb {

/// Graph node computing under_norm of a 2-row node (abs then max over the
/// support directions). For a 1-row node this is just abs.
int under_norm_node(ExprGraph& g, int pair, int n_directions);
int over_norm_node(ExprGraph& g, int pair, int n_directions);

/// Node computing SpeedLimit::violation_margin of the state held in `state`.
int speed_margin_node(Query& q, const SpeedLimit& limit, int state);

/// Formula that holds exactly when the value of `state` lies in r.
/// CertSublevel nodes compare the raw network against the threshold.
Formula in_region(Query& q, const Region& r, int state);

}  // namespace nlb
