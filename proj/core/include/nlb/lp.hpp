#pragma once

/// @file lp.hpp
/// Feasibility of small systems A x <= b over a box. Infeasibility is only
/// reported together with a checked Farkas certificate.

#include <optional>

#include "nlb/geometry.hpp"

namespace nlb {

struct LpResult {
  enum class Status : std::uint8_t { Feasible, Infeasible, Undecided };
  Status status = Status::Undecided;
  Vec point;  ///< a (near-)feasible point when status is Feasible
};

/// Each row of `a` with its entry of `b` is one constraint a_k . x <= b_k.
LpResult box_lp_feasibility(const Mat& a, const Vec& b, const BoxRegion& box);

}  // namespace nlb
