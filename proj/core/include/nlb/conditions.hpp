#pragma once

/// @file conditions.hpp
/// The certificate conditions as verifier queries, with independent
/// concrete violation predicates used for re-checking counterexamples.

#include "nlb/certificate.hpp"
#include "nlb/dynamics.hpp"
#include "nlb/verifier.hpp"

namespace nlb {

/// 1e-4 on position dims, 1e-5 on velocity dims (unless cfg already sets widths).
BnbConfig with_plant_widths(BnbConfig cfg, const Plant& plant);

/// x in X_I with the (filtered) certificate above beta.
bool violates_condition1(const FrwaCertificate& cert, const RwaTask& task, const Vec& x);
bool violates_condition1(const RwaCertificate& cert, const RwaTask& task, const Vec& x);
/// x in X \ (X_U u X_G), V(x) <= beta, and neither decrease nor goal entry,
/// or x' lands in X_U.
bool violates_condition2_filtered(const FrwaCertificate& cert, const Mlp& controller,
                                  const Plant& plant, const RwaTask& task, const Vec& x);
/// x in X \ X_G, V(x) <= beta, and V fails to decrease by epsilon or x' leaves X.
bool violates_condition2(const RwaCertificate& cert, const Mlp& controller, const Plant& plant,
                         const RwaTask& task, const Vec& x);
bool violates_condition3(const RwaCertificate& cert, const RwaTask& task, const Vec& x);
bool violates_safety_direct(const Mlp& controller, const Plant& plant, const SpeedLimit& limit,
                            const Vec& x);

Query condition1_query(const FrwaCertificate& cert, const RwaTask& task);
Query condition1_query(const RwaCertificate& cert, const RwaTask& task);
Query condition2_filtered_query(const FrwaCertificate& cert, const Mlp& controller,
                                const Plant& plant, const RwaTask& task);
Query condition2_query(const RwaCertificate& cert, const Mlp& controller, const Plant& plant,
                       const RwaTask& task);
Query condition3_query(const RwaCertificate& cert, const RwaTask& task);

Verdict check_condition1(const FrwaCertificate& cert, const RwaTask& task, const BnbConfig& cfg);
Verdict check_condition1(const RwaCertificate& cert, const RwaTask& task, const BnbConfig& cfg);
Verdict check_condition2_filtered(const FrwaCertificate& cert, const Mlp& controller,
                                  const Plant& plant, const RwaTask& task, const BnbConfig& cfg);
Verdict check_condition2_filtered(const FrwaCertificate& cert, const Mlp& controller,
                                  const SystemParams& params, const RwaTask& task,
                                  const BnbConfig& cfg);
Verdict check_condition2(const RwaCertificate& cert, const Mlp& controller, const Plant& plant,
                         const RwaTask& task, const BnbConfig& cfg);
Verdict check_condition3(const RwaCertificate& cert, const RwaTask& task, const BnbConfig& cfg);

/// One-step inductive form of the speed limit: a state within the (relaxed)
/// limit never steps to a state in its over-approximated violation set.
Verdict check_safety_direct(const Mlp& controller, const Plant& plant, const BoxRegion& domain,
                            const SpeedLimit& limit, const BnbConfig& cfg);
Verdict check_safety_direct(const Mlp& controller, const SystemParams& params,
                            const BoxRegion& domain, int n_directions, const BnbConfig& cfg);

/// inner is contained in outer over universe.
Verdict check_containment(const Region& inner, const Region& outer, const BoxRegion& universe,
                          const BnbConfig& cfg);

/// Searches for points of r in universe; they come back as counterexamples
/// of "x not in r". Verified means r has no points there.
Verdict find_members(const Region& r, const BoxRegion& universe, const BnbConfig& cfg);

}  // namespace nlb
