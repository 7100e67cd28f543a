#pragma once

/// @file composition.hpp
/// Chains of filtered certificates whose goals are earlier certificates'
/// sublevel sets, and the meta-controller that runs them.

#include <cstdint>
#include <string>
#include <vector>

#include "nlb/certificate.hpp"
#include "nlb/simulation.hpp"
#include "nlb/training.hpp"

namespace nlb {

struct Stage {
  int index = 0;
  std::shared_ptr<const Mlp> controller;
  FrwaCertificate certificate;
  Region initial;
  Region unsafe;
  Region goal;
  BoxRegion domain;
  bool verified = false;
  double seconds = 0.0;
  int iterations = 0;
};

struct CrwaCertificate {
  std::vector<Stage> stages;

  std::size_t size() const { return stages.size(); }
  const Stage& final_stage() const { return stages.back(); }
  /// The RWA task stage i was trained on.
  RwaTask stage_task(std::size_t i) const;
};

struct MetaState {
  int current_stage = 0;
  Vec state;
};

/// X_G^0 u (not X_U^prev  and  V_prev <= beta_prev).
Region build_stage_goal(const Stage& prev, const Region& base_goal);

struct ChainItem {
  std::string condition;  ///< "i", "ii", "iii" or "iv"
  int stage = 0;
  std::string check;
  bool passed = false;
  std::string detail;
};

struct ChainReport {
  std::vector<ChainItem> items;

  bool passed() const;
  std::vector<ChainItem> failures() const;
  std::string summary() const;
};

struct ChainCheckOptions {
  BnbConfig verifier;
  std::size_t audit_samples = 2000;  ///< sampling audit of sublevel-based containments
  std::uint64_t seed = 0;
};

/// Mechanical check of the chain conditions against the overall task.
/// Containments go through the verifier; goal regions are also compared
/// structurally with build_stage_goal and audited by sampling.
ChainReport validate_chain(const CrwaCertificate& chain, const RwaTask& task,
                           const ChainCheckOptions& options = {});

/// One stage of a schedule: its initial and unsafe sets and a display name.
struct ScheduleEntry {
  std::string name;
  Region initial;
  Region unsafe;
  BoxRegion domain;
};

/// Docking-style schedule: one entry per half-width a_i, using make_task_for.
std::vector<ScheduleEntry> docking_schedule(const Plant& plant, const std::vector<double>& half_widths,
                                            const DockingTaskOptions& options = {});

struct CrwaOptions {
  CegisOptions cegis;              ///< per-stage template; wall_budget_s is per stage
  double total_budget_s = 0.0;     ///< 0 = sum of per-stage budgets only
  std::size_t annulus_samples = 2000;
};

struct CrwaResult {
  CrwaCertificate chain;  ///< verified stages only (a failed stage is not appended)
  std::vector<std::string> stage_names;
  std::vector<double> stage_seconds;
  std::vector<int> stage_iterations;
  bool complete = false;
  int failed_stage = -1;
  std::string failure;
};

/// Trains the schedule stage by stage with the overall goal task.goal as X_G^0.
/// Throws PreconditionError on an empty schedule.
CrwaResult train_crwa(const Plant& plant, const std::vector<ScheduleEntry>& schedule,
                      const RwaTask& task, const CrwaOptions& options);

/// Smallest i with state in X_I^i; throws PreconditionError if there is none.
MetaState meta_start(const CrwaCertificate& chain, const Vec& state);

/// Drops to lower stages while the state is in the current stage goal, then
/// returns the clipped input of that stage's controller.
std::pair<Vec, MetaState> meta_control_step(const CrwaCertificate& chain, const Plant& plant,
                                            const MetaState& ms);

Trajectory simulate_meta(const CrwaCertificate& chain, const Plant& plant, const Vec& s0,
                         const RwaTask& task, int max_steps);

BatchStats simulate_meta_batch(const CrwaCertificate& chain, const Plant& plant, const RwaTask& task,
                               int trials, int max_steps, std::uint64_t seed, int workers = 1);

/// Points of stage_initial outside stage_goal. Falls back to verifier
/// searches when rejection sampling stalls; an empty region gives an empty result.
std::vector<Vec> sample_annulus(const Region& stage_initial, const Region& stage_goal,
                                const BoxRegion& bounds, std::size_t count, const BnbConfig& cfg,
                                std::uint64_t seed, double neighbor_radius = 0.05);

/// Table of per-stage statistics over repeated train_crwa runs with header
/// x_i,n,prior_x_i,cumulative_time_s,min_t,mean_t,max_t,min_i,mean_i,max_i,success_pct
std::string stage_table_csv(const std::vector<CrwaResult>& runs);

}  // namespace nlb
