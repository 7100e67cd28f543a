#pragma once

/// @file simulation.hpp
/// Closed-loop rollouts and batch statistics.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nlb/dynamics.hpp"
#include "nlb/geometry.hpp"

namespace nlb {

class Mlp;

enum class Outcome : std::uint8_t { Docked, Unsafe, Truncated };
std::string to_string(Outcome o);

struct Trajectory {
  std::vector<Vec> states;  ///< states.size() == inputs.size() + 1
  std::vector<Vec> inputs;  ///< clipped inputs actually applied
  std::vector<int> stages;  ///< controller stage per state (meta-control only)
  Outcome outcome = Outcome::Truncated;

  std::size_t steps() const { return inputs.size(); }
};

/// Raw (unclipped) control law.
using ControlLaw = std::function<Vec(const Vec&)>;

ControlLaw network_law(const Mlp& controller);

/// Rolls out until goal entry (Docked), unsafe entry (Unsafe) or max_steps
/// steps (Truncated). Goal is tested before unsafe at every state.
Trajectory simulate(const ControlLaw& law, const Plant& plant, const Vec& s0, const RwaTask& task,
                    int max_steps);
Trajectory simulate(const Mlp& controller, const Plant& plant, const Vec& s0, const RwaTask& task,
                    int max_steps);
Trajectory simulate(const Mlp& controller, const State& s0, const RwaTask& task, int max_steps,
                    const SystemParams& params = {});

struct BatchStats {
  int trials = 0;
  int docked = 0;
  int unsafe = 0;
  int truncated = 0;
  double safety_pct = 0.0;   ///< trials that never entered X_U
  double docking_pct = 0.0;  ///< trials that reached X_G
  double mean_docking_steps = 0.0;
  std::size_t max_docking_steps = 0;
};

/// Trial i starts from a uniform sample of X_I \ X_G drawn with
/// mix_seed(seed, i), so results do not depend on the worker count.
BatchStats simulate_batch(const ControlLaw& law, const Plant& plant, const RwaTask& task,
                          int trials, int max_steps, std::uint64_t seed, int workers = 1);
BatchStats simulate_batch(const Mlp& controller, const Plant& plant, const RwaTask& task,
                          int trials, int max_steps, std::uint64_t seed, int workers = 1);

/// Start state for trial `index` (shared by batch and meta-controller runs).
Vec batch_start_state(const RwaTask& task, std::uint64_t seed, int index);

BatchStats summarize(const std::vector<Trajectory>& runs);

}  // namespace nlb
