#include "nlb/simulation.hpp"

#include <atomic>
#include <thread>

#include "nlb/error.hpp"
#include "nlb/nn.hpp"
#include "nlb/rng.hpp"

namespace nlb {

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Docked: return "docked";
    case Outcome::Unsafe: return "unsafe";
    case Outcome::Truncated: return "truncated";
  }
  return "truncated";
}

ControlLaw network_law(const Mlp& controller) {
  auto net = std::make_shared<const Mlp>(controller);
  return [net](const Vec& s) { return net->forward(s); };
}

Trajectory simulate(const ControlLaw& law, const Plant& plant, const Vec& s0, const RwaTask& task,
                    int max_steps) {
  if (max_steps < 1) throw PreconditionError("simulate: max_steps must be >= 1");
  if (s0.size() != plant.state_dim()) throw ShapeError("simulate: start state has the wrong size");
  Trajectory t;
  t.states.push_back(s0);
  for (int k = 0;; ++k) {
    const Vec& s = t.states.back();
    if (task.goal.contains(s)) {
      t.outcome = Outcome::Docked;
      break;
    }
    if (task.unsafe.contains(s)) {
      t.outcome = Outcome::Unsafe;
      break;
    }
    if (k == max_steps) {
      t.outcome = Outcome::Truncated;
      break;
    }
    const Vec u = clip_thrust(law(s), plant.thrust_limit);
    t.inputs.push_back(u);
    t.states.push_back(plant.step.apply(s, u));
  }
  return t;
}

Trajectory simulate(const Mlp& controller, const Plant& plant, const Vec& s0, const RwaTask& task,
                    int max_steps) {
  return simulate([&](const Vec& s) { return controller.forward(s); }, plant, s0, task, max_steps);
}

Trajectory simulate(const Mlp& controller, const State& s0, const RwaTask& task, int max_steps,
                    const SystemParams& params) {
  return simulate(controller, spacecraft_plant(params), s0.to_vector(), task, max_steps);
}

Vec batch_start_state(const RwaTask& task, std::uint64_t seed, int index) {
  const Region start = Region::intersection_of({task.initial, Region::complement(task.goal)})
                           .with_label("X_I \\ X_G");
  return sample_region(start, task.domain, 1, mix_seed(seed, static_cast<std::uint64_t>(index)))[0];
}

BatchStats summarize(const std::vector<Trajectory>& runs) {
  BatchStats st;
  st.trials = static_cast<int>(runs.size());
  double steps = 0.0;
  for (const auto& r : runs) {
    switch (r.outcome) {
      case Outcome::Docked:
        ++st.docked;
        steps += static_cast<double>(r.steps());
        st.max_docking_steps = std::max(st.max_docking_steps, r.steps());
        break;
      case Outcome::Unsafe: ++st.unsafe; break;
      case Outcome::Truncated: ++st.truncated; break;
    }
  }
  if (st.trials > 0) {
    st.safety_pct = 100.0 * (st.trials - st.unsafe) / st.trials;
    st.docking_pct = 100.0 * st.docked / st.trials;
  }
  if (st.docked > 0) st.mean_docking_steps = steps / st.docked;
  return st;
}

BatchStats simulate_batch(const ControlLaw& law, const Plant& plant, const RwaTask& task,
                          int trials, int max_steps, std::uint64_t seed, int workers) {
  if (trials < 1) throw PreconditionError("simulate_batch: trials must be >= 1");
  std::vector<Trajectory> runs(static_cast<std::size_t>(trials));
  auto run = [&](int i) {
    runs[i] = simulate(law, plant, batch_start_state(task, seed, i), task, max_steps);
    // Keep memory flat for large batches; only the outcome and length matter.
    runs[i].states.resize(1);
  };
  if (workers <= 1) {
    for (int i = 0; i < trials; ++i) run(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next++; i < trials; i = next++) run(i);
      });
    }
  }
  return summarize(runs);
}

BatchStats simulate_batch(const Mlp& controller, const Plant& plant, const RwaTask& task,
                          int trials, int max_steps, std::uint64_t seed, int workers) {
  return simulate_batch(network_law(controller), plant, task, trials, max_steps, seed, workers);
}

}  // namespace nlb
