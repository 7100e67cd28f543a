#pragma once

// Run configuration for the nlb tool: one JSON document, strict keys.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlb/composition.hpp"
#include "nlb/conditions.hpp"
#include "nlb/training.hpp"

namespace nlb::cli {

struct RunConfig {
  std::string plant = "spacecraft";
  SystemParams system;

  double a = 1.0;
  DockingTaskOptions task;

  bool filtered = true;
  Witness witness;
  double c1 = -10.0;
  double c2 = 1.2;

  TrainConfig train;
  InitOptions init;
  BnbConfig verifier;

  double wall_budget_s = 3600.0;
  int max_iterations = 1000;

  std::vector<double> schedule;
  double compose_budget_s = 0.0;
  std::size_t annulus_samples = 2000;
  int compose_trials = 1;

  int sim_trials = 1000;
  int sim_max_steps = 2000;
  std::uint64_t sim_seed = 0;
  int sim_workers = 1;

  bool direct_safety = false;

  /// Cross-field checks (delegates to the library validators).
  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Unknown keys and wrong types are ParseErrors naming the JSON path.
RunConfig config_from_json(const nlohmann::json& doc);
/// Syntax errors are reported as "<path>:<line>:<column>: ...".
RunConfig load_config(const std::string& path);
/// Parses text the same way load_config does; `origin` names it in messages.
nlohmann::json parse_with_location(const std::string& text, const std::string& origin);

Plant plant_of(const RunConfig& c);
RwaTask task_of(const RunConfig& c);
RwaTask task_of(const RunConfig& c, double a);
CertificateForm form_of(const RunConfig& c);
CegisOptions cegis_options_of(const RunConfig& c);

}  // namespace nlb::cli
