#pragma once

// The nlb subcommands as library functions (main.cpp only parses arguments).

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlb/bundle_io.hpp"
#include "nlb/simulation.hpp"
#include "run_config.hpp"

namespace nlb::cli {

/// Exit codes shared by all commands.
enum Exit : int { Ok = 0, Failure = 1, NotVerified = 2 };

struct VerifyCheck {
  std::string name;
  Verdict verdict;
};

struct VerifyReport {
  std::string bundle;
  std::string mode;
  std::vector<VerifyCheck> checks;
  StepBound step_bound;

  bool all_verified() const;
};

nlohmann::json to_json(const VerifyReport& r);
VerifyReport verify_report_from_json(const nlohmann::json& doc);

/// Runs the applicable checks (1 and 2; 3 for plain bundles; direct safety on request).
VerifyReport verify_bundle(const CertificateBundle& b, const std::string& label, const BnbConfig& cfg,
                           bool direct_safety);

/// Header: t,<state names>,<input names>,stage. The final row has empty inputs.
std::string trajectory_csv(const Trajectory& t, const Plant& plant);
/// Header: trials,docked,unsafe,truncated,safety_pct,docking_pct,mean_docking_steps,max_docking_steps
std::string stats_csv(const BatchStats& s);

int cmd_cegis(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
int cmd_verify(const std::string& bundle_path, const RunConfig& cfg, bool direct_safety,
               const std::string& report_path, std::ostream& log);
int cmd_compose(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);

struct SimulateArgs {
  std::string controller;  ///< network JSON
  std::string bundle;      ///< certificate bundle (uses its controller, plant and task)
  std::string chain;       ///< chain bundle (meta-controller)
  std::optional<std::vector<double>> start;
  std::string trajectory_path;
  std::string stats_path;
};
int cmd_simulate(const SimulateArgs& args, const RunConfig& cfg, std::ostream& log);

void write_text_file(const std::string& text, const std::string& path);

}  // namespace nlb::cli
