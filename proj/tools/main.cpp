#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "nlb/error.hpp"

namespace {

nlb::cli::RunConfig config_or_defaults(const std::string& path) {
  return path.empty() ? nlb::cli::RunConfig{} : nlb::cli::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace nlb::cli;
  CLI::App app{"nlb: train and verify neural reach-while-avoid certificates for spacecraft docking"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "Print the default configuration as JSON and exit");

  std::string config_path, out_dir = ".";
  bool dry_run = false;

  auto* cegis = app.add_subcommand("cegis", "Train a controller and certificate with the CEGIS loop");
  cegis->alias("train");
  cegis->add_option("-c,--config", config_path, "Run configuration (JSON)");
  cegis->add_option("-o,--out", out_dir, "Output directory for certificate.json, controller.json, cegis_log.csv");
  cegis->add_flag("--dry-run", dry_run, "Validate the configuration and stop");

  std::string bundle_path, report_path;
  bool direct_safety = false;
  auto* verify = app.add_subcommand("verify", "Check a certificate bundle");
  verify->add_option("-b,--bundle", bundle_path, "Certificate bundle (JSON)")->required();
  verify->add_option("-c,--config", config_path, "Run configuration (verifier settings)");
  verify->add_flag("--direct-safety", direct_safety, "Also run the one-step speed-limit check");
  verify->add_option("--report", report_path, "Write the verdict report as JSON");
  verify->add_flag("--dry-run", dry_run, "Validate the configuration and stop");

  auto* compose = app.add_subcommand("compose", "Train a compositional chain from compose.schedule");
  compose->add_option("-c,--config", config_path, "Run configuration (JSON)");
  compose->add_option("-o,--out", out_dir, "Output directory for chain bundles and stages.csv");
  compose->add_flag("--dry-run", dry_run, "Validate the configuration and stop");

  SimulateArgs sim;
  std::vector<double> start;
  auto* simulate = app.add_subcommand("simulate", "Roll out a controller, certificate bundle or chain");
  simulate->add_option("-c,--config", config_path, "Run configuration (JSON)");
  auto* src = simulate->add_option_group("source");
  src->add_option("--controller", sim.controller, "Controller network (JSON)");
  src->add_option("--bundle", sim.bundle, "Certificate bundle (JSON)");
  src->add_option("--chain", sim.chain, "Chain bundle (JSON)");
  src->require_option(1);
  simulate->add_option("--start", start, "Start state for the single trajectory")->delimiter(',');
  simulate->add_option("--trajectory", sim.trajectory_path, "Write the single trajectory as CSV");
  simulate->add_option("--stats", sim.stats_path, "Write batch statistics as CSV");
  simulate->add_flag("--dry-run", dry_run, "Validate the configuration and stop");

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_defaults) {
      std::cout << to_json(RunConfig{}).dump(2) << '\n';
      return Ok;
    }
    if (app.get_subcommands().empty()) {
      std::cout << app.help();
      return Failure;
    }
    const RunConfig cfg = config_or_defaults(config_path);
    if (dry_run) {
      std::cout << "configuration ok\n";
      return Ok;
    }
    if (cegis->parsed()) return cmd_cegis(cfg, out_dir, std::cout);
    if (verify->parsed()) return cmd_verify(bundle_path, cfg, direct_safety, report_path, std::cout);
    if (compose->parsed()) return cmd_compose(cfg, out_dir, std::cout);
    if (simulate->parsed()) {
      if (!start.empty()) sim.start = start;
      return cmd_simulate(sim, cfg, std::cout);
    }
  } catch (const nlb::Error& e) {
    std::cerr << "nlb: error: " << e.what() << '\n';
    return Failure;
  } catch (const std::exception& e) {
    std::cerr << "nlb: unexpected error: " << e.what() << '\n';
    return Failure;
  }
  return Failure;
}
