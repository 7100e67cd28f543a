#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "nlb/conditions.hpp"
#include "nlb/error.hpp"
#include "nlb/rng.hpp"

namespace nlb::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

void write_text_file(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

// ---------------------------------------------------------------- verify report

bool VerifyReport::all_verified() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.verdict.verified(); });
}

json to_json(const VerifyReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"verdict", to_json(c.verdict)}});
  return {{"format", "nlb-verify-report"},
          {"version", 1},
          {"bundle", r.bundle},
          {"mode", r.mode},
          {"all_verified", r.all_verified()},
          {"checks", checks},
          {"step_bound",
           {{"known", r.step_bound.known},
            {"steps", r.step_bound.steps},
            {"psi", r.step_bound.psi},
            {"reason", r.step_bound.reason}}}};
}

VerifyReport verify_report_from_json(const json& doc) {
  try {
    if (doc.value("format", "") != "nlb-verify-report") throw ParseError("not a verify report");
    VerifyReport r;
    r.bundle = doc.at("bundle").get<std::string>();
    r.mode = doc.at("mode").get<std::string>();
    for (const auto& c : doc.at("checks")) r.checks.push_back({c.at("name").get<std::string>(), verdict_from_json(c.at("verdict"))});
    const auto& sb = doc.at("step_bound");
    r.step_bound.known = sb.at("known").get<bool>();
    r.step_bound.steps = sb.at("steps").get<long long>();
    r.step_bound.psi = sb.at("psi").get<double>();
    r.step_bound.reason = sb.at("reason").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("verify report: ") + e.what());
  }
}

namespace {

std::optional<SpeedLimit> find_speed_limit(const Region& r) {
  const auto& n = r.node();
  if (n.kind == Region::Kind::VelocityUnsafeOverapprox) return n.speed;
  for (const auto& c : n.children) {
    if (auto l = find_speed_limit(c)) return l;
  }
  return std::nullopt;
}

}  // namespace

VerifyReport verify_bundle(const CertificateBundle& b, const std::string& label, const BnbConfig& cfg,
                           bool direct_safety) {
  const Plant plant = make_plant(b.plant, b.params);
  const BnbConfig c = with_plant_widths(cfg, plant);
  VerifyReport r;
  r.bundle = label;
  r.mode = b.filtered ? "frwa" : "rwa";
  if (b.filtered) {
    r.checks.push_back({"condition1", check_condition1(b.certificate, b.task, c)});
    r.checks.push_back({"condition2", check_condition2_filtered(b.certificate, *b.controller, plant, b.task, c)});
    r.step_bound = step_bound(b.certificate, b.task.domain, c);
  } else {
    const RwaCertificate rc = b.plain();
    r.checks.push_back({"condition1", check_condition1(rc, b.task, c)});
    r.checks.push_back({"condition2", check_condition2(rc, *b.controller, plant, b.task, c)});
    r.checks.push_back({"condition3", check_condition3(rc, b.task, c)});
    r.step_bound = step_bound(rc, b.task.domain, c);
  }
  if (direct_safety) {
    const auto lim = find_speed_limit(b.task.unsafe);
    if (!lim) throw PreconditionError("direct safety: the bundle's unsafe set has no speed limit");
    r.checks.push_back({"direct_safety", check_safety_direct(*b.controller, plant, b.task.domain, *lim, c)});
  }
  return r;
}

// ---------------------------------------------------------------- CSV

std::string trajectory_csv(const Trajectory& t, const Plant& plant) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << 't';
  for (const auto& n : plant.state_names) os << ',' << n;
  for (const auto& n : plant.input_names) os << ',' << n;
  os << ",stage\n";
  for (std::size_t k = 0; k < t.states.size(); ++k) {
    os << static_cast<double>(k) * plant.t_step;
    for (Eigen::Index i = 0; i < t.states[k].size(); ++i) os << ',' << t.states[k][i];
    for (int i = 0; i < plant.input_dim(); ++i) {
      os << ',';
      if (k < t.inputs.size()) os << t.inputs[k][i];
    }
    os << ',' << (k < t.stages.size() ? t.stages[k] : 0) << '\n';
  }
  return os.str();
}

std::string stats_csv(const BatchStats& s) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "trials,docked,unsafe,truncated,safety_pct,docking_pct,mean_docking_steps,max_docking_steps\n";
  os << s.trials << ',' << s.docked << ',' << s.unsafe << ',' << s.truncated << ',' << s.safety_pct << ','
     << s.docking_pct << ',' << s.mean_docking_steps << ',' << s.max_docking_steps << '\n';
  return os.str();
}

namespace {

void print_verdicts(const VerifyReport& r, std::ostream& log) {
  for (const auto& c : r.checks) {
    log << "  " << std::left << std::setw(14) << c.name << to_string(c.verdict.kind);
    if (c.verdict.has_counterexample()) log << "  at " << c.verdict.counterexample.transpose();
    if (!c.verdict.reason.empty()) log << "  (" << c.verdict.reason << ")";
    log << "  [" << c.verdict.stats.boxes << " boxes, " << std::setprecision(3) << c.verdict.stats.seconds << " s]\n";
  }
  if (r.step_bound.known) log << "  step bound    " << r.step_bound.steps << " (psi " << r.step_bound.psi << ")\n";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
}

void print_stats(const BatchStats& s, std::ostream& log) {
  log << "trials " << s.trials << "  docked " << s.docked << "  unsafe " << s.unsafe << "  truncated " << s.truncated
      << "  safety " << s.safety_pct << "%  docking " << s.docking_pct << "%  mean steps " << s.mean_docking_steps
      << "  max steps " << s.max_docking_steps << '\n';
}

}  // namespace

// ---------------------------------------------------------------- commands

int cmd_cegis(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  const Plant plant = plant_of(cfg);
  const RwaTask task = task_of(cfg);
  CegisOptions o = cegis_options_of(cfg);
  o.initial_controller = initial_controller(plant, task, cfg.init, mix_seed(cfg.train.seed, 21));
  o.on_iteration = [&](const CegisLogRow& row) {
    log << "iteration " << row.iteration << ": loss " << row.loss << " after " << row.epochs << " epochs ("
        << row.train_status << "), " << row.dataset_size << " points";
    for (const auto& v : row.verdicts) log << ", " << v;
    log << '\n';
  };
  const CegisResult r = cegis(plant, task, o);
  ensure_dir(out_dir);
  const fs::path dir(out_dir);
  const CertificateBundle b = make_bundle(plant, cfg.system, task, *r.certificate.net, r.controller, cfg.witness,
                                          cfg.c1, cfg.c2, cfg.filtered);
  save_bundle(b, (dir / "certificate.json").string());
  save(r.controller, (dir / "controller.json").string());
  write_text_file(cegis_log_csv(r.log), (dir / "cegis_log.csv").string());
  log << to_string(r.status) << " after " << r.iterations << " iterations, " << r.wall_time << " s";
  if (!r.note.empty()) log << " (" << r.note << ")";
  log << "\nwrote " << (dir / "certificate.json").string() << ", " << (dir / "controller.json").string() << ", "
      << (dir / "cegis_log.csv").string() << '\n';
  return r.status == CegisResult::Status::Verified ? Ok : NotVerified;
}

int cmd_verify(const std::string& bundle_path, const RunConfig& cfg, bool direct_safety,
               const std::string& report_path, std::ostream& log) {
  if (!fs::exists(bundle_path)) throw Error("bundle not found: " + bundle_path);
  const CertificateBundle b = load_bundle(bundle_path);
  const VerifyReport r = verify_bundle(b, bundle_path, cfg.verifier, direct_safety || cfg.direct_safety);
  log << bundle_path << " (" << r.mode << ")\n";
  print_verdicts(r, log);
  log << (r.all_verified() ? "all conditions verified\n" : "NOT verified\n");
  if (!report_path.empty()) write_json_file(to_json(r), report_path);
  return r.all_verified() ? Ok : NotVerified;
}

int cmd_compose(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  const Plant plant = plant_of(cfg);
  const std::vector<double> widths = cfg.schedule.empty() ? std::vector<double>{cfg.a} : cfg.schedule;
  const RwaTask task = task_of(cfg, widths.back());
  const auto schedule = docking_schedule(plant, widths, cfg.task);
  ensure_dir(out_dir);
  const fs::path dir(out_dir);

  std::vector<CrwaResult> runs;
  bool all_complete = true;
  for (int trial = 0; trial < cfg.compose_trials; ++trial) {
    CrwaOptions o;
    o.cegis = cegis_options_of(cfg);
    o.cegis.train.seed = mix_seed(cfg.train.seed, static_cast<std::uint64_t>(trial));
    o.cegis.initial_controller =
        initial_controller(plant, make_task_for(plant, widths.front(), cfg.task), cfg.init, mix_seed(o.cegis.train.seed, 21));
    o.total_budget_s = cfg.compose_budget_s;
    o.annulus_samples = cfg.annulus_samples;
    CrwaResult r = train_crwa(plant, schedule, task, o);
    log << "trial " << trial << ": ";
    for (std::size_t i = 0; i < r.stage_seconds.size(); ++i) {
      log << (i ? ", " : "") << r.stage_names[i] << " " << r.stage_seconds[i] << " s/" << r.stage_iterations[i] << " it";
    }
    log << (r.complete ? "  complete\n" : "  FAILED: " + r.failure + "\n");
    all_complete = all_complete && r.complete;
    if (r.complete) {
      ChainBundle cb{cfg.plant, cfg.system, task, r.stage_names, r.chain};
      save_chain(cb, (dir / (cfg.compose_trials > 1 ? "chain_trial" + std::to_string(trial) + ".json" : "chain.json")).string());
    }
    runs.push_back(std::move(r));
  }
  write_text_file(stage_table_csv(runs), (dir / "stages.csv").string());
  log << "wrote " << (dir / "stages.csv").string() << '\n';
  return all_complete ? Ok : NotVerified;
}

int cmd_simulate(const SimulateArgs& args, const RunConfig& cfg, std::ostream& log) {
  const int sources = !args.controller.empty() + !args.bundle.empty() + !args.chain.empty();
  if (sources != 1) throw PreconditionError("simulate: give exactly one of --controller, --bundle, --chain");
  Plant plant = plant_of(cfg);
  RwaTask task = task_of(cfg);
  Mlp controller;
  std::optional<CrwaCertificate> chain;
  if (!args.controller.empty()) {
    controller = load(args.controller);
  } else if (!args.bundle.empty()) {
    const CertificateBundle b = load_bundle(args.bundle);
    plant = make_plant(b.plant, b.params);
    task = b.task;
    controller = *b.controller;
  } else {
    ChainBundle cb = load_chain(args.chain);
    plant = make_plant(cb.plant, cb.params);
    task = cb.task;
    chain = std::move(cb.chain);
  }

  Vec s0;
  if (args.start) {
    s0 = Vec::Map(args.start->data(), static_cast<Eigen::Index>(args.start->size()));
    if (s0.size() != plant.state_dim()) throw ShapeError("simulate: --start has the wrong number of coordinates");
  } else {
    s0 = batch_start_state(task, cfg.sim_seed, 0);
  }
  const Trajectory t = chain ? simulate_meta(*chain, plant, s0, task, cfg.sim_max_steps)
                             : simulate(controller, plant, s0, task, cfg.sim_max_steps);
  log << "trajectory from " << s0.transpose() << ": " << to_string(t.outcome) << " after " << t.steps() << " steps\n";
  if (!args.trajectory_path.empty()) write_text_file(trajectory_csv(t, plant), args.trajectory_path);

  const BatchStats s = chain ? simulate_meta_batch(*chain, plant, task, cfg.sim_trials, cfg.sim_max_steps, cfg.sim_seed, cfg.sim_workers)
                             : simulate_batch(controller, plant, task, cfg.sim_trials, cfg.sim_max_steps, cfg.sim_seed, cfg.sim_workers);
  print_stats(s, log);
  if (!args.stats_path.empty()) write_text_file(stats_csv(s), args.stats_path);
  return Ok;
}

}  // namespace nlb::cli
