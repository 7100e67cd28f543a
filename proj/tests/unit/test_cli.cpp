#include <doctest.h>

#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "nlb/error.hpp"
#include "oracles.hpp"
#include "run_config.hpp"

using namespace nlb;
using namespace nlb::cli;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells(1);
    bool quoted = false;
    for (char ch : line) {
      if (ch == '"') {
        quoted = !quoted;
      } else if (ch == ',' && !quoted) {
        cells.emplace_back();
      } else {
        cells.back() += ch;
      }
    }
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("defaults round trip through JSON") {
  const RunConfig d;
  const RunConfig back = config_from_json(to_json(d));
  CHECK(to_json(back) == to_json(d));
  CHECK(d.plant == "spacecraft");
  CHECK(d.filtered);
  CHECK(d.c1 == -10.0);
  CHECK(d.c2 == 1.2);
  CHECK(d.wall_budget_s == 3600.0);
  CHECK(d.sim_trials == 1000);
  CHECK(d.sim_max_steps == 2000);
  CHECK(config_from_json(nlohmann::json::object()).a == 1.0);
}

TEST_CASE("syntax errors carry line and column") {
  const std::string text = "{\n  \"plant\": \"spacecraft\",\n  \"task\": {\"a\": 2,,}\n}";
  const std::string msg = error_of([&] { parse_with_location(text, "run.json"); });
  CHECK(msg.starts_with("run.json:3:"));
  const std::string path = oracle::tmp_path("broken_config.json");
  {
    std::ofstream(path) << text;
  }
  CHECK(error_of([&] { load_config(path); }).starts_with(path + ":3:"));
  CHECK_THROWS_AS(load_config(oracle::tmp_path("no_such_config.json")), Error);
}

TEST_CASE("unknown keys and wrong types name the JSON path") {
  CHECK(error_of([] { config_from_json({{"task", {{"half_width", 2}}}}); }).find("config.task.half_width") !=
        std::string::npos);
  CHECK(error_of([] { config_from_json({{"colour", 1}}); }).find("config.colour: unknown key") != std::string::npos);
  CHECK(error_of([] { config_from_json({{"train", {{"epochs", "many"}}}}); }).find("config.train.epochs") !=
        std::string::npos);
  CHECK(error_of([] { config_from_json({{"certificate", {{"mode", "crwa"}}}}); }).find("config.certificate.mode") !=
        std::string::npos);
  CHECK_THROWS_AS(config_from_json({{"task", {{"a", 0.5}}}}), PreconditionError);
  CHECK_THROWS_AS(config_from_json({{"compose", {{"schedule", {2.0, 1.5}}}}}), PreconditionError);
}

TEST_CASE("config selects plant, task and form") {
  const RunConfig c = config_from_json({{"plant", "double_integrator"},
                                        {"task", {{"a", 2.0}}},
                                        {"certificate", {{"mode", "rwa"}, {"beta", 0.0}}}});
  CHECK(plant_of(c).state_dim() == 2);
  CHECK(task_of(c).initial.contains(Vec::Constant(2, 0.0)));
  Vec p(2);
  p << 1.9, 0.0;
  CHECK(task_of(c).initial.contains(p));
  CHECK_FALSE(task_of(c, 1.0).initial.contains(p));
  CHECK_FALSE(form_of(c).filtered);
  CHECK(form_of(c).witness.beta == 0.0);
  CHECK(cegis_options_of(c).max_iterations == c.max_iterations);
}

TEST_CASE("trajectory CSV replays exactly") {
  const Plant plant = spacecraft_plant(SystemParams{});
  const RwaTask task = make_docking_task(1.0);
  const Mlp ctrl = oracle::random_net({4, 8, 2}, 77, 0.05);
  Vec s0(4);
  s0 << 0.8, -0.6, 0.0, 0.0;
  const Trajectory t = simulate(ctrl, plant, s0, task, 50);
  const auto rows = parse_csv(trajectory_csv(t, plant));
  REQUIRE(rows.size() == t.states.size() + 1);
  CHECK(rows[0] == std::vector<std::string>{"t", "x", "y", "xdot", "ydot", "fx", "fy", "stage"});
  CHECK(rows.back()[5].empty());
  for (std::size_t k = 1; k + 1 < rows.size(); ++k) {
    Vec s(4), u(2), n(4);
    for (int i = 0; i < 4; ++i) s[i] = std::stod(rows[k][1 + i]);
    for (int i = 0; i < 2; ++i) u[i] = std::stod(rows[k][5 + i]);
    for (int i = 0; i < 4; ++i) n[i] = std::stod(rows[k + 1][1 + i]);
    CHECK((plant.next(s, u) - n).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::stod(rows[k][0]) == doctest::Approx((k - 1) * plant.t_step));
  }
}

TEST_CASE("stats CSV") {
  const Plant plant = spacecraft_plant(SystemParams{});
  const RwaTask task = make_docking_task(1.0);
  const BatchStats s = simulate_batch([&](const Vec& x) { return baseline_law(plant, x); }, plant, task, 20, 2000, 3);
  const auto rows = parse_csv(stats_csv(s));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].size() == 8);
  CHECK(rows[0][0] == "trials");
  CHECK(rows[0][7] == "max_docking_steps");
  CHECK(rows[1][0] == "20");
  CHECK(std::stoi(rows[1][1]) + std::stoi(rows[1][2]) + std::stoi(rows[1][3]) == 20);
}

TEST_CASE("verify reports: round trip and no false verification") {
  const SystemParams params;
  const Plant plant = double_integrator_plant(params);
  const RwaTask task = make_surrogate_task(1.0);
  const CertificateBundle b = make_bundle(plant, params, task, oracle::random_net({2, 10, 1}, 5),
                                          oracle::random_net({2, 10, 1}, 6), Witness{}, -10.0, 1.2, true);
  BnbConfig cfg = with_plant_widths(BnbConfig{}, plant);
  const VerifyReport r = verify_bundle(b, "random.json", cfg, true);
  CHECK_FALSE(r.all_verified());
  CHECK(r.checks.size() == 3);
  const VerifyReport back = verify_report_from_json(to_json(r));
  CHECK(to_json(back) == to_json(r));
  CHECK(back.all_verified() == r.all_verified());

  // A bundle with a corrupted weight is never reported as verified.
  const std::string path = oracle::tmp_path("cli_bundle.json");
  const CertificateBundle saved = make_bundle(plant, params, task, oracle::constant_net(2, -1.0),
                                           Mlp::zeros({2, 4, 1}), Witness{}, -10.0, 1.2, true);
  save_bundle(saved, path);
  nlohmann::json doc = read_json_file(path);
  doc["certificate"]["layers"][1]["biases"][0] = 1e3;
  write_json_file(doc, path);
  std::ostringstream log;
  const RunConfig rc = config_from_json({{"plant", "double_integrator"}});
  CHECK(cmd_verify(path, rc, false, oracle::tmp_path("cli_report.json"), log) == NotVerified);
  CHECK_FALSE(verify_report_from_json(read_json_file(oracle::tmp_path("cli_report.json"))).all_verified());
}

TEST_CASE("compose with a one-stage schedule writes a chain and table") {
  const std::string dir = oracle::tmp_path("compose_one");
  std::filesystem::remove_all(dir);
  const RunConfig c = config_from_json({{"plant", "double_integrator"},
                                        {"task", {{"a", 1.0}}},
                                        {"train", {{"base_samples", 3000}, {"base_initial_samples", 300}, {"optimizer", "adam"}}},
                                        {"cegis", {{"wall_budget_s", 600}}},
                                        {"compose", {{"schedule", {1.0}}}}});
  std::ostringstream log;
  CHECK(cmd_compose(c, dir, log) == Ok);
  CHECK(std::filesystem::exists(dir + "/chain.json"));
  const auto rows = parse_csv([&] {
    std::ifstream in(dir + "/stages.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }());
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][2] == "N/A");
  CHECK(rows[1].back() == "100");
  const ChainBundle cb = load_chain(dir + "/chain.json");
  CHECK(cb.chain.size() == 1);
}
