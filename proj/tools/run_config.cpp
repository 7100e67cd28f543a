#include "run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "nlb/error.hpp"
#include "nlb/region_io.hpp"

namespace nlb::cli {

using json = nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ParseError(where() + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      out = doc_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ParseError(where(key) + ": wrong type (" + std::string(doc_.at(key).type_name()) + ")");
    }
  }

  void number(const char* key, double& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      out = number_from_json(doc_.at(key));
    } catch (const ParseError& e) {
      throw ParseError(where(key) + ": " + e.what());
    }
  }

  bool has(const char* key) const { return doc_.contains(key); }

  Section child(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(doc_.contains(key) ? doc_.at(key) : empty, path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : doc_.items()) {
      if (!seen_.count(k)) throw ParseError(where(k.c_str()) + ": unknown key");
    }
  }

  std::string where(const char* key = nullptr) const {
    std::string p = path_.empty() ? "config" : "config." + path_;
    return key ? p + "." + key : p;
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

json number(double v) { return number_to_json(v); }

std::string relaxation_name(Relaxation r) { return r == Relaxation::Interval ? "interval" : "linear"; }

Relaxation relaxation_from(const std::string& s) {
  if (s == "interval") return Relaxation::Interval;
  if (s == "linear") return Relaxation::Linear;
  throw ParseError("config.verifier.relaxation: expected interval or linear, got '" + s + "'");
}

}  // namespace

void RunConfig::validate() const {
  system.validate();
  witness.validate();
  train.validate();
  verifier.validate();
  if (!(c1 <= witness.beta) || !(witness.alpha <= c2)) {
    throw PreconditionError("config: need c1 <= beta < alpha <= c2");
  }
  if (!(a >= 1.0)) throw PreconditionError("config.task.a must be >= 1");
  check_directions(task.n_directions);
  if (wall_budget_s <= 0) throw PreconditionError("config.cegis.wall_budget_s must be > 0");
  if (max_iterations < 1) throw PreconditionError("config.cegis.max_iterations must be >= 1");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] >= 1.0)) throw PreconditionError("config.compose.schedule: half-widths must be >= 1");
    if (i > 0 && !(schedule[i] > schedule[i - 1])) {
      throw PreconditionError("config.compose.schedule must be strictly increasing");
    }
  }
  if (compose_trials < 1) throw PreconditionError("config.compose.trials must be >= 1");
  if (sim_trials < 1 || sim_max_steps < 1) throw PreconditionError("config.simulate: trials and max_steps must be >= 1");
  if (init.mode == InitMode::Import && init.import_path.empty()) {
    throw PreconditionError("config.init.import_path is required for mode import");
  }
  make_plant(plant, system);
}

json to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  const BnbConfig& v = c.verifier;
  json widths = json::array();
  for (Eigen::Index i = 0; i < v.min_box_width.size(); ++i) widths.push_back(v.min_box_width[i]);
  return {
      {"plant", c.plant},
      {"system",
       {{"mass", c.system.mass},
        {"mean_motion", c.system.mean_motion},
        {"t_step", c.system.t_step},
        {"thrust_limit", c.system.thrust_limit}}},
      {"task",
       {{"a", c.a},
        {"goal_half_width", c.task.goal_half_width},
        {"n_directions", c.task.n_directions},
        {"v_tol", c.task.v_tol},
        {"v_max", c.task.v_max},
        {"base_speed", c.task.base_speed}}},
      {"certificate",
       {{"mode", c.filtered ? "frwa" : "rwa"},
        {"alpha", c.witness.alpha},
        {"beta", c.witness.beta},
        {"epsilon", c.witness.epsilon},
        {"c1", c.c1},
        {"c2", c.c2}}},
      {"train",
       {{"c_s", t.c_s},
        {"c_d", t.c_d},
        {"c_u", t.c_u},
        {"delta_reading", to_string(t.delta_reading)},
        {"delta1", t.delta1},
        {"delta2", t.delta2},
        {"lr_initial", t.lr_initial},
        {"lr_finetune", t.lr_finetune},
        {"epochs_max", t.epochs_max},
        {"batch_size", t.batch_size},
        {"zero_loss_tol", number(t.zero_loss_tol)},
        {"neighbor_count", t.neighbor_count},
        {"neighbor_radius", t.neighbor_radius},
        {"seed", t.seed},
        {"optimizer", to_string(t.optimizer)},
        {"momentum", t.momentum},
        {"joint", t.joint},
        {"base_samples", t.base_samples},
        {"base_initial_samples", t.base_initial_samples},
        {"base_unsafe_samples", t.base_unsafe_samples},
        {"controller_hidden", t.controller_hidden},
        {"certificate_hidden", t.certificate_hidden},
        {"counterexamples_per_check", t.counterexamples_per_check}}},
      {"init",
       {{"mode", to_string(c.init.mode)},
        {"import_path", c.init.import_path},
        {"kp", c.init.gains.kp},
        {"kd", c.init.gains.kd},
        {"samples", c.init.samples},
        {"epochs", c.init.epochs}}},
      {"verifier",
       {{"max_boxes", v.max_boxes},
        {"min_box_width", widths},
        {"relaxation", relaxation_name(v.relaxation)},
        {"soundness_margin", v.soundness_margin},
        {"parallel_workers", v.parallel_workers},
        {"probe_samples", v.probe_samples},
        {"max_counterexamples", v.max_counterexamples},
        {"case_split_limit", v.case_split_limit},
        {"seed", v.seed},
        {"time_budget_s", v.time_budget_s}}},
      {"cegis", {{"wall_budget_s", c.wall_budget_s}, {"max_iterations", c.max_iterations}}},
      {"compose",
       {{"schedule", c.schedule},
        {"total_budget_s", c.compose_budget_s},
        {"annulus_samples", c.annulus_samples},
        {"trials", c.compose_trials}}},
      {"simulate",
       {{"trials", c.sim_trials}, {"max_steps", c.sim_max_steps}, {"seed", c.sim_seed}, {"workers", c.sim_workers}}},
      {"verify", {{"direct_safety", c.direct_safety}}},
  };
}

RunConfig config_from_json(const json& doc) {
  RunConfig c;
  Section root(doc, "");
  root.get("plant", c.plant);
  {
    auto s = root.child("system");
    s.get("mass", c.system.mass);
    s.get("mean_motion", c.system.mean_motion);
    s.get("t_step", c.system.t_step);
    s.get("thrust_limit", c.system.thrust_limit);
    s.finish();
  }
  {
    auto s = root.child("task");
    s.get("a", c.a);
    s.get("goal_half_width", c.task.goal_half_width);
    s.get("n_directions", c.task.n_directions);
    s.get("v_tol", c.task.v_tol);
    s.get("v_max", c.task.v_max);
    s.get("base_speed", c.task.base_speed);
    s.finish();
  }
  c.task.mean_motion = c.system.mean_motion;
  {
    auto s = root.child("certificate");
    std::string mode = "frwa";
    s.get("mode", mode);
    if (mode != "frwa" && mode != "rwa") throw ParseError(s.where("mode") + ": expected frwa or rwa");
    c.filtered = mode == "frwa";
    s.get("alpha", c.witness.alpha);
    s.get("beta", c.witness.beta);
    s.get("epsilon", c.witness.epsilon);
    s.get("c1", c.c1);
    s.get("c2", c.c2);
    s.finish();
  }
  {
    auto s = root.child("train");
    TrainConfig& t = c.train;
    s.get("c_s", t.c_s);
    s.get("c_d", t.c_d);
    s.get("c_u", t.c_u);
    std::string reading = to_string(t.delta_reading);
    s.get("delta_reading", reading);
    try {
      t.delta_reading = delta_reading_from_string(reading);
    } catch (const ParseError& e) {
      throw ParseError(s.where("delta_reading") + ": " + e.what());
    }
    std::tie(t.delta1, t.delta2) = margins_for(t.delta_reading);
    // Explicit margins override the reading.
    s.get("delta1", t.delta1);
    s.get("delta2", t.delta2);
    s.get("lr_initial", t.lr_initial);
    s.get("lr_finetune", t.lr_finetune);
    s.get("epochs_max", t.epochs_max);
    s.get("batch_size", t.batch_size);
    s.number("zero_loss_tol", t.zero_loss_tol);
    s.get("neighbor_count", t.neighbor_count);
    s.get("neighbor_radius", t.neighbor_radius);
    s.get("seed", t.seed);
    std::string opt = to_string(t.optimizer);
    s.get("optimizer", opt);
    try {
      t.optimizer = optimizer_from_string(opt);
    } catch (const Error& e) {
      throw ParseError(s.where("optimizer") + ": " + e.what());
    }
    s.get("momentum", t.momentum);
    s.get("joint", t.joint);
    s.get("base_samples", t.base_samples);
    s.get("base_initial_samples", t.base_initial_samples);
    s.get("base_unsafe_samples", t.base_unsafe_samples);
    s.get("controller_hidden", t.controller_hidden);
    s.get("certificate_hidden", t.certificate_hidden);
    s.get("counterexamples_per_check", t.counterexamples_per_check);
    s.finish();
  }
  c.init.hidden = c.train.controller_hidden;
  {
    auto s = root.child("init");
    std::string mode = to_string(c.init.mode);
    s.get("mode", mode);
    try {
      c.init.mode = init_mode_from_string(mode);
    } catch (const ParseError& e) {
      throw ParseError(s.where("mode") + ": " + e.what());
    }
    s.get("import_path", c.init.import_path);
    s.get("kp", c.init.gains.kp);
    s.get("kd", c.init.gains.kd);
    s.get("samples", c.init.samples);
    s.get("epochs", c.init.epochs);
    s.finish();
  }
  {
    auto s = root.child("verifier");
    BnbConfig& v = c.verifier;
    s.get("max_boxes", v.max_boxes);
    std::vector<double> widths;
    s.get("min_box_width", widths);
    v.min_box_width = Vec::Map(widths.data(), static_cast<Eigen::Index>(widths.size()));
    std::string relax = relaxation_name(v.relaxation);
    s.get("relaxation", relax);
    v.relaxation = relaxation_from(relax);
    s.get("soundness_margin", v.soundness_margin);
    s.get("parallel_workers", v.parallel_workers);
    s.get("probe_samples", v.probe_samples);
    s.get("max_counterexamples", v.max_counterexamples);
    s.get("case_split_limit", v.case_split_limit);
    s.get("seed", v.seed);
    s.get("time_budget_s", v.time_budget_s);
    s.finish();
  }
  {
    auto s = root.child("cegis");
    s.get("wall_budget_s", c.wall_budget_s);
    s.get("max_iterations", c.max_iterations);
    s.finish();
  }
  {
    auto s = root.child("compose");
    s.get("schedule", c.schedule);
    s.get("total_budget_s", c.compose_budget_s);
    s.get("annulus_samples", c.annulus_samples);
    s.get("trials", c.compose_trials);
    s.finish();
  }
  {
    auto s = root.child("simulate");
    s.get("trials", c.sim_trials);
    s.get("max_steps", c.sim_max_steps);
    s.get("seed", c.sim_seed);
    s.get("workers", c.sim_workers);
    s.finish();
  }
  {
    auto s = root.child("verify");
    s.get("direct_safety", c.direct_safety);
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

json parse_with_location(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    // Drop nlohmann's own "[json.exception.parse_error.101] parse error at line 1, column 2:" prefix.
    if (const auto pos = what.find(": "); pos != std::string::npos) what = what.substr(pos + 2);
    std::ostringstream os;
    os << origin << ':' << line << ':' << col << ": " << what;
    throw ParseError(os.str());
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const json doc = parse_with_location(ss.str(), path);
  try {
    return config_from_json(doc);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

Plant plant_of(const RunConfig& c) { return make_plant(c.plant, c.system); }

RwaTask task_of(const RunConfig& c) { return task_of(c, c.a); }

RwaTask task_of(const RunConfig& c, double a) { return make_task_for(plant_of(c), a, c.task); }

CertificateForm form_of(const RunConfig& c) {
  CertificateForm f;
  f.witness = c.witness;
  f.c1 = c.c1;
  f.c2 = c.c2;
  f.filtered = c.filtered;
  return f;
}

CegisOptions cegis_options_of(const RunConfig& c) {
  CegisOptions o;
  o.form = form_of(c);
  o.train = c.train;
  o.verifier = c.verifier;
  o.wall_budget_s = c.wall_budget_s;
  o.max_iterations = c.max_iterations;
  return o;
}

}  // namespace nlb::cli
