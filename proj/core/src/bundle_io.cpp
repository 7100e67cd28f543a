#include "nlb/bundle_io.hpp"

#include <filesystem>
#include <fstream>

#include "nlb/error.hpp"

namespace nlb {

namespace fs = std::filesystem;

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_json_file(const nlohmann::json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << doc.dump(1) << '\n';
  if (!out) throw Error("failed writing " + path);
}

CertificateBundle make_bundle(const Plant& plant, const SystemParams& params, const RwaTask& task,
                              const Mlp& certificate, const Mlp& controller, const Witness& witness,
                              double c1, double c2, bool filtered, std::string name) {
  CertificateBundle b;
  b.plant = plant.name;
  b.params = params;
  b.filtered = filtered;
  b.name = std::move(name);
  b.certificate.net = std::make_shared<const Mlp>(certificate);
  b.certificate.witness = witness;
  b.certificate.goal = task.goal;
  b.certificate.unsafe = task.unsafe;
  b.certificate.c1 = c1;
  b.certificate.c2 = c2;
  b.controller = std::make_shared<const Mlp>(controller);
  b.task = task;
  return b;
}

namespace {

nlohmann::json params_json(const SystemParams& p) {
  return {{"mass", p.mass}, {"mean_motion", p.mean_motion}, {"t_step", p.t_step}, {"thrust_limit", p.thrust_limit}};
}

SystemParams params_from(const nlohmann::json& j) {
  SystemParams p;
  p.mass = j.at("mass").get<double>();
  p.mean_motion = j.at("mean_motion").get<double>();
  p.t_step = j.at("t_step").get<double>();
  p.thrust_limit = j.at("thrust_limit").get<double>();
  p.validate();
  return p;
}

}  // namespace

nlohmann::json to_json(const CertificateBundle& b) {
  if (!b.certificate.net || !b.controller) throw Error("bundle: missing network");
  const Witness& w = b.certificate.witness;
  return {{"format", "nlb-certificate-bundle"},
          {"version", 1},
          {"plant", b.plant},
          {"params", params_json(b.params)},
          {"mode", b.filtered ? "frwa" : "rwa"},
          {"name", b.name},
          {"witness", {{"alpha", w.alpha}, {"beta", w.beta}, {"epsilon", w.epsilon}}},
          {"clamps", {{"c1", b.certificate.c1}, {"c2", b.certificate.c2}}},
          {"task", to_json(b.task)},
          {"certificate", to_json(*b.certificate.net)},
          {"controller", to_json(*b.controller)}};
}

CertificateBundle bundle_from_json(const nlohmann::json& doc, const NetworkTable& networks) {
  try {
    if (doc.value("format", "") != "nlb-certificate-bundle") throw ParseError("not a certificate bundle");
    if (doc.at("version").get<int>() != 1) throw ParseError("unsupported certificate bundle version");
    CertificateBundle b;
    b.plant = doc.at("plant").get<std::string>();
    b.params = params_from(doc.at("params"));
    const auto mode = doc.at("mode").get<std::string>();
    if (mode != "frwa" && mode != "rwa") throw ParseError("bundle mode must be frwa or rwa");
    b.filtered = mode == "frwa";
    b.name = doc.value("name", "V");
    b.task = task_from_json(doc.at("task"), networks);
    b.certificate.net = std::make_shared<const Mlp>(mlp_from_json(doc.at("certificate")));
    b.controller = std::make_shared<const Mlp>(mlp_from_json(doc.at("controller")));
    const auto& w = doc.at("witness");
    b.certificate.witness = {w.at("alpha").get<double>(), w.at("beta").get<double>(), w.at("epsilon").get<double>()};
    b.certificate.c1 = doc.at("clamps").at("c1").get<double>();
    b.certificate.c2 = doc.at("clamps").at("c2").get<double>();
    b.certificate.goal = b.task.goal;
    b.certificate.unsafe = b.task.unsafe;
    b.certificate.witness.validate();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bundle: ") + e.what());
  }
}

void save_bundle(const CertificateBundle& b, const std::string& path) { write_json_file(to_json(b), path); }

CertificateBundle load_bundle(const std::string& path, const NetworkTable& networks) {
  try {
    return bundle_from_json(read_json_file(path), networks);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_chain(const ChainBundle& c, const std::string& path) {
  const fs::path p(path);
  const std::string stem = p.stem().string();
  nlohmann::json stages = nlohmann::json::array();
  for (std::size_t i = 0; i < c.chain.size(); ++i) {
    const Stage& s = c.chain.stages[i];
    const std::string file = stem + ".stage" + std::to_string(i) + ".json";
    CertificateBundle b = make_bundle(make_plant(c.plant, c.params), c.params, c.chain.stage_task(i),
                                      *s.certificate.net, *s.controller, s.certificate.witness, s.certificate.c1,
                                      s.certificate.c2, true, "V" + std::to_string(i));
    save_bundle(b, (p.parent_path() / file).string());
    stages.push_back({{"name", i < c.stage_names.size() ? c.stage_names[i] : ""},
                      {"bundle", file},
                      {"verified", s.verified},
                      {"seconds", s.seconds},
                      {"iterations", s.iterations}});
  }
  write_json_file({{"format", "nlb-chain-bundle"},
                   {"version", 1},
                   {"plant", c.plant},
                   {"params", params_json(c.params)},
                   {"task", to_json(c.task)},
                   {"stages", stages}},
                  path);
}

ChainBundle load_chain(const std::string& path) {
  const nlohmann::json doc = read_json_file(path);
  try {
    if (doc.value("format", "") != "nlb-chain-bundle") throw ParseError(path + ": not a chain bundle");
    if (doc.at("version").get<int>() != 1) throw ParseError(path + ": unsupported chain bundle version");
    ChainBundle c;
    c.plant = doc.at("plant").get<std::string>();
    c.params = params_from(doc.at("params"));
    c.task = task_from_json(doc.at("task"));
    NetworkTable table;
    const fs::path dir = fs::path(path).parent_path();
    int i = 0;
    for (const auto& st : doc.at("stages")) {
      CertificateBundle b = load_bundle((dir / st.at("bundle").get<std::string>()).string(), table);
      Stage s;
      s.index = i;
      s.controller = b.controller;
      s.certificate = b.certificate;
      s.initial = b.task.initial;
      s.unsafe = b.task.unsafe;
      s.goal = b.task.goal;
      s.domain = b.task.domain;
      s.verified = st.value("verified", false);
      s.seconds = st.value("seconds", 0.0);
      s.iterations = st.value("iterations", 0);
      table[b.name] = b.certificate.net;
      c.stage_names.push_back(st.value("name", ""));
      c.chain.stages.push_back(std::move(s));
      ++i;
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace nlb
