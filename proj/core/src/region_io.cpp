#include "nlb/region_io.hpp"

#include <cmath>
#include <limits>

#include "nlb/error.hpp"
#include "nlb/nn.hpp"

namespace nlb {

nlohmann::json number_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) throw Error("cannot serialize NaN");
  return v;
}

double number_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ParseError("expected a number, got \"" + s + "\"");
  }
  if (!j.is_number()) throw ParseError("expected a number");
  return j.get<double>();
}

nlohmann::json to_json(const BoxRegion& b) {
  nlohmann::json lo = nlohmann::json::array(), hi = nlohmann::json::array();
  for (int i = 0; i < b.dim(); ++i) {
    lo.push_back(number_to_json(b.lower[i]));
    hi.push_back(number_to_json(b.upper[i]));
  }
  return {{"lower", lo}, {"upper", hi}};
}

BoxRegion box_from_json(const nlohmann::json& doc) {
  const auto& lo = doc.at("lower");
  const auto& hi = doc.at("upper");
  if (!lo.is_array() || !hi.is_array() || lo.size() != hi.size()) {
    throw ParseError("box: lower/upper must be arrays of equal length");
  }
  Vec l(static_cast<Eigen::Index>(lo.size())), h(static_cast<Eigen::Index>(hi.size()));
  for (std::size_t i = 0; i < lo.size(); ++i) {
    l[static_cast<Eigen::Index>(i)] = number_from_json(lo[i]);
    h[static_cast<Eigen::Index>(i)] = number_from_json(hi[i]);
  }
  return BoxRegion(l, h);
}

nlohmann::json to_json(const Region& r) {
  const auto& n = r.node();
  nlohmann::json j;
  using K = Region::Kind;
  switch (n.kind) {
    case K::Box:
      j = to_json(n.box);
      j["kind"] = "box";
      break;
    case K::ComplementBox:
      j = to_json(n.box);
      j["kind"] = "complement_box";
      break;
    case K::VelocityUnsafeOverapprox:
      j = {{"kind", "velocity_unsafe"},
           {"position_dims", n.speed.position_dims},
           {"velocity_dims", n.speed.velocity_dims},
           {"base_speed", n.speed.base_speed},
           {"slope", n.speed.slope},
           {"n_directions", n.speed.n_directions}};
      break;
    case K::CertSublevel:
      if (n.certificate_name.empty()) throw Error("cannot serialize an unnamed certificate reference");
      j = {{"kind", "cert_sublevel"}, {"certificate", n.certificate_name}, {"threshold", n.threshold}};
      break;
    case K::Union:
    case K::Intersection: {
      nlohmann::json kids = nlohmann::json::array();
      for (const auto& c : n.children) kids.push_back(to_json(c));
      j = {{"kind", n.kind == K::Union ? "union" : "intersection"}, {"children", kids}};
      break;
    }
    case K::Complement: j = {{"kind", "complement"}, {"child", to_json(n.children[0])}}; break;
  }
  if (!r.label().empty()) j["label"] = r.label();
  return j;
}

Region region_from_json(const nlohmann::json& doc, const NetworkTable& networks, bool allow_dangling) {
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    Region r;
    if (kind == "box") {
      r = Region::box(box_from_json(doc));
    } else if (kind == "complement_box") {
      r = Region::complement_box(box_from_json(doc));
    } else if (kind == "velocity_unsafe") {
      SpeedLimit l;
      l.position_dims = doc.at("position_dims").get<std::vector<int>>();
      l.velocity_dims = doc.at("velocity_dims").get<std::vector<int>>();
      l.base_speed = doc.at("base_speed").get<double>();
      l.slope = doc.at("slope").get<double>();
      l.n_directions = doc.at("n_directions").get<int>();
      r = Region::velocity_unsafe(l);
    } else if (kind == "cert_sublevel") {
      const auto name = doc.at("certificate").get<std::string>();
      auto it = networks.find(name);
      if (it == networks.end() && !allow_dangling) {
        throw ParseError("region refers to unknown certificate '" + name + "'");
      }
      r = Region::cert_sublevel(it == networks.end() ? nullptr : it->second,
                                doc.at("threshold").get<double>(), name);
    } else if (kind == "union" || kind == "intersection") {
      std::vector<Region> kids;
      for (const auto& c : doc.at("children")) kids.push_back(region_from_json(c, networks, allow_dangling));
      r = kind == "union" ? Region::union_of(std::move(kids)) : Region::intersection_of(std::move(kids));
    } else if (kind == "complement") {
      r = Region::complement(region_from_json(doc.at("child"), networks, allow_dangling));
    } else {
      throw ParseError("unknown region kind '" + kind + "'");
    }
    if (doc.contains("label")) r = r.with_label(doc.at("label").get<std::string>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("region: ") + e.what());
  }
}

nlohmann::json to_json(const RwaTask& t) {
  return {{"name", t.name},
          {"initial", to_json(t.initial)},
          {"goal", to_json(t.goal)},
          {"unsafe", to_json(t.unsafe)},
          {"domain", to_json(t.domain)}};
}

RwaTask task_from_json(const nlohmann::json& doc, const NetworkTable& networks) {
  try {
    RwaTask t;
    t.name = doc.value("name", "");
    t.initial = region_from_json(doc.at("initial"), networks);
    t.goal = region_from_json(doc.at("goal"), networks);
    t.unsafe = region_from_json(doc.at("unsafe"), networks);
    t.domain = box_from_json(doc.at("domain"));
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("task: ") + e.what());
  }
}

}  // namespace nlb
