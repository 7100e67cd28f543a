#pragma once

/// @file region_io.hpp
/// JSON form of Region trees. Certificate sublevel nodes refer to networks
/// by name; the caller supplies the name -> network table when loading.

#include <map>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "nlb/geometry.hpp"

namespace nlb {

class Mlp;

using NetworkTable = std::map<std::string, std::shared_ptr<const Mlp>>;

nlohmann::json to_json(const Region& r);
/// Unknown certificate names are a ParseError unless allow_dangling, in
/// which case the node is kept and fails on evaluation.
Region region_from_json(const nlohmann::json& doc, const NetworkTable& networks = {},
                        bool allow_dangling = false);

nlohmann::json to_json(const BoxRegion& b);
BoxRegion box_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const RwaTask& t);
RwaTask task_from_json(const nlohmann::json& doc, const NetworkTable& networks = {});

/// Bound values use strings for infinities, which JSON cannot express.
nlohmann::json number_to_json(double v);
double number_from_json(const nlohmann::json& j);

}  // namespace nlb
