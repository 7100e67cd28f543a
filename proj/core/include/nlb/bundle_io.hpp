#pragma once

/// @file bundle_io.hpp
/// Certificate bundles (certificate + controller + witness + task in one JSON
/// document) and chain bundles (ordered stage bundle files).

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlb/certificate.hpp"
#include "nlb/composition.hpp"
#include "nlb/dynamics.hpp"
#include "nlb/region_io.hpp"

namespace nlb {

struct CertificateBundle {
  std::string plant = "spacecraft";
  SystemParams params;
  bool filtered = true;
  std::string name = "V";  ///< how regions in other bundles refer to this certificate
  FrwaCertificate certificate;  ///< goal/unsafe mirror task.goal/task.unsafe
  std::shared_ptr<const Mlp> controller;
  RwaTask task;

  RwaCertificate plain() const { return {certificate.net, certificate.witness}; }
};

/// Assembles a bundle; the certificate's goal and unsafe sets come from task.
CertificateBundle make_bundle(const Plant& plant, const SystemParams& params, const RwaTask& task,
                              const Mlp& certificate, const Mlp& controller, const Witness& witness,
                              double c1, double c2, bool filtered, std::string name = "V");

nlohmann::json to_json(const CertificateBundle& b);
/// `networks` resolves certificate references inside the task regions.
CertificateBundle bundle_from_json(const nlohmann::json& doc, const NetworkTable& networks = {});
void save_bundle(const CertificateBundle& b, const std::string& path);
/// Throws Error when the file is missing, ParseError when it is malformed.
CertificateBundle load_bundle(const std::string& path, const NetworkTable& networks = {});

struct ChainBundle {
  std::string plant = "spacecraft";
  SystemParams params;
  RwaTask task;
  std::vector<std::string> stage_names;
  CrwaCertificate chain;
};

/// Writes <path> plus one stage bundle per stage next to it (<stem>.stage<i>.json).
void save_chain(const ChainBundle& c, const std::string& path);
/// Loads stages in order, binding each goal's reference to the previous
/// stage's certificate object.
ChainBundle load_chain(const std::string& path);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const nlohmann::json& doc, const std::string& path);

}  // namespace nlb
