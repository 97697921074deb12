#pragma once

#include "comaze/partner.hpp"
#include "comaze/sac_agent.hpp"
#include "comaze/session.hpp"
#include "comaze/tray_physics.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace comaze {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServiceConfig {
  int port = 8765;
  std::string bind_address = "127.0.0.1";
  double client_timeout_s = 60.0;
};

struct EvaluationConfig {
  std::string own_model;
  std::vector<std::string> foreign_models;
};

struct AppConfig {
  PhysicsConfig physics;
  TrayGeometry geometry;
  SacConfig agent;
  SessionConfig session;
  PartnerSpec partner;
  ServiceConfig service;
  EvaluationConfig evaluation;
  // Optional starting agent for train/serve (normally the pre-model).
  std::string seed_model;
  unsigned fingerprint_workers = 1;
  std::uint64_t seed = 1;
  std::string output_dir = "run";

  void validate() const;
};

// The config file is JSON. Every section and key is optional (defaults fill
// the gaps) but unknown keys and mistyped values are rejected with the path
// of the offending entry.
AppConfig parse_config(const nlohmann::json& doc);
AppConfig parse_config_text(const std::string& text);
AppConfig load_config(const std::filesystem::path& path);

// Fully resolved configuration, written as the run snapshot.
nlohmann::json to_json(const AppConfig& cfg);

}  // namespace comaze
