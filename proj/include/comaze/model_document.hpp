#pragma once

#include "comaze/sac_agent.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace comaze {

inline constexpr const char* kAgentSchema = "co-maze-agent/v1";

class ModelDocumentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON text document: schema tag, hyperparameters, layer shapes, row-major
// weights and (optionally) optimiser state. Numbers are written in
// shortest round-trip form, so serialise/parse/serialise is byte-stable.
std::string serialize_agent(const SacAgent& agent, bool include_optimizer = true);

// Parses and validates a complete document; throws ModelDocumentError
// without producing a partial agent.
SacAgent deserialize_agent(const std::string& text);

void save_agent(const SacAgent& agent, const std::filesystem::path& path,
                bool include_optimizer = true);
SacAgent load_agent(const std::filesystem::path& path);

}  // namespace comaze
