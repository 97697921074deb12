#pragma once

#include "comaze/session.hpp"
#include "comaze/tray_physics.hpp"

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace comaze {

// JSON text frames exchanged with the browser client. Every frame carries
// {"schema", "seq", "type"}; the server stamps seq per connection when the
// frame is actually written, so a connection never sees a gap.
inline constexpr const char* kWireSchema = "co-maze-wire/v1";

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Server -> client bodies (without schema/seq).
nlohmann::json state_message(std::int64_t trial, int frame, const TrayState& s, int score_so_far);
// Start cue (three beeps) with the spawn position so the client can draw
// the ball before the first state frame.
nlohmann::json trial_start_message(std::int64_t trial, int spawn_corner, const TrayState& s);
nlohmann::json trial_end_message(const TrialRecord& record);
nlohmann::json session_event_message(int block, const LearningCurve& curve);
nlohmann::json hello_message(bool player);

// Adds schema and sequence number and serialises.
std::string stamp(nlohmann::json body, std::uint64_t seq);

// Client -> server.
struct CommandMsg {
  double phi_human = 0.0;
};
enum class ControlAction { start, pause, abort };
struct ControlMsg {
  ControlAction action = ControlAction::start;
};
using ClientMessage = std::variant<CommandMsg, ControlMsg>;

// Throws WireError on anything that is not a well-formed client frame.
ClientMessage parse_client_message(const std::string& text);
std::string encode_client_message(const ClientMessage& msg, std::uint64_t seq);

std::string to_string(ControlAction a);

}  // namespace comaze
