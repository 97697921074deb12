#include "comaze/wire.hpp"

#include <cmath>

namespace comaze {

using nlohmann::json;

json state_message(std::int64_t trial, int frame, const TrayState& s, int score_so_far) {
  return {{"type", "state"}, {"frame", frame},   {"x", s.x},
          {"y", s.y},        {"theta", s.theta}, {"phi", s.phi},
          {"trial", trial},  {"score_so_far", score_so_far}, {"captured", s.captured}};
}

json trial_start_message(std::int64_t trial, int spawn_corner, const TrayState& s) {
  return {{"type", "trial_event"}, {"kind", "start"}, {"beeps", 3}, {"trial", trial},
          {"corner", spawn_corner},  {"x", s.x},        {"y", s.y},   {"score", 0}};
}

json trial_end_message(const TrialRecord& r) {
  return {{"type", "trial_event"}, {"kind", "end"},       {"beeps", 1},
          {"trial", r.trial_index}, {"score", r.score},   {"success", r.success},
          {"aborted", r.aborted},   {"frames_used", r.frames_used}};
}

json session_event_message(int block, const LearningCurve& curve) {
  return {{"type", "session_event"},
          {"block", block},
          {"curve", curve.block_successes},
          {"trials_per_block", curve.trials_per_block}};
}

json hello_message(bool player) {
  return {{"type", "hello"}, {"role", player ? "player" : "spectator"}};
}

std::string stamp(json body, std::uint64_t seq) {
  body["schema"] = kWireSchema;
  body["seq"] = seq;
  return body.dump();
}

std::string to_string(ControlAction a) {
  switch (a) {
    case ControlAction::start: return "start";
    case ControlAction::pause: return "pause";
    case ControlAction::abort: return "abort";
  }
  return "?";
}

ClientMessage parse_client_message(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error&) {
    throw WireError("not JSON");
  }
  if (!doc.is_object()) throw WireError("not an object");
  auto schema = doc.find("schema");
  if (schema == doc.end() || !schema->is_string() || *schema != kWireSchema) {
    throw WireError("missing or unsupported schema");
  }
  auto seq = doc.find("seq");
  if (seq == doc.end() || !seq->is_number_unsigned()) throw WireError("missing sequence number");
  auto type = doc.find("type");
  if (type == doc.end() || !type->is_string()) throw WireError("missing type");

  if (*type == "command") {
    auto phi = doc.find("phi_human");
    if (phi == doc.end() || !phi->is_number()) throw WireError("command without numeric phi_human");
    const double v = phi->get<double>();
    if (!std::isfinite(v)) throw WireError("non-finite phi_human");
    return CommandMsg{v};
  }
  if (*type == "control") {
    auto action = doc.find("action");
    if (action == doc.end() || !action->is_string()) throw WireError("control without action");
    if (*action == "start") return ControlMsg{ControlAction::start};
    if (*action == "pause") return ControlMsg{ControlAction::pause};
    if (*action == "abort") return ControlMsg{ControlAction::abort};
    throw WireError("unknown control action");
  }
  throw WireError("unknown message type");
}

std::string encode_client_message(const ClientMessage& msg, std::uint64_t seq) {
  json body;
  if (const auto* c = std::get_if<CommandMsg>(&msg)) {
    body = {{"type", "command"}, {"phi_human", c->phi_human}};
  } else {
    body = {{"type", "control"}, {"action", to_string(std::get<ControlMsg>(msg).action)}};
  }
  return stamp(std::move(body), seq);
}

}  // namespace comaze
