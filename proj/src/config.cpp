#include "comaze/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <type_traits>

namespace comaze {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were consumed so that the
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config: " + (where.empty() ? std::string("<root>") : where) + ": " + what);
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(at(key), "expected a number");
      out = v->get<double>();
    }
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(at(key), "expected an integer");
      if (v->is_number_unsigned()) {
        const auto u = v->get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())) fail(at(key), "out of range");
        out = static_cast<Int>(u);
      } else {
        const auto i = v->get<std::int64_t>();
        if constexpr (std::is_unsigned_v<Int>) {
          if (i < 0) fail(at(key), "must be non-negative");
        } else {
          if (i < std::numeric_limits<Int>::min() || i > std::numeric_limits<Int>::max()) {
            fail(at(key), "out of range");
          }
        }
        out = static_cast<Int>(i);
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void point(const std::string& key, Vec2& out) {
    if (const json* v = find(key)) out = parse_point(*v, at(key));
  }

  static Vec2 parse_point(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      fail(where, "expected [x, y]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_physics(Section s, PhysicsConfig& p) {
  s.number("gravity", p.gravity);
  s.number("rolling_factor", p.rolling_factor);
  s.number("linear_damping", p.linear_damping);
  s.number("wall_restitution", p.wall_restitution);
  s.number("max_tilt", p.max_tilt);
  s.number("max_tilt_rate", p.max_tilt_rate);
  s.number("substep_dt", p.substep_dt);
  s.integer("substeps_per_frame", p.substeps_per_frame);
  s.number("actuation_latency", p.actuation_latency);
  s.finish();
}

void read_geometry(Section s, TrayGeometry& g) {
  s.number("side_length", g.side_length);
  s.number("gap_width", g.gap_width);
  s.point("goal_center", g.goal_center);
  s.number("goal_radius", g.goal_radius);
  s.number("ball_radius", g.ball_radius);
  if (const json* v = s.find("spawn_corners")) {
    if (!v->is_array() || v->size() != g.spawn_corners.size()) {
      Section::fail(s.at("spawn_corners"), "expected three [x, y] points");
    }
    for (std::size_t i = 0; i < g.spawn_corners.size(); ++i) {
      g.spawn_corners[i] = Section::parse_point((*v)[i], s.at("spawn_corners") + "[" + std::to_string(i) + "]");
    }
  }
  s.finish();
}

void read_agent(Section s, SacConfig& a) {
  s.number("gamma", a.gamma);
  s.number("tau", a.tau);
  s.number("learning_rate", a.learning_rate);
  s.integer("batch_size", a.batch_size);
  s.integer("hidden", a.hidden);
  s.number("target_entropy", a.target_entropy);
  s.number("initial_log_alpha", a.initial_log_alpha);
  s.number("log_std_min", a.log_std.min);
  s.number("log_std_max", a.log_std.max);
  s.number("output_init_scale", a.output_init_scale);
  if (const json* v = s.find("state_scale")) {
    if (!v->is_array() || v->size() != a.state_scale.size()) {
      Section::fail(s.at("state_scale"), "expected 8 numbers");
    }
    for (std::size_t i = 0; i < a.state_scale.size(); ++i) {
      if (!(*v)[i].is_number()) Section::fail(s.at("state_scale"), "expected 8 numbers");
      a.state_scale[i] = (*v)[i].get<double>();
    }
  }
  s.finish();
}

std::string mode_name(UpdateMode m) { return m == UpdateMode::trial_wise ? "trial_wise" : "frame_wise"; }

void read_session(Section s, SessionConfig& c) {
  s.integer("frames_per_trial", c.frames_per_trial);
  s.number("frame_duration", c.frame_duration);
  s.integer("trials_per_block", c.trials_per_block);
  s.integer("blocks", c.blocks);
  s.integer("updates_per_trial_end", c.updates_per_trial_end);
  s.integer("buffer_trials", c.buffer_trials);
  std::string mode = mode_name(c.mode);
  s.string("mode", mode);
  if (mode == "trial_wise") {
    c.mode = UpdateMode::trial_wise;
  } else if (mode == "frame_wise") {
    c.mode = UpdateMode::frame_wise;
  } else {
    Section::fail(s.at("mode"), "expected \"trial_wise\" or \"frame_wise\"");
  }
  if (const json* v = s.find("offline_update_schedule")) {
    if (!v->is_array()) Section::fail(s.at("offline_update_schedule"), "expected a list of phases");
    c.offline_update_schedule.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      OfflinePhase p;
      Section ps((*v)[i], s.at("offline_update_schedule") + "[" + std::to_string(i) + "]");
      ps.integer("play_frames", p.play_frames);
      ps.integer("offline_updates", p.offline_updates);
      ps.finish();
      c.offline_update_schedule.push_back(p);
    }
  }
  s.integer("test_trials", c.test_trials);
  s.boolean("realtime", c.realtime);
  s.integer("premodel_trials", c.premodel_trials);
  s.integer("premodel_offline_updates", c.premodel_offline_updates);
  s.boolean("premodel_online_updates", c.premodel_online_updates);
  s.finish();
}

void read_partner(Section s, PartnerSpec& p) {
  std::string kind = to_string(p.kind);
  s.string("kind", kind);
  try {
    p.kind = partner_kind_from_string(kind);
  } catch (const std::exception&) {
    Section::fail(s.at("kind"), "unknown partner kind \"" + kind + "\"");
  }
  s.number("position_gain", p.position_gain);
  s.number("velocity_gain", p.velocity_gain);
  s.number("noise_std", p.noise_std);
  s.number("response_probability", p.response_probability);
  s.integer("seed", p.seed);
  s.string("tag", p.tag);
  s.finish();
}

void read_service(Section s, ServiceConfig& c) {
  s.integer("port", c.port);
  s.string("bind_address", c.bind_address);
  s.number("client_timeout_s", c.client_timeout_s);
  s.finish();
}

void read_evaluation(Section s, EvaluationConfig& c) {
  s.string("own_model", c.own_model);
  if (const json* v = s.find("foreign_models")) {
    if (!v->is_array()) Section::fail(s.at("foreign_models"), "expected a list of paths");
    c.foreign_models.clear();
    for (const auto& e : *v) {
      if (!e.is_string()) Section::fail(s.at("foreign_models"), "expected a list of paths");
      c.foreign_models.push_back(e.get<std::string>());
    }
  }
  s.finish();
}

}  // namespace

void AppConfig::validate() const {
  try {
    physics.validate();
    geometry.validate();
    agent.validate();
    session.validate();
    partner.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (std::abs(session.frame_duration - physics.frame_duration()) > 1e-9) {
    throw ConfigError("config: session.frame_duration must equal physics.substep_dt * physics.substeps_per_frame");
  }
  if (service.port < 0 || service.port > 65535) throw ConfigError("config: service.port: out of range");
  if (!(service.client_timeout_s > 0.0)) throw ConfigError("config: service.client_timeout_s: must be positive");
  if (fingerprint_workers == 0) throw ConfigError("config: fingerprint_workers: must be at least 1");
  if (output_dir.empty()) throw ConfigError("config: output_dir: must not be empty");
}

AppConfig parse_config(const json& doc) {
  AppConfig cfg;
  Section root(doc, "");
  if (const json* v = root.find("physics")) read_physics(Section(*v, "physics"), cfg.physics);
  if (const json* v = root.find("geometry")) read_geometry(Section(*v, "geometry"), cfg.geometry);
  if (const json* v = root.find("agent")) read_agent(Section(*v, "agent"), cfg.agent);
  if (const json* v = root.find("session")) read_session(Section(*v, "session"), cfg.session);
  if (const json* v = root.find("partner")) read_partner(Section(*v, "partner"), cfg.partner);
  if (const json* v = root.find("service")) read_service(Section(*v, "service"), cfg.service);
  if (const json* v = root.find("evaluation")) read_evaluation(Section(*v, "evaluation"), cfg.evaluation);
  root.string("seed_model", cfg.seed_model);
  root.integer("fingerprint_workers", cfg.fingerprint_workers);
  root.integer("seed", cfg.seed);
  root.string("output_dir", cfg.output_dir);
  root.finish();
  cfg.validate();
  return cfg;
}

AppConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json to_json(const AppConfig& c) {
  json sched = json::array();
  for (const auto& p : c.session.offline_update_schedule) {
    sched.push_back({{"play_frames", p.play_frames}, {"offline_updates", p.offline_updates}});
  }
  json corners = json::array();
  for (const auto& p : c.geometry.spawn_corners) corners.push_back({p.x, p.y});
  return {
      {"physics",
       {{"gravity", c.physics.gravity},
        {"rolling_factor", c.physics.rolling_factor},
        {"linear_damping", c.physics.linear_damping},
        {"wall_restitution", c.physics.wall_restitution},
        {"max_tilt", c.physics.max_tilt},
        {"max_tilt_rate", c.physics.max_tilt_rate},
        {"substep_dt", c.physics.substep_dt},
        {"substeps_per_frame", c.physics.substeps_per_frame},
        {"actuation_latency", c.physics.actuation_latency}}},
      {"geometry",
       {{"side_length", c.geometry.side_length},
        {"gap_width", c.geometry.gap_width},
        {"goal_center", {c.geometry.goal_center.x, c.geometry.goal_center.y}},
        {"goal_radius", c.geometry.goal_radius},
        {"ball_radius", c.geometry.ball_radius},
        {"spawn_corners", corners}}},
      {"agent",
       {{"gamma", c.agent.gamma},
        {"tau", c.agent.tau},
        {"learning_rate", c.agent.learning_rate},
        {"batch_size", c.agent.batch_size},
        {"hidden", c.agent.hidden},
        {"target_entropy", c.agent.target_entropy},
        {"initial_log_alpha", c.agent.initial_log_alpha},
        {"log_std_min", c.agent.log_std.min},
        {"log_std_max", c.agent.log_std.max},
        {"output_init_scale", c.agent.output_init_scale},
        {"state_scale", c.agent.state_scale}}},
      {"session",
       {{"frames_per_trial", c.session.frames_per_trial},
        {"frame_duration", c.session.frame_duration},
        {"trials_per_block", c.session.trials_per_block},
        {"blocks", c.session.blocks},
        {"updates_per_trial_end", c.session.updates_per_trial_end},
        {"buffer_trials", c.session.buffer_trials},
        {"mode", mode_name(c.session.mode)},
        {"offline_update_schedule", sched},
        {"test_trials", c.session.test_trials},
        {"realtime", c.session.realtime},
        {"premodel_trials", c.session.premodel_trials},
        {"premodel_offline_updates", c.session.premodel_offline_updates},
        {"premodel_online_updates", c.session.premodel_online_updates}}},
      {"partner",
       {{"kind", to_string(c.partner.kind)},
        {"position_gain", c.partner.position_gain},
        {"velocity_gain", c.partner.velocity_gain},
        {"noise_std", c.partner.noise_std},
        {"response_probability", c.partner.response_probability},
        {"seed", c.partner.seed},
        {"tag", c.partner.tag}}},
      {"service",
       {{"port", c.service.port},
        {"bind_address", c.service.bind_address},
        {"client_timeout_s", c.service.client_timeout_s}}},
      {"evaluation", {{"own_model", c.evaluation.own_model}, {"foreign_models", c.evaluation.foreign_models}}},
      {"seed_model", c.seed_model},
      {"fingerprint_workers", c.fingerprint_workers},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
  };
}

}  // namespace comaze
