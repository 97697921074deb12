#include "comaze/model_document.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace comaze {

namespace {

using nlohmann::json;

constexpr const char* kNetworkNames[] = {"actor", "q1", "q2", "v", "v_target"};

[[noreturn]] void fail(const std::string& msg) { throw ModelDocumentError("model document: " + msg); }

// A parameter-shaped vector written per layer with row-major weights.
json layers_to_json(const MlpNetwork& shape_of, const Vector& flat) {
  MlpNetwork view = shape_of;
  view.parameters() = flat;
  json layers = json::array();
  for (int l = 0; l < 3; ++l) {
    const auto w = view.weights(l);
    const auto b = view.bias(l);
    json weights = json::array();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) weights.push_back(w(i, j));
    }
    json bias = json::array();
    for (Eigen::Index i = 0; i < b.size(); ++i) bias.push_back(b(i));
    layers.push_back({{"rows", w.rows()}, {"cols", w.cols()}, {"weights", weights}, {"bias", bias}});
  }
  return layers;
}

double finite_number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where + ": expected a finite number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(where + ": non-finite value");
  return d;
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) fail(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(where + ": missing '" + key + "'");
  return *it;
}

Vector layers_from_json(const MlpNetwork& shape_of, const json& layers, const std::string& where) {
  if (!layers.is_array() || layers.size() != 3) fail(where + ": expected 3 layers");
  MlpNetwork view = shape_of;
  for (int l = 0; l < 3; ++l) {
    const json& layer = layers[static_cast<std::size_t>(l)];
    const std::string lw = where + ".layer" + std::to_string(l);
    auto w = view.weights(l);
    auto b = view.bias(l);
    if (field(layer, "rows", lw).get<long long>() != w.rows() ||
        field(layer, "cols", lw).get<long long>() != w.cols()) {
      fail(lw + ": shape mismatch");
    }
    const json& weights = field(layer, "weights", lw);
    const json& bias = field(layer, "bias", lw);
    if (!weights.is_array() || weights.size() != static_cast<std::size_t>(w.size()) ||
        !bias.is_array() || bias.size() != static_cast<std::size_t>(b.size())) {
      fail(lw + ": array length mismatch");
    }
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = finite_number(weights[k++], lw);
    }
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = finite_number(bias[static_cast<std::size_t>(i)], lw);
  }
  return view.parameters();
}

const MlpNetwork& network(const SacAgent& a, int i) {
  switch (i) {
    case 0: return a.actor();
    case 1: return a.q1();
    case 2: return a.q2();
    case 3: return a.value();
    default: return a.value_target();
  }
}

MlpNetwork& network(SacAgent& a, int i) {
  return const_cast<MlpNetwork&>(network(static_cast<const SacAgent&>(a), i));
}

// Adam groups; the value target has none, log_alpha is handled separately.
AdamState* adam_group(SacAgent& a, int i) {
  switch (i) {
    case 0: return &a.optimizer().actor;
    case 1: return &a.optimizer().q1;
    case 2: return &a.optimizer().q2;
    case 3: return &a.optimizer().value;
    default: return nullptr;
  }
}

}  // namespace

std::string serialize_agent(const SacAgent& agent, bool include_optimizer) {
  for (int i = 0; i < 5; ++i) {
    if (!network(agent, i).all_finite()) fail(std::string("non-finite parameters in ") + kNetworkNames[i]);
  }
  if (!std::isfinite(agent.log_alpha())) fail("non-finite log_alpha");

  const SacConfig& c = agent.config();
  json doc;
  doc["schema"] = kAgentSchema;
  doc["config"] = {{"gamma", c.gamma},
                   {"tau", c.tau},
                   {"learning_rate", c.learning_rate},
                   {"batch_size", c.batch_size},
                   {"hidden", c.hidden},
                   {"target_entropy", c.target_entropy},
                   {"initial_log_alpha", c.initial_log_alpha},
                   {"log_std_min", c.log_std.min},
                   {"log_std_max", c.log_std.max},
                   {"output_init_scale", c.output_init_scale},
                   {"state_scale", c.state_scale}};
  doc["log_alpha"] = agent.log_alpha();
  doc["update_count"] = agent.update_count();
  json nets;
  for (int i = 0; i < 5; ++i) {
    nets[kNetworkNames[i]] = layers_to_json(network(agent, i), network(agent, i).parameters());
  }
  doc["networks"] = nets;

  if (include_optimizer) {
    SacAgent& mut = const_cast<SacAgent&>(agent);
    json opt;
    for (int i = 0; i < 4; ++i) {
      const AdamState& s = *adam_group(mut, i);
      opt[kNetworkNames[i]] = {{"step", s.step},
                               {"m", layers_to_json(network(agent, i), s.m)},
                               {"v", layers_to_json(network(agent, i), s.v)}};
    }
    const AdamState& la = agent.optimizer().log_alpha;
    opt["log_alpha"] = {{"step", la.step}, {"m", la.m(0)}, {"v", la.v(0)}};
    doc["optimizer"] = opt;
  }
  return doc.dump() + "\n";
}

SacAgent deserialize_agent(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("parse error: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("schema") || !doc["schema"].is_string()) {
      fail("missing schema tag");
    }
    if (doc["schema"].get<std::string>() != kAgentSchema) {
      fail("unsupported schema '" + doc["schema"].get<std::string>() + "', expected " + kAgentSchema);
    }
    const json& c = field(doc, "config", "root");
    SacConfig cfg;
    cfg.gamma = finite_number(field(c, "gamma", "config"), "config.gamma");
    cfg.tau = finite_number(field(c, "tau", "config"), "config.tau");
    cfg.learning_rate = finite_number(field(c, "learning_rate", "config"), "config.learning_rate");
    cfg.batch_size = field(c, "batch_size", "config").get<int>();
    cfg.hidden = field(c, "hidden", "config").get<int>();
    cfg.target_entropy = finite_number(field(c, "target_entropy", "config"), "config.target_entropy");
    cfg.initial_log_alpha =
        finite_number(field(c, "initial_log_alpha", "config"), "config.initial_log_alpha");
    cfg.log_std.min = finite_number(field(c, "log_std_min", "config"), "config.log_std_min");
    cfg.log_std.max = finite_number(field(c, "log_std_max", "config"), "config.log_std_max");
    cfg.output_init_scale =
        finite_number(field(c, "output_init_scale", "config"), "config.output_init_scale");
    const json& scale = field(c, "state_scale", "config");
    if (!scale.is_array() || scale.size() != cfg.state_scale.size()) fail("config.state_scale: expected 8 entries");
    for (std::size_t i = 0; i < cfg.state_scale.size(); ++i) {
      cfg.state_scale[i] = finite_number(scale[i], "config.state_scale");
    }
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }

    SacAgent agent(cfg, 0);
    agent.set_log_alpha(finite_number(field(doc, "log_alpha", "root"), "log_alpha"));
    agent.set_update_count(field(doc, "update_count", "root").get<long long>());
    const json& nets = field(doc, "networks", "root");
    for (int i = 0; i < 5; ++i) {
      MlpNetwork& net = network(agent, i);
      net.parameters() = layers_from_json(net, field(nets, kNetworkNames[i], "networks"),
                                          kNetworkNames[i]);
    }
    if (doc.contains("optimizer")) {
      const json& opt = doc["optimizer"];
      for (int i = 0; i < 4; ++i) {
        const std::string where = std::string("optimizer.") + kNetworkNames[i];
        const json& g = field(opt, kNetworkNames[i], "optimizer");
        AdamState& s = *adam_group(agent, i);
        s.step = field(g, "step", where).get<long long>();
        s.m = layers_from_json(network(agent, i), field(g, "m", where), where + ".m");
        s.v = layers_from_json(network(agent, i), field(g, "v", where), where + ".v");
      }
      const json& la = field(opt, "log_alpha", "optimizer");
      AdamState& s = agent.optimizer().log_alpha;
      s.step = field(la, "step", "optimizer.log_alpha").get<long long>();
      s.m(0) = finite_number(field(la, "m", "optimizer.log_alpha"), "optimizer.log_alpha.m");
      s.v(0) = finite_number(field(la, "v", "optimizer.log_alpha"), "optimizer.log_alpha.v");
    }
    return agent;
  } catch (const json::exception& e) {
    fail(std::string("schema error: ") + e.what());
  }
}

void save_agent(const SacAgent& agent, const std::filesystem::path& path, bool include_optimizer) {
  const std::string text = serialize_agent(agent, include_optimizer);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail("write failed for " + path.string());
}

SacAgent load_agent(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_agent(ss.str());
}

}  // namespace comaze
