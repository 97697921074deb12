#include "comaze/app.hpp"

#include "comaze/live_service.hpp"
#include "comaze/model_document.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <random>

namespace comaze::app {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Creates the output directory and writes the config snapshot. Called only
// after every input has been checked.
fs::path prepare_output(const AppConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  open_out(dir / "config.json") << to_json(cfg).dump(2) << '\n';
  return dir;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("no ") + what + " given");
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

void write_trials(const fs::path& path, const std::vector<TrialRecord>& trials) {
  auto out = open_out(path);
  for (const auto& t : trials) out << trial_to_json_line(t) << '\n';
}

struct LossLog {
  explicit LossLog(const fs::path& path) : out(open_out(path)) {
    out << std::setprecision(9);
    write_loss_header(out);
  }
  LossSink sink() {
    return [this](long long i, const LossReport& r) { write_loss_row(out, i, r); };
  }
  std::ofstream out;
};

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

// Scripted partners run headless; a live one needs the service.
struct PartnerHost {
  PartnerHost(const AppConfig& cfg) : mailbox(cfg.physics.max_tilt) {
    if (cfg.partner.kind == PartnerKind::live) {
      service = std::make_unique<LiveService>(mailbox, cfg.service.bind_address,
                                              static_cast<unsigned short>(cfg.service.port));
      observer = std::make_unique<LiveObserver>(*service, cfg.service.client_timeout_s);
      spdlog::info("waiting up to {:.0f} s for a player on port {}", cfg.service.client_timeout_s,
                   service->port());
      if (!service->wait_for_player(std::chrono::duration<double>(cfg.service.client_timeout_s))) {
        throw ServiceTimeout("no client connected within " + std::to_string(cfg.service.client_timeout_s) + " s");
      }
    }
    partner = std::make_unique<Partner>(cfg.partner, cfg.geometry, &mailbox);
  }

  CommandMailbox mailbox;
  std::unique_ptr<LiveService> service;
  std::unique_ptr<LiveObserver> observer;
  std::unique_ptr<Partner> partner;
};

SessionConfig session_for(const AppConfig& cfg) {
  SessionConfig s = cfg.session;
  // A human partner can only play in real time.
  if (cfg.partner.kind == PartnerKind::live) s.realtime = true;
  return s;
}

}  // namespace

Rng make_rng(const AppConfig& cfg, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(cfg.partner.seed), static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

SacAgent initial_agent(const AppConfig& cfg) {
  if (!cfg.seed_model.empty()) return load_agent(cfg.seed_model);
  Rng init = make_rng(cfg, Stream::agent_init);
  return SacAgent(cfg.agent, init());
}

ColearningResult train(const AppConfig& cfg) {
  if (!cfg.seed_model.empty()) require_file(cfg.seed_model, "seed model");
  SacAgent agent = initial_agent(cfg);
  PartnerHost host(cfg);
  const fs::path dir = prepare_output(cfg);
  const SessionConfig session = session_for(cfg);
  LossLog log(dir / "training_log.csv");
  TrialContext ctx{cfg.physics, cfg.geometry, session, host.observer.get(), log.sink()};
  Rng rng = make_rng(cfg, Stream::session);
  ColearningResult result = run_colearning_session(agent, "agent", *host.partner, ctx, rng);
  save_agent(agent, dir / "model.json");
  write_trials(dir / "trials.jsonl", result.trials);
  auto curve = open_out(dir / "learning_curve.csv");
  write_learning_curve_csv(curve, result.curve);
  return result;
}

PremodelResult premodel(const AppConfig& cfg) {
  if (cfg.partner.kind == PartnerKind::live) throw ConfigError("premodel needs a scripted expert partner");
  SacAgent agent = initial_agent(cfg);
  const fs::path dir = prepare_output(cfg);
  LossLog log(dir / "training_log.csv");
  TrialContext ctx{cfg.physics, cfg.geometry, cfg.session, nullptr, log.sink()};
  const Partner expert(cfg.partner, cfg.geometry);
  Rng rng = make_rng(cfg, Stream::session);
  PremodelResult result = make_premodel(agent, expert, ctx, rng);
  save_agent(agent, dir / "model.json");
  write_trials(dir / "trials.jsonl", result.trials);
  return result;
}

EvaluationReport evaluate(const AppConfig& cfg) {
  require_file(cfg.evaluation.own_model, "own model");
  for (const auto& m : cfg.evaluation.foreign_models) require_file(m, "foreign model");
  const SacAgent own = load_agent(cfg.evaluation.own_model);
  std::vector<SacAgent> foreign;
  foreign.reserve(cfg.evaluation.foreign_models.size());
  for (const auto& m : cfg.evaluation.foreign_models) foreign.push_back(load_agent(m));

  PartnerHost host(cfg);
  const fs::path dir = prepare_output(cfg);
  const SessionConfig session = session_for(cfg);
  TrialContext ctx{cfg.physics, cfg.geometry, session, host.observer.get(), {}};
  std::vector<NamedAgent> named;
  for (std::size_t i = 0; i < foreign.size(); ++i) {
    named.push_back({stem_of(cfg.evaluation.foreign_models[i]), &foreign[i]});
  }
  Rng rng = make_rng(cfg, Stream::evaluation);
  EvaluationReport report =
      run_evaluation_rotation(*host.partner, {stem_of(cfg.evaluation.own_model), &own}, named, ctx, rng);

  auto out = open_out(dir / "evaluation.csv");
  write_evaluation_csv(out, report);
  std::vector<TrialRecord> all;
  for (const auto& block : report.blocks) all.insert(all.end(), block.trials.begin(), block.trials.end());
  write_trials(dir / "trials.jsonl", all);
  return report;
}

PreliminaryResult preliminary(const AppConfig& cfg) {
  if (cfg.partner.kind == PartnerKind::live) throw ConfigError("preliminary runs need a scripted partner");
  if (!cfg.seed_model.empty()) require_file(cfg.seed_model, "seed model");
  SacAgent agent = initial_agent(cfg);
  const fs::path dir = prepare_output(cfg);
  SessionConfig session = cfg.session;
  session.mode = UpdateMode::frame_wise;
  LossLog log(dir / "training_log.csv");
  TrialContext ctx{cfg.physics, cfg.geometry, session, nullptr, log.sink()};
  const Partner partner(cfg.partner, cfg.geometry);
  Rng rng = make_rng(cfg, Stream::session);
  PreliminaryResult result = run_preliminary_schedule(agent, "agent", partner, ctx, rng);
  save_agent(agent, dir / "model.json");
  write_trials(dir / "trials.jsonl", result.trials);
  auto curve = open_out(dir / "preliminary_curve.csv");
  write_preliminary_csv(curve, result.curve);
  return result;
}

std::vector<fs::path> fingerprint(const AppConfig& cfg, const std::vector<fs::path>& models) {
  if (models.empty()) throw ConfigError("fingerprint: no model files given");
  for (const auto& m : models) require_file(m.string(), "model");
  std::vector<SacAgent> agents;
  for (const auto& m : models) agents.push_back(load_agent(m));
  const fs::path dir = prepare_output(cfg) / "fingerprints";
  fs::create_directories(dir);
  const FingerprintGrid grid;
  std::vector<fs::path> out;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Fingerprint f = compute_fingerprint(agents[i], models[i].stem().string(), grid, cfg.fingerprint_workers);
    const fs::path path = dir / (models[i].stem().string() + ".fp");
    save_fingerprint(f, path);
    spdlog::info("fingerprint {} ({} states) in {:.1f} s", path.string(), f.actions.size(),
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    out.push_back(path);
  }
  return out;
}

CorrelationMatrix compare(const AppConfig& cfg, const std::vector<fs::path>& paths) {
  if (paths.empty()) throw ConfigError("compare: no fingerprint files given");
  std::vector<Fingerprint> prints;
  for (const auto& p : paths) {
    require_file(p.string(), "fingerprint");
    prints.push_back(load_fingerprint(p));
  }
  for (const auto& f : prints) {
    if (f.grid_hash != prints.front().grid_hash) {
      throw FingerprintError("grid hash mismatch: " + prints.front().tag + " has " + prints.front().grid_hash +
                             ", " + f.tag + " has " + f.grid_hash);
    }
  }
  CorrelationMatrix m;
  if (prints.size() == 1) {
    correlate(prints[0], prints[0]);  // rejects a constant fingerprint
    m.tags = {prints[0].tag};
    m.values = {{1.0}};
  } else {
    m = correlation_matrix(prints);
  }

  const FingerprintGrid grid;
  const fs::path dir = prepare_output(cfg);
  write_correlation_csv(m, dir / "correlation_matrix.csv");
  if (prints.front().grid_hash != grid.hash_hex()) {
    spdlog::warn("fingerprints use a non-default grid; spatial maps skipped");
    return m;
  }
  fs::create_directories(dir / "spatial");
  for (std::size_t i = 0; i < prints.size(); ++i) {
    for (std::size_t j = i + 1; j < prints.size(); ++j) {
      const SpatialCorrelationMap map = spatial_map(prints[i], prints[j], grid);
      const std::string name = prints[i].tag + "__" + prints[j].tag;
      write_spatial_csv(map, dir / "spatial" / (name + ".csv"));
      write_spatial_ppm(map, dir / "spatial" / (name + ".ppm"));
    }
  }
  return m;
}

void replay(const AppConfig& cfg, const fs::path& trial_log, double speed) {
  require_file(trial_log.string(), "trial log");
  if (!(speed > 0.0)) throw ConfigError("replay: speed must be positive");
  std::ifstream in(trial_log);
  const std::vector<TrialRecord> trials = read_trial_log(in);
  CommandMailbox mailbox(cfg.physics.max_tilt);
  LiveService service(mailbox, cfg.service.bind_address, static_cast<unsigned short>(cfg.service.port));
  spdlog::info("replay: waiting for a client on port {}", service.port());
  if (!service.wait_for_player(std::chrono::duration<double>(cfg.service.client_timeout_s))) {
    throw ServiceTimeout("no client connected within " + std::to_string(cfg.service.client_timeout_s) + " s");
  }
  replay_trials(service, trials, cfg.session.frame_duration / speed, cfg.session.frames_per_trial);
}

void write_correlation_csv(const CorrelationMatrix& m, const fs::path& path) {
  auto out = open_out(path);
  out << std::setprecision(12) << "agent";
  for (const auto& t : m.tags) out << ',' << t;
  out << '\n';
  for (std::size_t i = 0; i < m.tags.size(); ++i) {
    out << m.tags[i];
    for (double v : m.values[i]) out << ',' << v;
    out << '\n';
  }
}

void write_spatial_csv(const SpatialCorrelationMap& map, const fs::path& path) {
  auto out = open_out(path);
  out << std::setprecision(12) << "x,y,correlation\n";
  for (std::size_t ix = 0; ix < map.x_values.size(); ++ix) {
    for (std::size_t iy = 0; iy < map.y_values.size(); ++iy) {
      out << map.x_values[ix] << ',' << map.y_values[iy] << ',';
      if (map.cells[ix][iy]) out << *map.cells[ix][iy];
      out << '\n';
    }
  }
}

void write_spatial_ppm(const SpatialCorrelationMap& map, const fs::path& path, int cell_px) {
  const std::size_t nx = map.x_values.size();
  const std::size_t ny = map.y_values.size();
  const std::size_t w = nx * static_cast<std::size_t>(cell_px);
  const std::size_t h = ny * static_cast<std::size_t>(cell_px);
  std::vector<unsigned char> px(w * h * 3);
  for (std::size_t row = 0; row < h; ++row) {
    const std::size_t iy = ny - 1 - row / static_cast<std::size_t>(cell_px);
    for (std::size_t col = 0; col < w; ++col) {
      const std::size_t ix = col / static_cast<std::size_t>(cell_px);
      unsigned char rgb[3] = {128, 128, 128};
      if (const auto& c = map.cells[ix][iy]) {
        const double v = std::clamp(*c, -1.0, 1.0);
        const auto fade = static_cast<unsigned char>(std::lround(255.0 * (1.0 - std::abs(v))));
        if (v >= 0) {
          rgb[0] = 255, rgb[1] = fade, rgb[2] = fade;
        } else {
          rgb[0] = fade, rgb[1] = fade, rgb[2] = 255;
        }
      }
      std::copy(rgb, rgb + 3, px.begin() + static_cast<std::ptrdiff_t>((row * w + col) * 3));
    }
  }
  auto out = open_out(path);
  out << "P6\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

}  // namespace comaze::app
