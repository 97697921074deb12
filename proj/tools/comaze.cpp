// comaze: train, evaluate and compare tilt-maze co-learning agents.
//
//   comaze train --config run.json --seed 3 --out runs/s3
//   comaze fingerprint --out fp models/*.json
//   comaze compare --out cmp fp/fingerprints/*.fp
//
// COMAZE_LOG sets verbosity (trace, debug, info, warn, error, off).

#include "comaze/app.hpp"
#include "comaze/live_service.hpp"
#include "comaze/model_document.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <optional>

namespace {

namespace fs = std::filesystem;
using comaze::AppConfig;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> port;
  std::optional<std::string> partner;
};

void set_log_level() {
  const char* env = std::getenv("COMAZE_LOG");
  if (env == nullptr || *env == '\0') return;
  const auto level = spdlog::level::from_str(env);
  if (level == spdlog::level::off && std::string(env) != "off") {
    spdlog::warn("COMAZE_LOG: unknown level '{}', keeping info", env);
    return;
  }
  spdlog::set_level(level);
}

AppConfig resolve(const CommonOptions& o) {
  AppConfig cfg = o.config.empty() ? AppConfig{} : comaze::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.port) cfg.service.port = *o.port;
  if (o.partner) {
    try {
      cfg.partner.kind = comaze::partner_kind_from_string(*o.partner);
    } catch (const std::exception&) {
      throw comaze::ConfigError("--partner: unknown partner kind '" + *o.partner + "'");
    }
  }
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config, "JSON config file");
  sub->add_option("--seed", o.seed, "Run seed (overrides the config)");
  sub->add_option("--out", o.out, "Output directory (overrides the config)");
  sub->add_option("--port", o.port, "WebSocket port for live play")->check(CLI::Range(0, 65535));
  sub->add_option("--partner", o.partner, "Partner kind: live, oracle, noisy, lazy, null");
}

void print_curve(const comaze::LearningCurve& curve) {
  for (std::size_t b = 0; b < curve.block_successes.size(); ++b) {
    std::cout << "block " << b + 1 << ": " << curve.block_successes[b] << '/' << curve.trials_per_block
              << " successes\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  set_log_level();
  CLI::App cli{"Collaborative tilt-maze: co-learning agents and partner fingerprints"};
  cli.require_subcommand(1);

  CommonOptions common;
  std::vector<std::string> own_models;
  std::vector<std::string> foreign_models;
  std::vector<std::string> inputs;
  std::string trial_log;
  double speed = 1.0;

  auto* train = cli.add_subcommand("train", "Co-learning session: 80 trials with trial-end updates");
  auto* serve = cli.add_subcommand("serve", "Co-learning session with a live player over WebSocket");
  auto* premodel = cli.add_subcommand("premodel", "Expert-partner trials plus offline updates");
  auto* evaluate = cli.add_subcommand("evaluate", "Frozen test rotation: own, foreign..., own");
  auto* prelim = cli.add_subcommand("preliminary", "Frame-wise learning with offline phases");
  auto* fingerprint = cli.add_subcommand("fingerprint", "Deterministic actions over the state grid");
  auto* compare = cli.add_subcommand("compare", "Correlation matrix and spatial maps of fingerprints");
  auto* replay = cli.add_subcommand("replay", "Stream a trial log to a UI client");
  for (auto* sub : {train, serve, premodel, evaluate, prelim, fingerprint, compare, replay}) {
    add_common(sub, common);
  }
  evaluate->add_option("--own", own_models, "Own model (overrides the config)")->expected(1);
  evaluate->add_option("--foreign", foreign_models, "Foreign model, repeatable (overrides the config)");
  fingerprint->add_option("models", inputs, "Model documents")->required();
  compare->add_option("fingerprints", inputs, "Fingerprint files")->required();
  replay->add_option("trial_log", trial_log, "trials.jsonl to play back")->required();
  replay->add_option("--speed", speed, "Playback speed factor")->check(CLI::PositiveNumber);

  CLI11_PARSE(cli, argc, argv);

  try {
    AppConfig cfg = resolve(common);
    if (*train || *serve) {
      if (*serve) cfg.partner.kind = comaze::PartnerKind::live;
      const auto result = comaze::app::train(cfg);
      print_curve(result.curve);
      std::cout << "artifacts in " << cfg.output_dir << '\n';
    } else if (*premodel) {
      const auto result = comaze::app::premodel(cfg);
      int successes = 0;
      for (const auto& t : result.trials) successes += t.success ? 1 : 0;
      std::cout << "pre-model: " << successes << '/' << result.trials.size() << " expert trials, "
                << result.buffer_size << " transitions, " << cfg.session.premodel_offline_updates
                << " offline updates\n";
    } else if (*evaluate) {
      if (!own_models.empty()) cfg.evaluation.own_model = own_models.front();
      if (!foreign_models.empty()) cfg.evaluation.foreign_models = foreign_models;
      const auto report = comaze::app::evaluate(cfg);
      for (const auto& b : report.blocks) {
        std::cout << b.agent << ": mean " << b.mean_score() << ", " << b.successes() << '/' << b.trials.size()
                  << " successes\n";
      }
    } else if (*prelim) {
      const auto result = comaze::app::preliminary(cfg);
      for (const auto& p : result.curve) {
        std::cout << "phase " << p.phase << ": " << p.frames << " frames, mean test score " << p.mean_score
                  << '\n';
      }
    } else if (*fingerprint) {
      std::vector<fs::path> models(inputs.begin(), inputs.end());
      for (const auto& p : comaze::app::fingerprint(cfg, models)) std::cout << p.string() << '\n';
    } else if (*compare) {
      std::vector<fs::path> prints(inputs.begin(), inputs.end());
      const auto m = comaze::app::compare(cfg, prints);
      for (std::size_t i = 0; i < m.tags.size(); ++i) {
        std::cout << m.tags[i];
        for (double v : m.values[i]) std::cout << ' ' << v;
        std::cout << '\n';
      }
    } else if (*replay) {
      comaze::app::replay(cfg, trial_log, speed);
    }
  } catch (const comaze::ConfigError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const comaze::ServiceTimeout& e) {
    spdlog::error("timeout: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
