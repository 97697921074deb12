#pragma once

#include "comaze/config.hpp"
#include "comaze/fingerprint.hpp"
#include "comaze/session.hpp"

#include <filesystem>
#include <string>
#include <vector>

// Command implementations behind the comaze CLI. Each run writes into
// cfg.output_dir: config.json (the resolved config, enough to reproduce the
// run), the artifacts listed per command, and nothing at all when the inputs
// are rejected up front.
namespace comaze::app {

// Independent, reproducible RNG streams derived from the run seed.
enum class Stream : std::uint64_t { agent_init = 1, session = 2, evaluation = 3 };
Rng make_rng(const AppConfig& cfg, Stream stream);

// Fresh agent from the seed, or the configured seed model.
SacAgent initial_agent(const AppConfig& cfg);

// model.json, trials.jsonl, training_log.csv, learning_curve.csv.
// A live partner starts the WebSocket service and paces in real time.
ColearningResult train(const AppConfig& cfg);

// model.json, trials.jsonl, training_log.csv.
PremodelResult premodel(const AppConfig& cfg);

// evaluation.csv (one row per block, one column per trial score) and
// trials.jsonl. Own model first and last, foreign models in between.
EvaluationReport evaluate(const AppConfig& cfg);

// model.json, trials.jsonl, training_log.csv, preliminary_curve.csv.
PreliminaryResult preliminary(const AppConfig& cfg);

// fingerprints/<model stem>.fp for each model.
std::vector<std::filesystem::path> fingerprint(const AppConfig& cfg,
                                               const std::vector<std::filesystem::path>& models);

// correlation_matrix.csv plus spatial/<a>__<b>.csv and .ppm for every pair.
CorrelationMatrix compare(const AppConfig& cfg, const std::vector<std::filesystem::path>& fingerprints);

// Streams a trial log to the first client that connects.
void replay(const AppConfig& cfg, const std::filesystem::path& trial_log, double speed);

// Heat map of a spatial correlation map, -1 blue .. 0 white .. +1 red,
// empty cells grey; each cell drawn as a cell_px square, +y up.
void write_spatial_ppm(const SpatialCorrelationMap& map, const std::filesystem::path& path, int cell_px = 32);
void write_spatial_csv(const SpatialCorrelationMap& map, const std::filesystem::path& path);
void write_correlation_csv(const CorrelationMatrix& m, const std::filesystem::path& path);

}  // namespace comaze::app
