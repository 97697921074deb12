#pragma once

#include "comaze/partner.hpp"
#include "comaze/replay_buffer.hpp"
#include "comaze/sac_agent.hpp"
#include "comaze/tray_physics.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace comaze {

enum class UpdateMode { trial_wise, frame_wise };

struct OfflinePhase {
  int play_frames = 500;
  int offline_updates = 20000;
};

struct SessionConfig {
  int frames_per_trial = 200;
  double frame_duration = 0.2;
  int trials_per_block = 10;
  int blocks = 8;
  int updates_per_trial_end = 200;
  int buffer_trials = 5;
  UpdateMode mode = UpdateMode::trial_wise;
  // Preliminary schedule: play segments followed by offline updates.
  std::vector<OfflinePhase> offline_update_schedule = std::vector<OfflinePhase>(7);
  int test_trials = 10;
  bool realtime = false;
  // Pre-model recipe.
  int premodel_trials = 8;
  int premodel_offline_updates = 30000;
  bool premodel_online_updates = false;

  std::size_t buffer_capacity() const {
    return static_cast<std::size_t>(buffer_trials) * static_cast<std::size_t>(frames_per_trial);
  }
  int training_trials() const { return trials_per_block * blocks; }
  void validate() const;
};

struct FrameLog {
  Observation state{};
  double agent_action = 0.0;
  double partner_action = 0.0;
  double reward = 0.0;
};

struct TrialRecord {
  std::int64_t trial_index = 0;
  int spawn_corner = 0;
  std::string partner;
  std::string agent;
  bool train = false;
  std::vector<FrameLog> frames;
  Observation final_state{};
  bool success = false;
  bool aborted = false;
  int frames_used = 0;
  int score = 0;
};

struct LearningCurve {
  std::vector<int> block_successes;
  int trials_per_block = 10;
};

// +10 on goal capture, -1 otherwise.
double reward(const FrameEvents& events);

// Score rule: frames_per_trial - frames_used on success, 0 otherwise.
int trial_score(bool success, int frames_used, int frames_per_trial);

// Hooks for an attached UI. Called from the session thread.
class SessionObserver {
 public:
  virtual ~SessionObserver() = default;
  virtual void on_trial_start(std::int64_t /*trial_index*/, const TrayState& /*s*/) {}
  virtual void on_frame(std::int64_t /*trial_index*/, int /*frame*/, const TrayState& /*s*/,
                        int /*score_so_far*/) {}
  virtual void on_trial_end(const TrialRecord& /*record*/) {}
  virtual void on_block_end(int /*block*/, const LearningCurve& /*curve*/) {}
  // Drained once per frame; returning true aborts the running trial.
  virtual bool abort_requested() { return false; }
};

// Receives one row per gradient update.
using LossSink = std::function<void(long long update_index, const LossReport&)>;

struct TrialContext {
  const PhysicsConfig& physics;
  const TrayGeometry& geometry;
  const SessionConfig& session;
  SessionObserver* observer = nullptr;
  LossSink loss_sink;
};

// Runs one trial. With train set the agent samples stochastically, every
// transition goes to the buffer and updates follow the configured mode;
// otherwise the deterministic mean action is used and nothing is stored.
TrialRecord run_trial(SacAgent& agent, const std::string& agent_tag, const Partner& partner,
                      const TrialContext& ctx, std::int64_t trial_index, bool train,
                      ReplayBuffer& buffer, Rng& rng);

// Test-only trial against a frozen agent.
TrialRecord run_test_trial(const SacAgent& agent, const std::string& agent_tag,
                           const Partner& partner, const TrialContext& ctx,
                           std::int64_t trial_index, Rng& rng);

struct ColearningResult {
  std::vector<TrialRecord> trials;
  LearningCurve curve;
  std::size_t final_buffer_size = 0;
};

ColearningResult run_colearning_session(SacAgent& agent, const std::string& agent_tag,
                                        const Partner& partner, const TrialContext& ctx, Rng& rng);

struct PremodelResult {
  std::vector<TrialRecord> trials;
  std::size_t buffer_size = 0;
};

// Expert-partner trials into an unbounded buffer followed by offline updates.
PremodelResult make_premodel(SacAgent& agent, const Partner& expert, const TrialContext& ctx,
                             Rng& rng);

struct EvaluationBlock {
  std::string agent;
  std::vector<TrialRecord> trials;
  double mean_score() const;
  int successes() const;
};

struct EvaluationReport {
  std::string partner;
  std::vector<EvaluationBlock> blocks;
};

struct NamedAgent {
  std::string tag;
  const SacAgent* agent = nullptr;
};

// Own agent, each foreign agent in turn, own agent again; test_trials each.
EvaluationReport run_evaluation_rotation(const Partner& subject, const NamedAgent& own,
                                         const std::vector<NamedAgent>& foreign,
                                         const TrialContext& ctx, Rng& rng);

struct PreliminaryPoint {
  int phase = 0;
  long long frames = 0;
  long long online_updates = 0;
  long long offline_updates = 0;
  double mean_score = 0.0;
  int successes = 0;
};

struct PreliminaryResult {
  std::vector<PreliminaryPoint> curve;
  std::vector<TrialRecord> trials;
  std::size_t buffer_size = 0;
};

// Frame-wise online learning in play segments, each followed by an offline
// phase and a deterministic test block.
PreliminaryResult run_preliminary_schedule(SacAgent& agent, const std::string& agent_tag,
                                           const Partner& partner, const TrialContext& ctx,
                                           Rng& rng);

// Persistence. Trial logs are JSON lines with schema "co-maze-trial/v1".
inline constexpr const char* kTrialSchema = "co-maze-trial/v1";
std::string trial_to_json_line(const TrialRecord& record);
TrialRecord trial_from_json_line(const std::string& line);
std::vector<TrialRecord> read_trial_log(std::istream& in);

void write_learning_curve_csv(std::ostream& out, const LearningCurve& curve);
// Header: block,agent,partner,score_1..score_N,mean,successes; one row per block.
void write_evaluation_csv(std::ostream& out, const EvaluationReport& report);
void write_preliminary_csv(std::ostream& out, const std::vector<PreliminaryPoint>& curve);
void write_loss_header(std::ostream& out);
void write_loss_row(std::ostream& out, long long update_index, const LossReport& r);

}  // namespace comaze
