#include "comaze/session.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <thread>

namespace comaze {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr double kGoalReward = 10.0;
constexpr double kStepReward = -1.0;

struct TrialOptions {
  bool train = false;
  int max_frames = 0;
};

// Shared frame loop. choose_action returns the agent action for an
// observation; on_transition sees every step (training only).
template <typename ChooseAction, typename OnTransition>
TrialRecord play(const std::string& agent_tag, const Partner& partner, const TrialContext& ctx,
                 std::int64_t trial_index, const TrialOptions& opt, Rng& rng,
                 ChooseAction&& choose_action, OnTransition&& on_transition) {
  TrialRecord rec;
  rec.trial_index = trial_index;
  rec.spawn_corner = spawn_corner_index(trial_index);
  rec.partner = partner.identity();
  rec.agent = agent_tag;
  rec.train = opt.train;

  TrayState s = reset_tray(trial_index, ctx.geometry);
  if (ctx.observer) ctx.observer->on_trial_start(trial_index, s);

  const auto frame_period = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(ctx.session.frame_duration));
  const auto t0 = Clock::now();

  const int limit = std::min(ctx.session.frames_per_trial, opt.max_frames);
  for (int f = 0; f < limit; ++f) {
    if (ctx.observer && ctx.observer->abort_requested()) {
      rec.aborted = true;
      break;
    }
    double a_partner = 0.0;
    try {
      a_partner = partner.act(s, rng);
    } catch (const PartnerUnavailable& e) {
      spdlog::warn("trial {}: partner unavailable ({}), aborting", trial_index, e.what());
      rec.aborted = true;
      break;
    }
    const Observation obs = s.observation();
    const double a_agent = choose_action(obs);
    const FrameResult step = step_frame(s, a_agent, a_partner, ctx.physics, ctx.geometry);
    const double r = reward(step.events);
    rec.frames.push_back({obs, a_agent, a_partner, r});
    on_transition(Transition{obs, a_agent, r, step.state.observation(), step.events.goal_reached});
    s = step.state;
    rec.frames_used = f + 1;

    if (ctx.session.realtime) std::this_thread::sleep_until(t0 + (f + 1) * frame_period);
    if (ctx.observer) {
      ctx.observer->on_frame(trial_index, f + 1, s, ctx.session.frames_per_trial - rec.frames_used);
    }
    if (s.captured) break;
  }

  rec.final_state = s.observation();
  rec.success = s.captured && !rec.aborted;
  rec.score = rec.aborted ? 0 : trial_score(rec.success, rec.frames_used, ctx.session.frames_per_trial);
  return rec;
}

void run_updates(SacAgent& agent, const ReplayBuffer& buffer, int count, Rng& rng,
                 const LossSink& sink) {
  for (int i = 0; i < count; ++i) {
    const LossReport r = agent.gradient_update(buffer, rng);
    if (sink) sink(agent.update_count(), r);
  }
}

TrialRecord run_training_trial(SacAgent& agent, const std::string& agent_tag,
                               const Partner& partner, const TrialContext& ctx,
                               std::int64_t trial_index, int max_frames, ReplayBuffer& buffer,
                               Rng& rng) {
  const bool frame_wise = ctx.session.mode == UpdateMode::frame_wise;
  TrialRecord rec = play(
      agent_tag, partner, ctx, trial_index, {true, max_frames}, rng,
      [&](const Observation& obs) { return agent.act_stochastic(obs, rng).action; },
      [&](const Transition& t) {
        buffer.push(t);
        if (frame_wise) run_updates(agent, buffer, 1, rng, ctx.loss_sink);
      });
  // The end cue goes out before the trial-end updates so the player hears it on time.
  if (ctx.observer) ctx.observer->on_trial_end(rec);
  if (!frame_wise) run_updates(agent, buffer, ctx.session.updates_per_trial_end, rng, ctx.loss_sink);
  return rec;
}

std::vector<TrialRecord> run_test_block(const SacAgent& agent, const std::string& tag,
                                        const Partner& partner, const TrialContext& ctx,
                                        int trials, std::int64_t first_index, Rng& rng) {
  std::vector<TrialRecord> out;
  for (int i = 0; i < trials; ++i) {
    out.push_back(run_test_trial(agent, tag, partner, ctx, first_index + i, rng));
  }
  return out;
}

}  // namespace

void SessionConfig::validate() const {
  if (frames_per_trial <= 0 || trials_per_block <= 0 || blocks <= 0 || buffer_trials <= 0) {
    throw std::invalid_argument("session: counts must be positive");
  }
  if (updates_per_trial_end < 0 || test_trials < 0 || premodel_trials < 0 ||
      premodel_offline_updates < 0) {
    throw std::invalid_argument("session: update and trial counts must be non-negative");
  }
  if (!(frame_duration > 0.0)) throw std::invalid_argument("session: frame_duration must be positive");
  for (const auto& p : offline_update_schedule) {
    if (p.play_frames <= 0 || p.offline_updates < 0) {
      throw std::invalid_argument("session: offline schedule entries out of range");
    }
  }
}

double reward(const FrameEvents& events) { return events.goal_reached ? kGoalReward : kStepReward; }

int trial_score(bool success, int frames_used, int frames_per_trial) {
  return success ? frames_per_trial - frames_used : 0;
}

TrialRecord run_trial(SacAgent& agent, const std::string& agent_tag, const Partner& partner,
                      const TrialContext& ctx, std::int64_t trial_index, bool train,
                      ReplayBuffer& buffer, Rng& rng) {
  if (!train) return run_test_trial(agent, agent_tag, partner, ctx, trial_index, rng);
  return run_training_trial(agent, agent_tag, partner, ctx, trial_index,
                            ctx.session.frames_per_trial, buffer, rng);
}

TrialRecord run_test_trial(const SacAgent& agent, const std::string& agent_tag,
                           const Partner& partner, const TrialContext& ctx,
                           std::int64_t trial_index, Rng& rng) {
  TrialRecord rec = play(
      agent_tag, partner, ctx, trial_index, {false, ctx.session.frames_per_trial}, rng,
      [&](const Observation& obs) { return agent.act_deterministic(obs); },
      [](const Transition&) {});
  if (ctx.observer) ctx.observer->on_trial_end(rec);
  return rec;
}

ColearningResult run_colearning_session(SacAgent& agent, const std::string& agent_tag,
                                        const Partner& partner, const TrialContext& ctx,
                                        Rng& rng) {
  if (ctx.session.mode != UpdateMode::trial_wise) {
    throw std::invalid_argument("co-learning session requires trial_wise updates");
  }
  ReplayBuffer buffer(ctx.session.buffer_capacity());
  ColearningResult out;
  out.curve.trials_per_block = ctx.session.trials_per_block;
  for (int block = 0; block < ctx.session.blocks; ++block) {
    int successes = 0;
    for (int t = 0; t < ctx.session.trials_per_block; ++t) {
      const std::int64_t index = static_cast<std::int64_t>(block) * ctx.session.trials_per_block + t;
      TrialRecord rec = run_training_trial(agent, agent_tag, partner, ctx, index,
                                           ctx.session.frames_per_trial, buffer, rng);
      successes += rec.success ? 1 : 0;
      out.trials.push_back(std::move(rec));
    }
    out.curve.block_successes.push_back(successes);
    spdlog::info("block {}: {}/{} successes", block + 1, successes, ctx.session.trials_per_block);
    if (ctx.observer) ctx.observer->on_block_end(block, out.curve);
  }
  out.final_buffer_size = buffer.size();
  return out;
}

PremodelResult make_premodel(SacAgent& agent, const Partner& expert, const TrialContext& ctx,
                             Rng& rng) {
  SessionConfig cfg = ctx.session;
  cfg.mode = UpdateMode::trial_wise;
  if (!cfg.premodel_online_updates) cfg.updates_per_trial_end = 0;
  TrialContext inner{ctx.physics, ctx.geometry, cfg, ctx.observer, ctx.loss_sink};

  ReplayBuffer buffer(ReplayBuffer::kUnlimited);
  PremodelResult out;
  for (int t = 0; t < cfg.premodel_trials; ++t) {
    out.trials.push_back(
        run_training_trial(agent, "premodel", expert, inner, t, cfg.frames_per_trial, buffer, rng));
  }
  run_updates(agent, buffer, cfg.premodel_offline_updates, rng, ctx.loss_sink);
  out.buffer_size = buffer.size();
  return out;
}

double EvaluationBlock::mean_score() const {
  if (trials.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : trials) sum += t.score;
  return sum / static_cast<double>(trials.size());
}

int EvaluationBlock::successes() const {
  int n = 0;
  for (const auto& t : trials) n += t.success ? 1 : 0;
  return n;
}

EvaluationReport run_evaluation_rotation(const Partner& subject, const NamedAgent& own,
                                         const std::vector<NamedAgent>& foreign,
                                         const TrialContext& ctx, Rng& rng) {
  std::vector<NamedAgent> order;
  order.push_back(own);
  order.insert(order.end(), foreign.begin(), foreign.end());
  order.push_back(own);

  EvaluationReport report;
  report.partner = subject.identity();
  std::int64_t index = 0;
  for (const NamedAgent& a : order) {
    if (a.agent == nullptr) throw std::invalid_argument("evaluation: missing agent " + a.tag);
    EvaluationBlock block{a.tag, run_test_block(*a.agent, a.tag, subject, ctx,
                                                ctx.session.test_trials, index, rng)};
    index += ctx.session.test_trials;
    report.blocks.push_back(std::move(block));
  }
  return report;
}

PreliminaryResult run_preliminary_schedule(SacAgent& agent, const std::string& agent_tag,
                                           const Partner& partner, const TrialContext& ctx,
                                           Rng& rng) {
  if (ctx.session.mode != UpdateMode::frame_wise) {
    throw std::invalid_argument("preliminary schedule requires frame_wise updates");
  }
  ReplayBuffer buffer(ReplayBuffer::kUnlimited);
  PreliminaryResult out;
  std::int64_t trial_index = 0;
  long long frames = 0;
  long long online = 0;
  long long offline = 0;
  int phase = 0;
  for (const OfflinePhase& p : ctx.session.offline_update_schedule) {
    int remaining = p.play_frames;
    while (remaining > 0) {
      const long long before = agent.update_count();
      TrialRecord rec = run_training_trial(agent, agent_tag, partner, ctx, trial_index++, remaining,
                                           buffer, rng);
      remaining -= rec.frames_used;
      frames += rec.frames_used;
      online += agent.update_count() - before;
      out.trials.push_back(std::move(rec));
    }
    run_updates(agent, buffer, p.offline_updates, rng, ctx.loss_sink);
    offline += p.offline_updates;

    EvaluationBlock test{agent_tag, run_test_block(agent, agent_tag, partner, ctx,
                                                   ctx.session.test_trials, 0, rng)};
    out.curve.push_back({++phase, frames, online, offline, test.mean_score(), test.successes()});
    spdlog::info("preliminary phase {}: frames {} mean test score {:.1f}", phase, frames,
                 test.mean_score());
  }
  out.buffer_size = buffer.size();
  return out;
}

std::string trial_to_json_line(const TrialRecord& r) {
  json frames = json::array();
  for (const FrameLog& f : r.frames) {
    json row = json::array();
    for (double v : f.state) row.push_back(v);
    row.push_back(f.agent_action);
    row.push_back(f.partner_action);
    row.push_back(f.reward);
    frames.push_back(std::move(row));
  }
  json j = {{"schema", kTrialSchema},  {"trial", r.trial_index},   {"corner", r.spawn_corner},
            {"partner", r.partner},    {"agent", r.agent},         {"train", r.train},
            {"success", r.success},    {"aborted", r.aborted},     {"frames_used", r.frames_used},
            {"score", r.score},        {"final_state", r.final_state}, {"frames", frames}};
  return j.dump();
}

TrialRecord trial_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  if (j.value("schema", std::string{}) != kTrialSchema) {
    throw std::runtime_error("trial log: unsupported schema");
  }
  TrialRecord r;
  r.trial_index = j.at("trial").get<std::int64_t>();
  r.spawn_corner = j.at("corner").get<int>();
  r.partner = j.at("partner").get<std::string>();
  r.agent = j.at("agent").get<std::string>();
  r.train = j.at("train").get<bool>();
  r.success = j.at("success").get<bool>();
  r.aborted = j.at("aborted").get<bool>();
  r.frames_used = j.at("frames_used").get<int>();
  r.score = j.at("score").get<int>();
  r.final_state = j.at("final_state").get<Observation>();
  for (const json& row : j.at("frames")) {
    if (!row.is_array() || row.size() != 11) throw std::runtime_error("trial log: bad frame row");
    FrameLog f;
    for (std::size_t i = 0; i < 8; ++i) f.state[i] = row[i].get<double>();
    f.agent_action = row[8].get<double>();
    f.partner_action = row[9].get<double>();
    f.reward = row[10].get<double>();
    r.frames.push_back(f);
  }
  return r;
}

std::vector<TrialRecord> read_trial_log(std::istream& in) {
  std::vector<TrialRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(trial_from_json_line(line));
  }
  return out;
}

void write_learning_curve_csv(std::ostream& out, const LearningCurve& curve) {
  out << "block,successes,trials\n";
  for (std::size_t b = 0; b < curve.block_successes.size(); ++b) {
    out << b + 1 << ',' << curve.block_successes[b] << ',' << curve.trials_per_block << '\n';
  }
}

void write_evaluation_csv(std::ostream& out, const EvaluationReport& report) {
  // One row per block; the score columns follow the longest block.
  std::size_t width = 0;
  for (const auto& block : report.blocks) width = std::max(width, block.trials.size());
  out << "block,agent,partner";
  for (std::size_t t = 1; t <= width; ++t) out << ",score_" << t;
  out << ",mean,successes\n";
  for (std::size_t b = 0; b < report.blocks.size(); ++b) {
    const auto& block = report.blocks[b];
    out << b + 1 << ',' << block.agent << ',' << report.partner;
    for (std::size_t t = 0; t < width; ++t) {
      out << ',';
      if (t < block.trials.size()) out << block.trials[t].score;
    }
    out << ',' << block.mean_score() << ',' << block.successes() << '\n';
  }
}

void write_preliminary_csv(std::ostream& out, const std::vector<PreliminaryPoint>& curve) {
  out << "phase,frames,online_updates,offline_updates,mean_score,successes\n";
  for (const auto& p : curve) {
    out << p.phase << ',' << p.frames << ',' << p.online_updates << ',' << p.offline_updates << ','
        << p.mean_score << ',' << p.successes << '\n';
  }
}

void write_loss_header(std::ostream& out) {
  out << "update,q1_loss,q2_loss,v_loss,actor_loss,alpha_loss,entropy,alpha\n";
}

void write_loss_row(std::ostream& out, long long update_index, const LossReport& r) {
  out << update_index << ',' << r.q1_loss << ',' << r.q2_loss << ',' << r.v_loss << ','
      << r.actor_loss << ',' << r.alpha_loss << ',' << r.entropy_estimate << ',' << r.alpha << '\n';
}

}  // namespace comaze
