#pragma once

#include "comaze/partner.hpp"
#include "comaze/session.hpp"
#include "comaze/wire.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace comaze {

class ServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// WebSocket endpoint for the browser client. Runs its own I/O thread; the
// session loop only ever posts outbound messages and reads the mailbox, so a
// slow or stalled client cannot hold up a frame.
//
// The first client to connect while the seat is free is the player; everyone
// else is a read-only spectator. Player commands land in the mailbox,
// spectator commands are dropped and logged, malformed frames likewise.
class LiveService {
 public:
  struct Stats {
    std::uint64_t accepted = 0;
    std::uint64_t malformed = 0;
    std::uint64_t spectator_commands = 0;
    std::uint64_t commands = 0;
    std::uint64_t coalesced = 0;
  };

  // port 0 picks a free port. Throws ServiceError if the port cannot be bound.
  LiveService(CommandMailbox& mailbox, const std::string& bind_address, unsigned short port);
  ~LiveService();
  LiveService(const LiveService&) = delete;
  LiveService& operator=(const LiveService&) = delete;

  unsigned short port() const;

  // Thread-safe, never blocks on the network. Consecutive unsent state
  // messages collapse to the latest one per connection.
  void broadcast(nlohmann::json body);

  bool player_connected() const;
  // Bumped every time a player takes the seat; lets callers notice a
  // disconnect/reconnect between two polls.
  std::uint64_t player_generation() const;
  bool wait_for_player(std::chrono::duration<double> timeout);
  std::size_t client_count() const;

  // Control messages from the player, oldest first.
  std::vector<ControlAction> take_controls();
  // Blocks until a control message arrives, the player leaves, or timeout.
  bool wait_for_control(std::chrono::duration<double> timeout);

  Stats stats() const;

  struct Impl;  // shared with the per-connection handlers

 private:
  std::shared_ptr<Impl> impl_;
};

class ServiceTimeout : public ServiceError {
 public:
  using ServiceError::ServiceError;
};

// Bridges session events to the wire. Before each trial it waits (up to the
// client timeout) for a connected, un-paused player; a disconnect during a
// trial aborts it, an abort control likewise. pause holds the session before
// the next trial until start arrives.
class LiveObserver : public SessionObserver {
 public:
  LiveObserver(LiveService& service, double client_timeout_s);

  void on_trial_start(std::int64_t trial_index, const TrayState& s) override;
  void on_frame(std::int64_t trial_index, int frame, const TrayState& s, int score_so_far) override;
  void on_trial_end(const TrialRecord& record) override;
  void on_block_end(int block, const LearningCurve& curve) override;
  bool abort_requested() override;

  bool paused() const { return paused_; }

 private:
  void drain_controls();

  LiveService& service_;
  double timeout_s_;
  bool paused_ = false;
  bool abort_ = false;
  std::uint64_t generation_ = 0;
};

// Streams recorded trials through the wire protocol at the given frame
// period, exactly as a live session would have sent them.
void replay_trials(LiveService& service, const std::vector<TrialRecord>& trials,
                   double frame_period_s, int frames_per_trial);

}  // namespace comaze
