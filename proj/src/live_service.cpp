#include "comaze/live_service.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <condition_variable>
#include <deque>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

namespace comaze {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using Clock = std::chrono::steady_clock;

namespace {
// A client that stops reading is cut off once this many non-coalescable
// messages are waiting for it.
constexpr std::size_t kMaxBacklog = 4096;
}  // namespace

class Connection;

struct LiveService::Impl : std::enable_shared_from_this<LiveService::Impl> {
  Impl(CommandMailbox& mb) : mailbox(mb), acceptor(io) {}

  CommandMailbox& mailbox;
  asio::io_context io;
  tcp::acceptor acceptor;
  std::thread thread;
  Clock::time_point started = Clock::now();

  // I/O thread only.
  std::set<std::shared_ptr<Connection>> connections;
  // Includes connections still in the handshake, so shutdown can reach them.
  std::vector<std::weak_ptr<Connection>> all;
  Connection* player = nullptr;

  // Shared with the session thread.
  mutable std::mutex mu;
  std::condition_variable cv;
  bool has_player = false;
  std::uint64_t generation = 0;
  std::size_t clients = 0;
  std::deque<ControlAction> controls;
  bool io_done = false;
  Stats stats;

  void accept();
  void attach(const std::shared_ptr<Connection>& c);
  void detach(Connection* c);
  void on_text(Connection* c, const std::string& text);
};

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, std::shared_ptr<LiveService::Impl> owner)
      : ws_(std::move(socket)), owner_(std::move(owner)) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) {
        spdlog::debug("live: handshake failed: {}", ec.message());
        return;
      }
      self->owner_->attach(self);
      self->read();
    });
  }

  void send(nlohmann::json body) {
    if (closed_) return;
    const bool is_state = body.value("type", std::string{}) == "state";
    if (is_state && !pending_.empty() && pending_.back().state) {
      pending_.back().body = std::move(body);
      std::lock_guard lk(owner_->mu);
      ++owner_->stats.coalesced;
    } else {
      pending_.push_back({std::move(body), is_state});
    }
    if (pending_.size() > kMaxBacklog) {
      spdlog::warn("live: client backlog overflow, closing connection");
      close();
      return;
    }
    write_next();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    pending_.clear();
    beast::get_lowest_layer(ws_).close();
  }

  bool is_player = false;

 private:
  struct Outgoing {
    nlohmann::json body;
    bool state = false;
  };

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        self->owner_->detach(self.get());
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->owner_->on_text(self.get(), text);
      self->read();
    });
  }

  void write_next() {
    if (writing_ || closed_ || pending_.empty()) return;
    writing_ = true;
    out_ = stamp(std::move(pending_.front().body), ++seq_);
    pending_.pop_front();
    ws_.text(true);
    ws_.async_write(asio::buffer(out_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) {
        self->close();
        return;
      }
      self->write_next();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<LiveService::Impl> owner_;
  beast::flat_buffer buffer_;
  std::deque<Outgoing> pending_;
  std::string out_;
  std::uint64_t seq_ = 0;
  bool writing_ = false;
  bool closed_ = false;
};

void LiveService::Impl::accept() {
  acceptor.async_accept(io, [self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
    if (ec) {
      if (ec != asio::error::operation_aborted) spdlog::warn("live: accept failed: {}", ec.message());
      if (!self->acceptor.is_open()) return;
    } else {
      auto c = std::make_shared<Connection>(std::move(socket), self);
      std::erase_if(self->all, [](const auto& w) { return w.expired(); });
      self->all.push_back(c);
      c->start();
    }
    self->accept();
  });
}

void LiveService::Impl::attach(const std::shared_ptr<Connection>& c) {
  connections.insert(c);
  if (player == nullptr) {
    player = c.get();
    c->is_player = true;
  }
  {
    std::lock_guard lk(mu);
    ++stats.accepted;
    clients = connections.size();
    if (c->is_player) {
      has_player = true;
      ++generation;
    }
  }
  cv.notify_all();
  spdlog::info("live: {} connected ({} clients)", c->is_player ? "player" : "spectator", connections.size());
  c->send(hello_message(c->is_player));
}

void LiveService::Impl::detach(Connection* c) {
  const bool was_player = c == player;
  for (auto it = connections.begin(); it != connections.end(); ++it) {
    if (it->get() == c) {
      connections.erase(it);
      break;
    }
  }
  if (was_player) {
    player = nullptr;
    // A new player must not inherit the old player's last command.
    mailbox.clear();
  }
  {
    std::lock_guard lk(mu);
    clients = connections.size();
    if (was_player) has_player = false;
  }
  cv.notify_all();
  spdlog::info("live: {} disconnected", was_player ? "player" : "spectator");
}

void LiveService::Impl::on_text(Connection* c, const std::string& text) {
  ClientMessage msg;
  try {
    msg = parse_client_message(text);
  } catch (const WireError& e) {
    std::lock_guard lk(mu);
    ++stats.malformed;
    spdlog::warn("live: dropped malformed message: {}", e.what());
    return;
  }
  if (!c->is_player) {
    std::lock_guard lk(mu);
    ++stats.spectator_commands;
    spdlog::info("live: ignored message from spectator");
    return;
  }
  if (const auto* cmd = std::get_if<CommandMsg>(&msg)) {
    const double t = std::chrono::duration<double>(Clock::now() - started).count();
    mailbox.publish(cmd->phi_human, t);
    std::lock_guard lk(mu);
    ++stats.commands;
    return;
  }
  {
    std::lock_guard lk(mu);
    controls.push_back(std::get<ControlMsg>(msg).action);
  }
  cv.notify_all();
}

LiveService::LiveService(CommandMailbox& mailbox, const std::string& bind_address, unsigned short port)
    : impl_(std::make_shared<Impl>(mailbox)) {
  try {
    const tcp::endpoint ep(asio::ip::make_address(bind_address), port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen(asio::socket_base::max_listen_connections);
  } catch (const boost::system::system_error& e) {
    throw ServiceError("cannot listen on " + bind_address + ":" + std::to_string(port) + ": " +
                       e.code().message());
  }
  impl_->accept();
  impl_->thread = std::thread([impl = impl_] {
    impl->io.run();
    std::lock_guard lk(impl->mu);
    impl->io_done = true;
    impl->cv.notify_all();
  });
  spdlog::info("live: listening on ws://{}:{}", bind_address, this->port());
}

LiveService::~LiveService() {
  asio::post(impl_->io, [impl = impl_] {
    beast::error_code ec;
    impl->acceptor.close(ec);
    for (const auto& w : impl->all) {
      if (auto c = w.lock()) c->close();
    }
  });
  // Closing every socket lets run() drain on its own; stop() is the fallback.
  {
    std::unique_lock lk(impl_->mu);
    if (!impl_->cv.wait_for(lk, std::chrono::seconds(2), [&] { return impl_->io_done; })) impl_->io.stop();
  }
  if (impl_->thread.joinable()) impl_->thread.join();
}

unsigned short LiveService::port() const { return impl_->acceptor.local_endpoint().port(); }

void LiveService::broadcast(nlohmann::json body) {
  asio::post(impl_->io, [impl = impl_, body = std::move(body)]() mutable {
    for (const auto& c : impl->connections) c->send(body);
  });
}

bool LiveService::player_connected() const {
  std::lock_guard lk(impl_->mu);
  return impl_->has_player;
}

std::uint64_t LiveService::player_generation() const {
  std::lock_guard lk(impl_->mu);
  return impl_->generation;
}

bool LiveService::wait_for_player(std::chrono::duration<double> timeout) {
  std::unique_lock lk(impl_->mu);
  return impl_->cv.wait_for(lk, timeout, [&] { return impl_->has_player; });
}

std::size_t LiveService::client_count() const {
  std::lock_guard lk(impl_->mu);
  return impl_->clients;
}

std::vector<ControlAction> LiveService::take_controls() {
  std::lock_guard lk(impl_->mu);
  std::vector<ControlAction> out(impl_->controls.begin(), impl_->controls.end());
  impl_->controls.clear();
  return out;
}

bool LiveService::wait_for_control(std::chrono::duration<double> timeout) {
  std::unique_lock lk(impl_->mu);
  return impl_->cv.wait_for(lk, timeout, [&] { return !impl_->controls.empty() || !impl_->has_player; });
}

LiveService::Stats LiveService::stats() const {
  std::lock_guard lk(impl_->mu);
  return impl_->stats;
}

LiveObserver::LiveObserver(LiveService& service, double client_timeout_s)
    : service_(service), timeout_s_(client_timeout_s) {}

void LiveObserver::drain_controls() {
  for (ControlAction a : service_.take_controls()) {
    switch (a) {
      case ControlAction::start: paused_ = false; break;
      case ControlAction::pause: paused_ = true; break;
      case ControlAction::abort: abort_ = true; break;
    }
  }
}

void LiveObserver::on_trial_start(std::int64_t trial_index, const TrayState& s) {
  const auto timeout = std::chrono::duration<double>(timeout_s_);
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(timeout);
  for (;;) {
    drain_controls();
    if (!service_.player_connected()) {
      if (!service_.wait_for_player(deadline - Clock::now())) {
        throw ServiceTimeout("no player connected within " + std::to_string(timeout_s_) + " s");
      }
      continue;
    }
    if (!paused_) break;
    if (Clock::now() >= deadline) throw ServiceTimeout("session paused longer than the client timeout");
    service_.wait_for_control(deadline - Clock::now());
  }
  // An abort left over from the previous trial does not carry into this one.
  abort_ = false;
  generation_ = service_.player_generation();
  service_.broadcast(trial_start_message(trial_index, spawn_corner_index(trial_index), s));
}

void LiveObserver::on_frame(std::int64_t trial_index, int frame, const TrayState& s, int score_so_far) {
  service_.broadcast(state_message(trial_index, frame, s, score_so_far));
}

void LiveObserver::on_trial_end(const TrialRecord& record) {
  service_.broadcast(trial_end_message(record));
}

void LiveObserver::on_block_end(int block, const LearningCurve& curve) {
  service_.broadcast(session_event_message(block + 1, curve));
}

bool LiveObserver::abort_requested() {
  drain_controls();
  if (!service_.player_connected() || service_.player_generation() != generation_) {
    spdlog::warn("live: player left mid-trial, aborting trial");
    return true;
  }
  return abort_;
}

void replay_trials(LiveService& service, const std::vector<TrialRecord>& trials,
                   double frame_period_s, int frames_per_trial) {
  const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(frame_period_s));
  for (const TrialRecord& r : trials) {
    const Observation first = r.frames.empty() ? r.final_state : r.frames.front().state;
    service.broadcast(trial_start_message(r.trial_index, r.spawn_corner, TrayState::from_observation(first)));
    const auto t0 = Clock::now();
    const int n = static_cast<int>(r.frames.size());
    for (int f = 1; f <= n; ++f) {
      std::this_thread::sleep_until(t0 + f * period);
      const bool last = f == n;
      const Observation& o = last ? r.final_state : r.frames[static_cast<std::size_t>(f)].state;
      service.broadcast(state_message(r.trial_index, f, TrayState::from_observation(o, last && r.success),
                                      frames_per_trial - f));
    }
    service.broadcast(trial_end_message(r));
  }
}

}  // namespace comaze
