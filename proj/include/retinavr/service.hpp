#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "retinavr/session.hpp"

namespace retinavr {

inline constexpr int kProtocolVersion = 1;
/// Snapshots go out at most once per this much input time (about 30 Hz).
inline constexpr std::int64_t kSnapshotIntervalMs = 33;

struct ServiceOptions {
  TaskConfig config;
  /// Where live sessions are auto-saved. Empty disables saving.
  std::string log_dir = "sessions";
};

/// Static geometry of a freshly initialized task, for the client to build its scene.
nlohmann::json layout_json(const TaskState& state);
/// Instrument tips, per-task visuals and force-finalized live metrics.
nlohmann::json snapshot_json(const TaskState& state);
nlohmann::json error_message(ErrorCode code, const std::string& message);

/// Append-only list of sessions started by a server. Thread safe.
class SessionRegistry {
 public:
  struct Entry {
    std::string session_id;
    TaskKind module = TaskKind::Navigation;
    std::uint64_t seed = 0;
    std::string log_path;
  };

  explicit SessionRegistry(std::string log_dir = {});
  /// Reserves a fresh id whose log file does not exist yet.
  Entry open(TaskKind module, std::uint64_t seed);
  std::vector<Entry> entries() const;

 private:
  mutable std::mutex mu_;
  std::string log_dir_;
  int next_ = 1;
  std::vector<Entry> entries_;
};

/// Transport-free protocol state machine for one connection.
///
/// Each client message yields the server messages to send back, in order.
/// Once Completed or Error has been produced the session is closed and
/// every further message is answered with ProtocolViolation.
class ProtocolSession {
 public:
  ProtocolSession(const ServiceOptions& options, std::shared_ptr<SessionRegistry> registry);
  ~ProtocolSession();
  ProtocolSession(const ProtocolSession&) = delete;
  ProtocolSession& operator=(const ProtocolSession&) = delete;

  std::vector<nlohmann::json> handle(const std::string& text);
  std::vector<nlohmann::json> handle(const nlohmann::json& message);

  bool closed() const { return closed_; }
  const std::optional<TaskState>& state() const { return state_; }
  /// Path of the auto-saved log, once a session was created with saving on.
  const std::string& log_path() const { return log_path_; }

 private:
  std::vector<nlohmann::json> create(const nlohmann::json& m);
  std::vector<nlohmann::json> input(const nlohmann::json& m);
  std::vector<nlohmann::json> finish(bool force);
  std::vector<nlohmann::json> fail(ErrorCode code, const std::string& message);
  void close_log();

  ServiceOptions options_;
  std::shared_ptr<SessionRegistry> registry_;
  std::optional<TaskState> state_;
  std::string session_id_;
  std::string log_path_;
  std::ofstream log_file_;
  std::unique_ptr<LogWriter> writer_;
  EventList pending_events_;  // logged after the last frame
  std::optional<std::int64_t> last_snapshot_ms_;
  bool closed_ = false;
};

/// WebSocket server: one thread per connection, one task session per connection.
class Server {
 public:
  explicit Server(ServiceOptions options);
  ~Server();

  /// Binds and starts accepting in the background; returns the bound port.
  /// Throws BindFailure.
  unsigned short start(const std::string& address, unsigned short port);
  /// Blocks until stop() is called.
  void wait();
  void stop();

  std::shared_ptr<SessionRegistry> registry() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace retinavr
