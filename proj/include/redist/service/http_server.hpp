#pragma once

#include <memory>
#include <string>

#include "redist/service/session.hpp"

namespace redist::service {

/// Defaults applied to sessions created over HTTP (simulated-seat players).
struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::shared_ptr<const players::VirtualPlayerModel> model;  // null: rational players
  std::filesystem::path base_dir;
  double tick_seconds = 0.25;
};

/// Routes:
///   POST /sessions                  create; body is SessionOptions JSON; 201 {"id"}
///   GET  /sessions/{id}?seat=k      state as seen by seat k
///   POST /sessions/{id}/actions     {"type": "join"|"contribute"|"allocate"|"vote", ...}
///   GET  /sessions/{id}/events?since=n      events after id n as a JSON array
///   GET  /sessions/{id}/events/stream?since=n   the same as server-sent events
///   GET  /sessions/{id}/export      the finished episode as one JSONL line
/// Blocks until stop() is called from another thread or the listener fails.
class HttpServer {
 public:
  HttpServer(SessionManager& sessions, ServerConfig config);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Returns false if the port could not be bound.
  bool run();
  void stop();
  /// Binds an ephemeral port and returns it, or -1; call run_bound() afterwards.
  int bind_any_port();
  bool run_bound();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace redist::service
