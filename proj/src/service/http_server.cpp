#include "redist/service/http_server.hpp"

#include <atomic>
#include <thread>

#include <httplib.h>

namespace redist::service {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"type", "error"}, {"error", message}});
}

std::uint64_t since_param(const httplib::Request& req) {
  if (!req.has_param("since")) return 0;
  return std::stoull(req.get_param_value("since"));
}

nlohmann::json events_json(const std::vector<Event>& events) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : events) out.push_back(e.to_json());
  return out;
}

}  // namespace

struct HttpServer::Impl {
  SessionManager& sessions;
  ServerConfig config;
  httplib::Server server;
  std::atomic<bool> running{false};
  std::thread ticker;

  Impl(SessionManager& s, ServerConfig c) : sessions(s), config(std::move(c)) { routes(); }

  std::shared_ptr<Session> session_or_404(const httplib::Request& req, httplib::Response& res) {
    auto s = sessions.find(req.matches[1]);
    if (!s) send_error(res, 404, "unknown session: " + std::string(req.matches[1]));
    return s;
  }

  void routes() {
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        SessionOptions o = SessionOptions::from_json(req.body.empty() ? nlohmann::json::object()
                                                                       : nlohmann::json::parse(req.body));
        o.model = config.model;
        o.base_dir = config.base_dir;
        const std::string id = sessions.create(std::move(o));
        send_json(res, 201, {{"id", id}, {"state", sessions.find(id)->state()}});
      } catch (const std::exception& e) {
        send_error(res, 400, e.what());
      }
    });
    server.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session_or_404(req, res);
      if (!s) return;
      s->tick();
      std::optional<int> seat;
      if (req.has_param("seat")) seat = std::stoi(req.get_param_value("seat"));
      send_json(res, 200, s->state(seat));
    });
    server.Post(R"(/sessions/([^/]+)/actions)", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session_or_404(req, res);
      if (!s) return;
      nlohmann::json action;
      try {
        action = nlohmann::json::parse(req.body);
      } catch (const std::exception& e) {
        send_error(res, 400, std::string("malformed JSON: ") + e.what());
        return;
      }
      const ActionResult r = s->act(action);
      send_json(res, r.accepted ? 200 : 409, {{"accepted", r.accepted}, {"reason", r.reason}, {"state", r.state}});
    });
    server.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session_or_404(req, res);
      if (!s) return;
      s->tick();
      send_json(res, 200, events_json(s->events_since(since_param(req))));
    });
    server.Get(R"(/sessions/([^/]+)/events/stream)", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = sessions.find(req.matches[1]);
      res.set_header("Cache-Control", "no-cache");
      if (!s) {
        const std::string body = "event: error\ndata: {\"error\":\"unknown session\"}\n\n";
        res.set_content(body, "text/event-stream");
        return;
      }
      const auto since = std::make_shared<std::uint64_t>(since_param(req));
      res.set_chunked_content_provider("text/event-stream", [this, s, since](std::size_t, httplib::DataSink& sink) {
        const auto events = s->wait_events(*since, 1.0);
        for (const auto& e : events) {
          const std::string frame =
              "id: " + std::to_string(e.id) + "\nevent: " + e.type + "\ndata: " + e.data.dump() + "\n\n";
          if (!sink.write(frame.data(), frame.size())) return false;
          *since = e.id;
        }
        if (!running) return false;
        if (s->done() && s->events_since(*since).empty()) {
          sink.done();
          return true;
        }
        return true;
      });
    });
    server.Get(R"(/sessions/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = session_or_404(req, res);
      if (!s) return;
      if (!s->done()) {
        send_error(res, 409, "session still in progress");
        return;
      }
      res.set_content(to_jsonl_line(s->record()), "application/x-ndjson");
    });
  }

  void start_ticker() {
    running = true;
    ticker = std::thread([this] {
      while (running) {
        sessions.tick_all();
        std::this_thread::sleep_for(std::chrono::duration<double>(config.tick_seconds));
      }
    });
  }

  void halt() {
    running = false;
    server.stop();
    if (ticker.joinable()) ticker.join();
  }
};

HttpServer::HttpServer(SessionManager& sessions, ServerConfig config)
    : impl_(std::make_unique<Impl>(sessions, std::move(config))) {}

HttpServer::~HttpServer() { impl_->halt(); }

bool HttpServer::run() {
  if (!impl_->server.bind_to_port(impl_->config.host, impl_->config.port)) return false;
  return run_bound();
}

int HttpServer::bind_any_port() { return impl_->server.bind_to_any_port(impl_->config.host); }

bool HttpServer::run_bound() {
  impl_->start_ticker();
  const bool ok = impl_->server.listen_after_bind();
  impl_->running = false;
  if (impl_->ticker.joinable()) impl_->ticker.join();
  return ok;
}

void HttpServer::stop() { impl_->halt(); }

}  // namespace redist::service
