#include "upd/play/server.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "upd/play/session.hpp"
#include "upd/trainer/config.hpp"

namespace upd::play {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

namespace {

struct LiveSession {
  std::mutex mu;
  PlaySession session;
  bool streaming = false;

  LiveSession(std::string id, SessionConfig cfg, std::unique_ptr<eval::Agent> agent)
      : session(std::move(id), std::move(cfg), std::move(agent)) {}
};

bool safe_name(const std::string& s) {
  if (s.empty() || s.find("..") != std::string::npos) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

std::string mime_type(const std::filesystem::path& p) {
  const std::string e = p.extension().string();
  if (e == ".html") return "text/html";
  if (e == ".js") return "application/javascript";
  if (e == ".css") return "text/css";
  if (e == ".json") return "application/json";
  if (e == ".svg") return "image/svg+xml";
  if (e == ".png") return "image/png";
  return "application/octet-stream";
}

}  // namespace

struct PlayServer::Impl {
  ServerConfig cfg;
  asio::io_context ioc;
  std::optional<tcp::acceptor> acceptor;
  std::thread accept_thread;
  std::atomic<bool> stopping{false};
  std::mutex mu;
  std::condition_variable stopped_cv;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions;
  std::vector<std::thread> workers;
  std::uint64_t next_id = 0;

  explicit Impl(ServerConfig c) : cfg(std::move(c)) {}

  // ---- HTTP ----

  template <class Body>
  http::response<http::string_body> reply(const http::request<Body>& req, http::status st,
                                          std::string body,
                                          const std::string& type = "application/json") {
    http::response<http::string_body> res{st, req.version()};
    res.set(http::field::content_type, type);
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  }

  template <class Body>
  http::response<http::string_body> error(const http::request<Body>& req, http::status st,
                                          const std::string& msg) {
    return reply(req, st, json{{"error", msg}}.dump());
  }

  std::shared_ptr<LiveSession> find(const std::string& id) {
    std::lock_guard<std::mutex> lk(mu);
    const auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  std::unique_ptr<eval::Agent> make_session_agent(const json& body) {
    const std::string agent = body.value("agent", std::string("policy"));
    if (agent != "policy") {
      if (agent.rfind("ckpt:", 0) == 0 || agent.rfind("greedy:", 0) == 0 || agent.rfind("mix:", 0) == 0)
        throw std::invalid_argument("checkpoint agents are chosen with \"checkpoint\"");
      return eval::make_agent(agent);
    }
    std::string name = body.value("checkpoint", cfg.default_checkpoint);
    if (name.empty()) throw std::invalid_argument("no checkpoint given and no default configured");
    std::filesystem::path path;
    if (name == cfg.default_checkpoint && !cfg.default_checkpoint.empty() &&
        !body.contains("checkpoint")) {
      path = cfg.default_checkpoint;
    } else {
      if (!safe_name(name)) throw std::invalid_argument("bad checkpoint name");
      path = cfg.checkpoint_dir / name;
    }
    const bool greedy = body.value("greedy", false);
    return eval::make_agent(std::string(greedy ? "greedy:" : "ckpt:") + path.string());
  }

  template <class Body>
  http::response<http::string_body> create_session(const http::request<Body>& req) {
    json body;
    try {
      body = req.body().empty() ? json::object() : json::parse(req.body());
    } catch (const json::exception&) {
      return error(req, http::status::bad_request, "body is not JSON");
    }
    try {
      SessionConfig sc;
      sc.layout_name = body.value("layout", std::string("cramped_room"));
      if (!safe_name(sc.layout_name)) throw std::invalid_argument("bad layout name");
      sc.level = trainer::resolve_layout(sc.layout_name);
      sc.human_seat = body.value("seat", 0);
      sc.seed = body.value("seed", std::uint64_t{0});
      sc.tick_ms = body.value("tick_ms", cfg.default_tick_ms);
      sc.horizon = body.value("horizon", env::kDefaultHorizon);
      auto agent = make_session_agent(body);
      std::string id;
      {
        std::lock_guard<std::mutex> lk(mu);
        id = "s" + std::to_string(next_id++);
      }
      auto live = std::make_shared<LiveSession>(id, sc, std::move(agent));
      const std::string agent_name = live->session.agent_name();
      {
        std::lock_guard<std::mutex> lk(mu);
        sessions[id] = live;
      }
      return reply(req, http::status::created,
                   json{{"id", id}, {"ws", "/ws/" + id}, {"seat", sc.human_seat},
                        {"horizon", sc.horizon}, {"tick_ms", sc.tick_ms},
                        {"layout", sc.layout_name}, {"agent", agent_name}}
                       .dump());
    } catch (const std::exception& e) {
      return error(req, http::status::bad_request, e.what());
    }
  }

  template <class Body>
  http::response<http::string_body> serve_static(const http::request<Body>& req,
                                                 std::string target) {
    if (cfg.static_dir.empty()) return error(req, http::status::not_found, "no static assets");
    if (target == "/") target = "/index.html";
    if (target.find("..") != std::string::npos) return error(req, http::status::bad_request, "bad path");
    const std::filesystem::path p = cfg.static_dir / target.substr(1);
    std::ifstream in(p, std::ios::binary);
    if (!in) return error(req, http::status::not_found, "not found");
    std::stringstream ss;
    ss << in.rdbuf();
    return reply(req, http::status::ok, ss.str(), mime_type(p));
  }

  template <class Body>
  http::response<http::string_body> route(const http::request<Body>& req) {
    std::string target(req.target());
    if (const auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (target == "/api/sessions") {
      if (req.method() != http::verb::post) return error(req, http::status::method_not_allowed, "use POST");
      return create_session(req);
    }
    const std::string prefix = "/api/sessions/", suffix = "/transcript";
    if (target.rfind(prefix, 0) == 0 && target.size() > prefix.size() + suffix.size() &&
        target.compare(target.size() - suffix.size(), suffix.size(), suffix) == 0) {
      const std::string id = target.substr(prefix.size(), target.size() - prefix.size() - suffix.size());
      auto live = find(id);
      if (!live) return error(req, http::status::not_found, "no such session");
      std::lock_guard<std::mutex> lk(live->mu);
      return reply(req, http::status::ok, env::transcript_to_jsonl(live->session.transcript()),
                   "application/x-ndjson");
    }
    if (req.method() != http::verb::get) return error(req, http::status::method_not_allowed, "use GET");
    return serve_static(req, target);
  }

  // ---- WebSocket ----

  void save_transcript(const PlaySession& s) {
    if (cfg.transcript_dir.empty()) return;
    std::filesystem::create_directories(cfg.transcript_dir);
    env::save_transcript(s.transcript(), (cfg.transcript_dir / (s.id() + ".jsonl")).string());
  }

  // Single-threaded async loop on the connection's own io_context: reads
  // queue actions, a timer drives ticks. Turn-based sessions advance on
  // each action instead.
  void stream(websocket::stream<tcp::socket&>& ws, asio::io_context& ioc,
              const std::shared_ptr<LiveSession>& live) {
    ws.text(true);
    {
      std::lock_guard<std::mutex> lk(live->mu);
      if (live->streaming) {
        ws.write(asio::buffer(json{{"type", "error"}, {"message", "session already connected"}}.dump()));
        ws.close(websocket::close_code::policy_error);
        return;
      }
      live->streaming = true;
      ws.write(asio::buffer(live->session.state_message().dump()));
    }
    const int tick = live->session.config().tick_ms;
    bool ended = false, broken = false;
    std::optional<env::Action> pending;
    beast::flat_buffer buf;
    asio::steady_timer timer(ioc);

    auto send = [&](const json& j) {
      beast::error_code ec;
      ws.write(asio::buffer(j.dump()), ec);
      if (ec) broken = true;
      return !ec;
    };
    auto finish = [&] {
      timer.cancel();
      beast::error_code ec;
      ws.next_layer().cancel(ec);
    };

    std::function<void(beast::error_code)> on_tick = [&](beast::error_code ec) {
      if (ec || ended || broken || stopping) return;
      advance(live, pending.value_or(env::Action::Stay), send, ended);
      pending.reset();
      if (broken) return finish();
      if (!ended) {
        timer.expires_at(timer.expiry() + std::chrono::milliseconds(tick));
        timer.async_wait(on_tick);
      }
    };

    std::function<void()> do_read;
    auto on_read = [&](beast::error_code ec, std::size_t) {
      if (ec) return finish();
      json m;
      try {
        m = json::parse(beast::buffers_to_string(buf.data()));
      } catch (const json::exception&) {
      }
      buf.consume(buf.size());
      if (m.value("type", std::string()) != "action" || !m.contains("action") ||
          !m["action"].is_number_integer() || m["action"].get<int>() < 0 ||
          m["action"].get<int>() >= env::kNumActions) {
        send({{"type", "error"}, {"message", "expected {type:\"action\", action:0..5}"}});
      } else if (ended) {
        send({{"type", "error"}, {"message", "episode has ended"}});
      } else if (tick > 0) {
        pending = static_cast<env::Action>(m["action"].get<int>());  // latest input wins
      } else {
        advance(live, static_cast<env::Action>(m["action"].get<int>()), send, ended);
      }
      if (broken || stopping) return finish();
      do_read();
    };
    do_read = [&] { ws.async_read(buf, on_read); };

    do_read();
    if (tick > 0) {
      timer.expires_after(std::chrono::milliseconds(tick));
      timer.async_wait(on_tick);
    }
    ioc.run();

    beast::error_code ec;
    if (!broken) ws.close(websocket::close_code::normal, ec);
    std::lock_guard<std::mutex> lk(live->mu);
    live->streaming = false;
  }

  template <class Send>
  bool advance(const std::shared_ptr<LiveSession>& live, env::Action a, Send& send, bool& ended) {
    json state, end;
    {
      std::lock_guard<std::mutex> lk(live->mu);
      PlaySession& s = live->session;
      if (s.done()) {
        ended = true;
        return true;
      }
      s.step(a);
      state = s.state_message();
      if (s.done()) {
        end = s.end_message();
        save_transcript(s);
      }
    }
    bool ok = send(state);
    if (!end.is_null()) {
      ended = true;
      ok = send(end) && ok;
    }
    return ok;
  }

  // ---- connections ----

  struct Conn {
    asio::io_context ioc;
    tcp::socket sock{ioc};
  };
  std::vector<std::shared_ptr<Conn>> conns;

  void handle(const std::shared_ptr<Conn>& c) {
    tcp::socket& sock = c->sock;
    beast::error_code ec;
    beast::flat_buffer buf;
    while (!stopping) {
      http::request<http::string_body> req;
      http::read(sock, buf, req, ec);
      if (ec) break;
      if (websocket::is_upgrade(req)) {
        std::string target(req.target());
        const std::string prefix = "/ws/";
        auto live = target.rfind(prefix, 0) == 0 ? find(target.substr(prefix.size())) : nullptr;
        if (!live) {
          http::write(sock, error(req, http::status::not_found, "no such session"), ec);
          break;
        }
        websocket::stream<tcp::socket&> ws(sock);
        ws.accept(req, ec);
        if (ec) break;
        try {
          stream(ws, c->ioc, live);
        } catch (const std::exception& e) {
          std::cerr << "session " << target << ": " << e.what() << '\n';
        }
        break;
      }
      auto res = route(req);
      const bool keep = res.keep_alive();
      http::write(sock, res, ec);
      if (ec || !keep) break;
    }
    sock.shutdown(tcp::socket::shutdown_both, ec);
    sock.close(ec);
    std::lock_guard<std::mutex> lk(mu);
    std::erase(conns, c);
  }

  void accept_loop() {
    while (!stopping) {
      auto c = std::make_shared<Conn>();
      beast::error_code ec;
      acceptor->accept(c->sock, ec);
      if (ec || stopping) {
        if (stopping) break;
        continue;
      }
      std::lock_guard<std::mutex> lk(mu);
      conns.push_back(c);
      workers.emplace_back([this, c] { handle(c); });
    }
  }
};

PlayServer::PlayServer(ServerConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

PlayServer::~PlayServer() { stop(); }

void PlayServer::start() {
  auto& m = *impl_;
  const tcp::endpoint ep(asio::ip::make_address(m.cfg.host), m.cfg.port);
  m.acceptor.emplace(m.ioc);
  m.acceptor->open(ep.protocol());
  m.acceptor->set_option(asio::socket_base::reuse_address(true));
  m.acceptor->bind(ep);
  m.acceptor->listen();
  m.accept_thread = std::thread([&m] { m.accept_loop(); });
}

unsigned short PlayServer::port() const {
  return impl_->acceptor ? impl_->acceptor->local_endpoint().port() : 0;
}

void PlayServer::wait() {
  std::unique_lock<std::mutex> lk(impl_->mu);
  impl_->stopped_cv.wait(lk, [&] { return impl_->stopping.load(); });
}

void PlayServer::stop() {
  auto& m = *impl_;
  if (!m.acceptor) return;
  m.stopping = true;
  beast::error_code ec;
  m.acceptor->cancel(ec);
  // Wake the blocking accept with a throwaway connection.
  {
    tcp::socket poke(m.ioc);
    poke.connect(m.acceptor->local_endpoint(), ec);
  }
  if (m.accept_thread.joinable()) m.accept_thread.join();
  m.acceptor->close(ec);
  std::vector<std::thread> workers;
  {
    std::lock_guard<std::mutex> lk(m.mu);
    for (auto& c : m.conns) {
      c->ioc.stop();
      c->sock.shutdown(tcp::socket::shutdown_both, ec);
    }
    workers.swap(m.workers);
    m.stopped_cv.notify_all();
  }
  for (auto& w : workers)
    if (w.joinable()) w.join();
  m.acceptor.reset();
}

}  // namespace upd::play
