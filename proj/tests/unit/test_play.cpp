#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "upd/nn/checkpoint.hpp"
#include "upd/play/server.hpp"
#include "upd/play/session.hpp"
#include "upd/trainer/config.hpp"

using namespace upd;
using namespace upd::play;
using nlohmann::json;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

SessionConfig cramped(std::uint64_t seed, int seat = 0) {
  SessionConfig c;
  c.layout_name = "cramped_room";
  c.level = trainer::resolve_layout("cramped_room");
  c.seed = seed;
  c.human_seat = seat;
  c.tick_ms = 0;
  return c;
}

nn::ArchConfig tiny_arch() {
  nn::ArchConfig a;
  a.embed_layers = 1;
  a.hidden = 16;
  a.gru_hidden = 16;
  a.actor_layers = 1;
  a.critic_layers = 1;
  a.moa_layers = 1;
  a.moa_hidden = 8;
  a.action_embed = 8;
  a.history_len = 3;
  return a;
}

std::filesystem::path write_tiny_checkpoint(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto p = dir / "tiny.ckpt";
  nn::save_checkpoint(p, {nn::init_params(5, tiny_arch(), env::observation_length(5, 4), 6), 0});
  return p;
}

// Minimal blocking HTTP client.
json http_json(unsigned short port, http::verb verb, const std::string& target,
               const std::string& body, int* status = nullptr) {
  asio::io_context ioc;
  tcp::socket s(ioc);
  s.connect({asio::ip::make_address("127.0.0.1"), port});
  http::request<http::string_body> req{verb, target, 11};
  req.set(http::field::host, "localhost");
  req.set(http::field::content_type, "application/json");
  req.body() = body;
  req.prepare_payload();
  http::write(s, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(s, buf, res);
  if (status) *status = static_cast<int>(res.result_int());
  beast::error_code ec;
  s.shutdown(tcp::socket::shutdown_both, ec);
  if (res[http::field::content_type] == "application/x-ndjson") return json(res.body());
  return json::parse(res.body());
}

}  // namespace

TEST_CASE("human Stay with a Stay agent leaves the state unchanged") {
  PlaySession s("a", cramped(1), eval::make_agent("stay"));
  const env::EnvState before = s.state();
  s.step(env::Action::Stay);
  env::EnvState expect = before;
  expect.t = 1;
  CHECK(s.state() == expect);
  CHECK(s.transcript().steps.size() == 1);
  CHECK(s.state_message()["t"] == 1);
}

TEST_CASE("a full session scores the sum of its step rewards and replays") {
  PlaySession s("b", cramped(2, 1), eval::make_agent("onion"));
  auto human = eval::make_scripted(eval::ScriptedKind::PlateWorker, 0);
  double sum = 0;
  while (!s.done()) sum += s.step(eval::scripted_act(human, s.state(), 1)).reward;
  CHECK(s.transcript().steps.size() == 400);
  CHECK(s.score() == sum);
  CHECK(s.end_message()["score"] == sum);
  const env::ReplayReport r = env::replay(s.transcript());
  CHECK(r.ok());
  CHECK(r.final_state == s.state());
  CHECK_THROWS_AS(s.step(env::Action::Stay), SessionEnded);
}

TEST_CASE("greedy sessions with equal seeds and inputs give equal transcripts") {
  const auto dir = std::filesystem::temp_directory_path() / "upd_play_greedy";
  const auto ck = write_tiny_checkpoint(dir);
  PlaySession a("a", cramped(3), eval::make_agent("greedy:" + ck.string()));
  PlaySession b("b", cramped(3), eval::make_agent("greedy:" + ck.string()));
  auto ha = eval::make_scripted(eval::ScriptedKind::Random, 9);
  auto hb = eval::make_scripted(eval::ScriptedKind::Random, 9);
  while (!a.done()) {
    a.step(eval::scripted_act(ha, a.state(), 0));
    b.step(eval::scripted_act(hb, b.state(), 0));
  }
  CHECK(env::transcript_to_jsonl(a.transcript()) == env::transcript_to_jsonl(b.transcript()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("state messages follow the wire schema") {
  PlaySession s("c", cramped(4), eval::make_agent("random"));
  const json m = s.state_message();
  CHECK(m["type"] == "state");
  CHECK(m["grid"].size() == 4);
  CHECK(m["grid"][0] == "XXPXX");
  CHECK(m["agents"].size() == 2);
  CHECK(m["pots"][0]["onions"] == 0);
  for (const char* k : {"held", "t", "reward", "score", "counters"}) CHECK(m.contains(k));
  CHECK_THROWS(PlaySession("d", cramped(1, 2), eval::make_agent("stay")));
}

TEST_CASE("play server: mock human plays 400 actions over the socket") {
  const auto dir = std::filesystem::temp_directory_path() / "upd_play_server";
  std::filesystem::remove_all(dir);
  const auto ck = write_tiny_checkpoint(dir / "ckpt");
  std::filesystem::create_directories(dir / "web");
  { std::ofstream(dir / "web" / "index.html") << "<html>play</html>"; }

  ServerConfig cfg;
  cfg.port = 0;
  cfg.checkpoint_dir = dir / "ckpt";
  cfg.transcript_dir = dir / "transcripts";
  cfg.static_dir = dir / "web";
  PlayServer server(cfg);
  server.start();
  const unsigned short port = server.port();
  REQUIRE(port != 0);

  int status = 0;
  const json made = http_json(port, http::verb::post, "/api/sessions",
                              json{{"layout", "cramped_room"}, {"checkpoint", "tiny.ckpt"},
                                   {"seat", 1}, {"seed", 7}, {"tick_ms", 0}}.dump(),
                              &status);
  REQUIRE(status == 201);
  const std::string id = made["id"];
  CHECK(made["ws"] == "/ws/" + id);

  asio::io_context ioc;
  websocket::stream<tcp::socket> ws(ioc);
  ws.next_layer().connect({asio::ip::make_address("127.0.0.1"), port});
  ws.handshake("localhost", "/ws/" + id);
  beast::flat_buffer buf;
  auto read_msg = [&] {
    buf.consume(buf.size());
    ws.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  };
  json first = read_msg();
  CHECK(first["type"] == "state");
  CHECK(first["t"] == 0);

  double displayed = 0;
  json end;
  for (int i = 0; i < 400; ++i) {
    ws.write(asio::buffer(json{{"type", "action"}, {"action", i % 6}}.dump()));
    const json st = read_msg();
    REQUIRE(st["type"] == "state");
    CHECK(st["t"] == i + 1);
    displayed = st["score"];
  }
  end = read_msg();
  CHECK(end["type"] == "end");
  CHECK(end["score"] == displayed);
  // Further input is refused.
  ws.write(asio::buffer(json{{"type", "action"}, {"action", 5}}.dump()));
  CHECK(read_msg()["type"] == "error");
  ws.close(websocket::close_code::normal);

  const json tj = http_json(port, http::verb::get, "/api/sessions/" + id + "/transcript", "");
  const env::Transcript t = env::transcript_from_jsonl(tj.get<std::string>());
  CHECK(t.steps.size() == 400);
  CHECK(t.total_return() == displayed);
  for (int i = 0; i < 400; ++i) CHECK(static_cast<int>(t.steps[i].actions[1]) == i % 6);
  CHECK(env::replay(t).ok());
  CHECK(std::filesystem::exists(dir / "transcripts" / (id + ".jsonl")));

  // Bad requests.
  http_json(port, http::verb::post, "/api/sessions", json{{"checkpoint", "../x"}}.dump(), &status);
  CHECK(status == 400);
  http_json(port, http::verb::post, "/api/sessions", json{{"layout", "nowhere"}, {"agent", "stay"}}.dump(), &status);
  CHECK(status == 400);
  http_json(port, http::verb::get, "/api/sessions/zz/transcript", "", &status);
  CHECK(status == 404);
  server.stop();
  std::filesystem::remove_all(dir);
}

TEST_CASE("play server: ticks substitute Stay when the human is idle") {
  ServerConfig cfg;
  cfg.port = 0;
  PlayServer server(cfg);
  server.start();
  int status = 0;
  const json made = http_json(server.port(), http::verb::post, "/api/sessions",
                              json{{"agent", "stay"}, {"tick_ms", 10}, {"horizon", 30}}.dump(), &status);
  REQUIRE(status == 201);
  asio::io_context ioc;
  websocket::stream<tcp::socket> ws(ioc);
  ws.next_layer().connect({asio::ip::make_address("127.0.0.1"), server.port()});
  ws.handshake("localhost", made["ws"].get<std::string>());
  beast::flat_buffer buf;
  int states = 0;
  json last;
  while (true) {
    buf.consume(buf.size());
    ws.read(buf);
    last = json::parse(beast::buffers_to_string(buf.data()));
    if (last["type"] == "end") break;
    ++states;
    if (states == 5) ws.write(asio::buffer(json{{"type", "action"}, {"action", 0}}.dump()));
  }
  CHECK(states == 31);  // initial state plus one per tick
  ws.close(websocket::close_code::normal);
  const json tj = http_json(server.port(), http::verb::get,
                            "/api/sessions/" + made["id"].get<std::string>() + "/transcript", "");
  const env::Transcript t = env::transcript_from_jsonl(tj.get<std::string>());
  int ups = 0;
  for (const auto& s : t.steps) ups += s.actions[0] == env::Action::Up;
  CHECK(ups == 1);
  server.stop();
}
