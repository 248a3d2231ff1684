#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

namespace upd::play {

struct ServerConfig {
  std::string host = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::filesystem::path static_dir;      // client assets; empty serves none
  std::filesystem::path checkpoint_dir;  // "checkpoint" names resolve here
  std::filesystem::path transcript_dir;  // finished sessions are saved here
  std::string default_checkpoint;        // used when a request names none
  int default_tick_ms = 200;
};

// HTTP + WebSocket play server.
//
//   POST /api/sessions                 create; JSON body, see README
//   GET  /api/sessions/<id>/transcript transcript as JSON lines
//   GET  /ws/<id>                      WebSocket stream for the session
//   GET  /<path>                       static assets
//
// One thread accepts; each connection gets its own thread.
class PlayServer {
 public:
  explicit PlayServer(ServerConfig cfg);
  ~PlayServer();
  PlayServer(const PlayServer&) = delete;
  PlayServer& operator=(const PlayServer&) = delete;

  void start();
  void stop();
  // Blocks until stop() is called from elsewhere.
  void wait();
  unsigned short port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace upd::play
