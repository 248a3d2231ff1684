#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "upd/env/transcript.hpp"
#include "upd/eval/agents.hpp"

namespace upd::play {

class SessionEnded : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct SessionConfig {
  std::string layout_name;
  env::LevelPtr level;
  int human_seat = 0;
  std::uint64_t seed = 0;
  int tick_ms = 200;  // 0: turn-based, the env advances only on input
  int horizon = env::kDefaultHorizon;
};

// One human-vs-agent episode. Not thread-safe; the server serialises
// access per session.
class PlaySession {
 public:
  PlaySession(std::string id, SessionConfig cfg, std::unique_ptr<eval::Agent> agent);

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return cfg_; }
  const env::EnvState& state() const { return state_; }
  bool done() const { return state_.done(); }
  double score() const { return score_; }
  const env::Transcript& transcript() const { return transcript_; }
  std::string agent_name() const { return agent_->name(); }

  // Advances one step with the human's action; the agent samples its own.
  // Throws SessionEnded after the horizon.
  const env::StepRecord& step(env::Action human);

  // Server messages.
  nlohmann::json state_message() const;
  nlohmann::json end_message() const;

 private:
  std::string id_;
  SessionConfig cfg_;
  std::unique_ptr<eval::Agent> agent_;
  env::EnvState state_;
  env::Transcript transcript_;
  double score_ = 0.0;
  double last_reward_ = 0.0;
};

// Full state as sent to clients.
nlohmann::json state_to_json(const env::EnvState& s);

}  // namespace upd::play
