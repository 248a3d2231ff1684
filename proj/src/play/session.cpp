#include "upd/play/session.hpp"

namespace upd::play {

using nlohmann::json;

namespace {

std::string direction_name(env::Direction d) {
  switch (d) {
    case env::Direction::Up: return "up";
    case env::Direction::Down: return "down";
    case env::Direction::Left: return "left";
    case env::Direction::Right: return "right";
  }
  return "?";
}

}  // namespace

json state_to_json(const env::EnvState& s) {
  const env::GridLevel& lv = *s.level;
  json grid = json::array();
  {
    // Layout text without spawn markers: agents are sent separately.
    std::string row;
    for (int y = 0; y < lv.height(); ++y) {
      row.clear();
      for (int x = 0; x < lv.width(); ++x) {
        switch (lv.at({x, y})) {
          case env::Tile::Floor: row += ' '; break;
          case env::Tile::Wall: row += 'W'; break;
          case env::Tile::Counter: row += 'X'; break;
          case env::Tile::Pot: row += 'P'; break;
          case env::Tile::OnionPile: row += 'O'; break;
          case env::Tile::PlatePile: row += 'D'; break;
          case env::Tile::ServingWindow: row += 'S'; break;
        }
      }
      grid.push_back(row);
    }
  }
  json agents = json::array(), held = json::array();
  for (const env::AgentState& a : s.agents) {
    agents.push_back({{"x", a.pos.x}, {"y", a.pos.y}, {"dir", direction_name(a.dir)},
                      {"held", env::item_name(a.held)}});
    held.push_back(env::item_name(a.held));
  }
  json pots = json::array();
  for (std::size_t i = 0; i < lv.pot_cells().size(); ++i) {
    const env::Cell c = lv.pot_cells()[i];
    const env::PotState& p = s.pots[i];
    pots.push_back({{"x", c.x}, {"y", c.y}, {"onions", p.onions}, {"timer", p.timer},
                    {"ready", p.ready}});
  }
  json counters = json::array();
  for (std::size_t i = 0; i < s.counter_items.size(); ++i) {
    if (s.counter_items[i] == env::Item::Nothing) continue;
    const env::Cell c = lv.cell(static_cast<int>(i));
    counters.push_back({{"x", c.x}, {"y", c.y}, {"item", env::item_name(s.counter_items[i])}});
  }
  return {{"grid", grid}, {"agents", agents}, {"pots", pots}, {"held", held},
          {"counters", counters}, {"t", s.t}, {"horizon", s.horizon}};
}

PlaySession::PlaySession(std::string id, SessionConfig cfg, std::unique_ptr<eval::Agent> agent)
    : id_(std::move(id)), cfg_(std::move(cfg)), agent_(std::move(agent)) {
  if (!cfg_.level) throw std::invalid_argument("session without a level");
  if (!agent_) throw std::invalid_argument("session without an agent");
  if (cfg_.human_seat != 0 && cfg_.human_seat != 1) throw std::invalid_argument("seat must be 0 or 1");
  if (cfg_.tick_ms < 0) throw std::invalid_argument("tick_ms must be nonnegative");
  if (cfg_.horizon < 1) throw std::invalid_argument("horizon must be positive");
  state_ = env::initial_state(cfg_.level, cfg_.seed, cfg_.horizon);
  agent_->reset(stream_seed({cfg_.seed, 0xa9e7}));
  transcript_.layout = env::serialize_layout(*cfg_.level);
  transcript_.recipe = cfg_.level->recipe();
  transcript_.seed = cfg_.seed;
  transcript_.horizon = cfg_.horizon;
}

const env::StepRecord& PlaySession::step(env::Action human) {
  if (done()) throw SessionEnded("episode already ended");
  const int agent_seat = 1 - cfg_.human_seat;
  env::JointAction ja{};
  ja[cfg_.human_seat] = human;
  ja[agent_seat] = agent_->act(state_, agent_seat);
  env::StepResult r = env::step(state_, ja, 0.0);
  agent_->observe(state_, ja, agent_seat);
  transcript_.steps.push_back({state_.t, ja, 0.0, r.reward, r.events});
  state_ = std::move(r.state);
  score_ += r.reward;
  last_reward_ = r.reward;
  return transcript_.steps.back();
}

json PlaySession::state_message() const {
  json j = state_to_json(state_);
  j["type"] = "state";
  j["reward"] = last_reward_;
  j["score"] = score_;
  j["seat"] = cfg_.human_seat;
  return j;
}

json PlaySession::end_message() const { return {{"type", "end"}, {"score", score_}}; }

}  // namespace upd::play
