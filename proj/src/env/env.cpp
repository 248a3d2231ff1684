#include "upd/env/env.hpp"

#include <algorithm>
#include <cassert>

namespace upd::env {

double reward_from_events(const EventSet& events, const Recipe& recipe,
                          double shaping_coeff) {
  const double sparse = recipe.delivery_reward * events.count_deliveries();
  const double shaped = kPlaceOnionReward * events.count_place_onion() +
                        kPlatePickupReward * events.count_plate_pickup() +
                        kSoupPickupReward * events.count_soup_pickup();
  return sparse + shaping_coeff * shaped;
}

double max_step_reward(const Recipe& recipe, double shaping_coeff) {
  const double per_agent =
      std::max({recipe.delivery_reward, shaping_coeff * kSoupPickupReward,
                shaping_coeff * kPlaceOnionReward});
  return 2.0 * per_agent;
}

EnvState initial_state(LevelPtr level, std::uint64_t seed, int horizon) {
  if (!level) throw StepError("reset without a level");
  if (horizon < 1) throw StepError("horizon must be positive");
  EnvState s;
  s.level = level;
  for (int i = 0; i < 2; ++i) {
    s.agents[i].pos = level->spawns()[i];
    s.agents[i].dir = Direction::Up;
    s.agents[i].held = Item::Nothing;
  }
  s.pots.assign(level->pot_cells().size(), PotState{});
  s.counter_items.assign(level->tiles().size(), Item::Nothing);
  s.t = 0;
  s.horizon = horizon;
  s.seed = seed;
  return s;
}

ResetResult reset(LevelPtr level, std::uint64_t seed, int horizon) {
  ResetResult r;
  r.state = initial_state(std::move(level), seed, horizon);
  r.obs[0] = encode_obs(r.state, 0);
  r.obs[1] = encode_obs(r.state, 1);
  return r;
}

namespace {

bool is_move(Action a) { return static_cast<int>(a) < kNumDirections; }

Direction to_direction(Action a) { return static_cast<Direction>(a); }

int count_plates_in_play(const EnvState& s) {
  int n = 0;
  for (const auto& a : s.agents) n += a.held == Item::Plate;
  for (Item it : s.counter_items) n += it == Item::Plate;
  return n;
}

int count_full_pots(const EnvState& s) {
  const int need = s.level->recipe().onions_per_soup;
  return static_cast<int>(std::count_if(
      s.pots.begin(), s.pots.end(),
      [need](const PotState& p) { return p.full(need); }));
}

void interact(EnvState& s, int i, AgentEvents& ev) {
  const GridLevel& level = *s.level;
  const Recipe& recipe = level.recipe();
  AgentState& agent = s.agents[i];
  const Cell target = neighbor(agent.pos, agent.dir);
  if (!level.in_bounds(target)) return;
  const Tile tile = level.at(target);

  switch (tile) {
    case Tile::Floor:
    case Tile::Wall:
      return;
    case Tile::OnionPile:
      if (agent.held == Item::Nothing) agent.held = Item::Onion;
      return;
    case Tile::PlatePile:
      if (agent.held == Item::Nothing) {
        ev.pickup_plate_while_cooking =
            count_full_pots(s) > count_plates_in_play(s);
        agent.held = Item::Plate;
      }
      return;
    case Tile::ServingWindow:
      if (agent.held == Item::Soup) {
        agent.held = Item::Nothing;
        ev.deliver = true;
      }
      return;
    case Tile::Counter: {
      Item& slot = s.counter_items[static_cast<std::size_t>(level.index(target))];
      if (agent.held == Item::Nothing && slot != Item::Nothing) {
        agent.held = slot;
        slot = Item::Nothing;
      } else if (agent.held != Item::Nothing && slot == Item::Nothing) {
        slot = agent.held;
        agent.held = Item::Nothing;
      }
      return;
    }
    case Tile::Pot: {
      PotState& pot = s.pots[static_cast<std::size_t>(level.pot_index(target))];
      if (agent.held == Item::Onion && !pot.full(recipe.onions_per_soup)) {
        ++pot.onions;
        agent.held = Item::Nothing;
        ev.place_onion = true;
        if (pot.full(recipe.onions_per_soup)) pot.timer = recipe.cook_time;
      } else if (agent.held == Item::Plate && pot.ready) {
        agent.held = Item::Soup;
        pot = PotState{};
        ev.pickup_soup = true;
      }
      return;
    }
  }
}

}  // namespace

StepOutcome step_inplace(EnvState& s, const JointAction& actions,
                         double shaping_coeff) {
  if (s.done()) throw StepError("step after episode end");
  const GridLevel& level = *s.level;
  StepOutcome out;

  // Interactions resolve in agent order against the evolving state.
  for (int i = 0; i < 2; ++i) {
    if (actions[i] == Action::Interact) interact(s, i, out.events.agent[i]);
  }

  // Simultaneous movement: conflicting or swapping proposals both stay.
  std::array<Cell, 2> target{s.agents[0].pos, s.agents[1].pos};
  for (int i = 0; i < 2; ++i) {
    if (!is_move(actions[i])) continue;
    s.agents[i].dir = to_direction(actions[i]);
    const Cell next = neighbor(s.agents[i].pos, s.agents[i].dir);
    if (level.passable(next)) target[i] = next;
  }
  const bool same_cell = target[0] == target[1];
  const bool swap =
      target[0] == s.agents[1].pos && target[1] == s.agents[0].pos;
  if (!same_cell && !swap) {
    s.agents[0].pos = target[0];
    s.agents[1].pos = target[1];
  }

  const int need = level.recipe().onions_per_soup;
  for (PotState& pot : s.pots) {
    if (pot.cooking(need)) {
      if (--pot.timer <= 0) {
        pot.timer = 0;
        pot.ready = true;
      }
    }
  }

  ++s.t;
  out.done = s.done();
  out.reward = reward_from_events(out.events, level.recipe(), shaping_coeff);
  return out;
}

StepResult step(const EnvState& state, const JointAction& actions,
                double shaping_coeff) {
  StepResult r;
  r.state = state;
  const StepOutcome o = step_inplace(r.state, actions, shaping_coeff);
  r.reward = o.reward;
  r.done = o.done;
  r.events = o.events;
  r.obs[0] = encode_obs(r.state, 0);
  r.obs[1] = encode_obs(r.state, 1);
  return r;
}

namespace plane {
constexpr int kTile = 0;
constexpr int kCounterItem = kNumTileKinds;       // onion, plate, soup
constexpr int kSelfPos = kCounterItem + 3;
constexpr int kOtherPos = kSelfPos + 1;
constexpr int kSelfDir = kOtherPos + 1;
constexpr int kOtherDir = kSelfDir + kNumDirections;
constexpr int kPotFill = kOtherDir + kNumDirections;
constexpr int kPotTimer = kPotFill + 1;
constexpr int kPotReady = kPotTimer + 1;
static_assert(kPotReady + 1 == kPlanesPerCell);
}  // namespace plane

void encode_obs_into(const EnvState& s, int agent_index, std::span<float> out) {
  const GridLevel& level = *s.level;
  const int w = level.width();
  const int h = level.height();
  assert(static_cast<int>(out.size()) == observation_length(w, h));
  std::fill(out.begin(), out.end(), 0.0f);
  const int cells = w * h;
  auto at = [&](int p, int cell) -> float& {
    return out[static_cast<std::size_t>(p * cells + cell)];
  };

  for (int c = 0; c < cells; ++c) {
    at(plane::kTile + static_cast<int>(level.tiles()[c]), c) = 1.0f;
    const Item it = s.counter_items[static_cast<std::size_t>(c)];
    if (it != Item::Nothing) {
      at(plane::kCounterItem + static_cast<int>(it) - 1, c) = 1.0f;
    }
  }

  const AgentState& self = s.agents[agent_index];
  const AgentState& other = s.agents[1 - agent_index];
  const int self_cell = level.index(self.pos);
  const int other_cell = level.index(other.pos);
  at(plane::kSelfPos, self_cell) = 1.0f;
  at(plane::kOtherPos, other_cell) = 1.0f;
  at(plane::kSelfDir + static_cast<int>(self.dir), self_cell) = 1.0f;
  at(plane::kOtherDir + static_cast<int>(other.dir), other_cell) = 1.0f;

  const Recipe& recipe = level.recipe();
  for (std::size_t p = 0; p < s.pots.size(); ++p) {
    const int c = level.index(level.pot_cells()[p]);
    const PotState& pot = s.pots[p];
    at(plane::kPotFill, c) =
        static_cast<float>(pot.onions) / static_cast<float>(recipe.onions_per_soup);
    at(plane::kPotTimer, c) =
        static_cast<float>(pot.timer) / static_cast<float>(recipe.cook_time);
    at(plane::kPotReady, c) = pot.ready ? 1.0f : 0.0f;
  }

  std::size_t k = static_cast<std::size_t>(cells * kPlanesPerCell);
  out[k + static_cast<std::size_t>(self.held)] = 1.0f;
  k += kNumItems;
  out[k + static_cast<std::size_t>(other.held)] = 1.0f;
  k += kNumItems;
  out[k + static_cast<std::size_t>(self.dir)] = 1.0f;
  k += kNumDirections;
  out[k] = static_cast<float>(s.t) / static_cast<float>(s.horizon);
}

Observation encode_obs(const EnvState& s, int agent_index) {
  Observation o(static_cast<std::size_t>(
      observation_length(s.level->width(), s.level->height())));
  encode_obs_into(s, agent_index, o);
  return o;
}

}  // namespace upd::env
