#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "upd/env/grid_level.hpp"

namespace upd::env {

inline constexpr int kDefaultHorizon = 400;

// Shaped-reward magnitudes, scaled by the shaping coefficient.
inline constexpr double kPlaceOnionReward = 3.0;
inline constexpr double kPlatePickupReward = 3.0;
inline constexpr double kSoupPickupReward = 5.0;

using JointAction = std::array<Action, 2>;

struct PotState {
  int onions = 0;
  int timer = 0;
  bool ready = false;

  bool full(int onions_per_soup) const { return onions >= onions_per_soup; }
  bool cooking(int onions_per_soup) const {
    return full(onions_per_soup) && !ready;
  }
  friend bool operator==(const PotState&, const PotState&) = default;
};

struct AgentState {
  Cell pos;
  Direction dir = Direction::Up;
  Item held = Item::Nothing;
  friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct EnvState {
  LevelPtr level;
  std::array<AgentState, 2> agents;
  std::vector<PotState> pots;      // parallel to level->pot_cells()
  std::vector<Item> counter_items;  // one slot per cell, Nothing elsewhere
  int t = 0;
  int horizon = kDefaultHorizon;
  std::uint64_t seed = 0;

  bool done() const { return t >= horizon; }
  Item counter_item(Cell c) const {
    return counter_items[static_cast<std::size_t>(level->index(c))];
  }

  friend bool operator==(const EnvState& a, const EnvState& b) {
    return *a.level == *b.level && a.agents == b.agents && a.pots == b.pots &&
           a.counter_items == b.counter_items && a.t == b.t &&
           a.horizon == b.horizon && a.seed == b.seed;
  }
};

// Per-agent record of what fired during one step.
struct AgentEvents {
  bool place_onion = false;
  bool pickup_plate_while_cooking = false;
  bool pickup_soup = false;
  bool deliver = false;
  friend bool operator==(const AgentEvents&, const AgentEvents&) = default;
};

struct EventSet {
  std::array<AgentEvents, 2> agent;

  int count_place_onion() const {
    return agent[0].place_onion + agent[1].place_onion;
  }
  int count_plate_pickup() const {
    return agent[0].pickup_plate_while_cooking +
           agent[1].pickup_plate_while_cooking;
  }
  int count_soup_pickup() const {
    return agent[0].pickup_soup + agent[1].pickup_soup;
  }
  int count_deliveries() const { return agent[0].deliver + agent[1].deliver; }
  friend bool operator==(const EventSet&, const EventSet&) = default;
};

// Reward recomputed from an event set: sparse delivery plus the scaled
// shaping terms.
double reward_from_events(const EventSet& events, const Recipe& recipe,
                          double shaping_coeff);

class StepError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Observation = std::vector<float>;

struct StepOutcome {
  double reward = 0.0;
  bool done = false;
  EventSet events;
};

struct StepResult {
  EnvState state;
  std::array<Observation, 2> obs;
  double reward = 0.0;
  bool done = false;
  EventSet events;
};

struct ResetResult {
  EnvState state;
  std::array<Observation, 2> obs;
};

ResetResult reset(LevelPtr level, std::uint64_t seed,
                  int horizon = kDefaultHorizon);
EnvState initial_state(LevelPtr level, std::uint64_t seed,
                       int horizon = kDefaultHorizon);

// Pure transition.
StepResult step(const EnvState& state, const JointAction& actions,
                double shaping_coeff);
// Same transition applied in place, without observation encoding.
StepOutcome step_inplace(EnvState& state, const JointAction& actions,
                         double shaping_coeff);

// Observation layout: one plane per feature, each plane row-major over the
// cells, in this order:
//   7 tile-kind one-hots, 3 counter-item one-hots (onion, plate, soup),
//   self position, other position, 4 self-direction, 4 other-direction,
//   pot onion fill, pot cook timer, pot ready
// then scalars: self held one-hot (4), other held one-hot (4),
// self direction one-hot (4), t / horizon.
inline constexpr int kPlanesPerCell = kNumTileKinds + 3 + 2 +
                                      2 * kNumDirections + 3;
inline constexpr int kScalarFeatures = 2 * kNumItems + kNumDirections + 1;

constexpr int observation_length(int width, int height) {
  return width * height * kPlanesPerCell + kScalarFeatures;
}

Observation encode_obs(const EnvState& state, int agent_index);
void encode_obs_into(const EnvState& state, int agent_index,
                     std::span<float> out);

// Upper bound on a single step's reward: each agent triggers at most one
// event per step, and a delivery outweighs every shaped event.
double max_step_reward(const Recipe& recipe, double shaping_coeff);

}  // namespace upd::env
