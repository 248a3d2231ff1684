#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "upd/env/grid_level.hpp"

namespace upd::levelgen {

struct LevelGenConfig {
  int width = 5;
  int height = 5;
  int min_wall_budget = 1;
  int max_wall_budget = 10;
  double p_dividing_wall = 0.3;
  double p_side_narrowing = 0.3;
  int items_per_kind = 1;
  // Inclusive range sampled per level; equal bounds pin the recipe.
  int min_onions_per_soup = 3;
  int max_onions_per_soup = 3;
  env::Recipe recipe;
  int max_retries = 64;

  void validate() const;
};

class LevelGenError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GeneratedLevel {
  env::GridLevel level;
  int wall_budget = 0;
  int interior_walls = 0;
  bool dividing_wall = false;
  bool side_narrowing = false;
  int attempts = 1;
};

GeneratedLevel generate_level_info(std::uint64_t seed, const LevelGenConfig& cfg);
env::GridLevel generate_level(std::uint64_t seed, const LevelGenConfig& cfg = {});

// Reachability summary. Items travel between the agents' floor regions only
// through counters adjacent to both regions.
struct LevelReport {
  int num_components = 0;
  std::vector<int> component;  // per cell, -1 when impassable
  std::array<int, 2> agent_component{-1, -1};
  // Item tiles each agent can face from its own region.
  struct Reach {
    bool onion = false;
    bool plate = false;
    bool pot = false;
    bool serve = false;
  };
  std::array<Reach, 2> agent_reach;
  std::array<bool, 2> solo_solvable{false, false};
  bool shared_region = false;
  bool handoff_counter = false;
  bool coop_solvable = false;
};

LevelReport analyze_level(const env::GridLevel& level);

}  // namespace upd::levelgen
