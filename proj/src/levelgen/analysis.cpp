#include <algorithm>
#include <deque>

#include "upd/levelgen/level_gen.hpp"

namespace upd::levelgen {

using env::Cell;
using env::GridLevel;
using env::Tile;

namespace {

std::vector<Cell> neighbors(const GridLevel& level, Cell c) {
  std::vector<Cell> out;
  for (int d = 0; d < env::kNumDirections; ++d) {
    const Cell n = env::neighbor(c, static_cast<env::Direction>(d));
    if (level.in_bounds(n)) out.push_back(n);
  }
  return out;
}

// Does floor region `comp` touch cell `c` (an impassable tile)?
bool region_touches(const GridLevel& level, const std::vector<int>& component,
                    int comp, Cell c) {
  for (const Cell& n : neighbors(level, c)) {
    if (component[static_cast<std::size_t>(level.index(n))] == comp) return true;
  }
  return false;
}

bool region_touches_kind(const GridLevel& level, const std::vector<int>& component,
                         int comp, Tile kind) {
  for (int i = 0; i < static_cast<int>(level.tiles().size()); ++i) {
    if (level.tiles()[static_cast<std::size_t>(i)] == kind &&
        region_touches(level, component, comp, level.cell(i))) {
      return true;
    }
  }
  return false;
}

// Fixed point over the given regions: which regions can hold onions, plates,
// soups, and whether any region can serve. `linked` tells whether a counter
// lets items pass between two regions.
bool solvable_over(const GridLevel& level, const std::vector<int>& component,
                   const std::vector<int>& regions, bool allow_handoff) {
  const std::size_t n = regions.size();
  auto linked = [&](std::size_t a, std::size_t b) {
    if (!allow_handoff) return false;
    for (int i = 0; i < static_cast<int>(level.tiles().size()); ++i) {
      if (level.tiles()[static_cast<std::size_t>(i)] != Tile::Counter) continue;
      const Cell c = level.cell(i);
      if (region_touches(level, component, regions[a], c) &&
          region_touches(level, component, regions[b], c)) {
        return true;
      }
    }
    return false;
  };

  std::vector<bool> onion(n), plate(n), soup(n);
  for (std::size_t r = 0; r < n; ++r) {
    onion[r] = region_touches_kind(level, component, regions[r], Tile::OnionPile);
    plate[r] = region_touches_kind(level, component, regions[r], Tile::PlatePile);
  }
  auto spread = [&](std::vector<bool>& have) {
    bool changed = false;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (a != b && have[a] && !have[b] && linked(a, b)) {
          have[b] = true;
          changed = true;
        }
    return changed;
  };
  while (spread(onion)) {}
  while (spread(plate)) {}

  for (const Cell& pot : level.pot_cells()) {
    bool fillable = false;
    for (std::size_t r = 0; r < n; ++r)
      fillable = fillable || (onion[r] && region_touches(level, component, regions[r], pot));
    if (!fillable) continue;
    for (std::size_t r = 0; r < n; ++r)
      if (plate[r] && region_touches(level, component, regions[r], pot)) soup[r] = true;
  }
  while (spread(soup)) {}

  for (std::size_t r = 0; r < n; ++r) {
    if (soup[r] && region_touches_kind(level, component, regions[r], Tile::ServingWindow)) {
      return true;
    }
  }
  return false;
}

}  // namespace

LevelReport analyze_level(const GridLevel& level) {
  LevelReport rep;
  rep.component.assign(level.tiles().size(), -1);
  for (int i = 0; i < static_cast<int>(level.tiles().size()); ++i) {
    if (level.tiles()[static_cast<std::size_t>(i)] != Tile::Floor ||
        rep.component[static_cast<std::size_t>(i)] != -1) {
      continue;
    }
    const int id = rep.num_components++;
    std::deque<Cell> frontier{level.cell(i)};
    rep.component[static_cast<std::size_t>(i)] = id;
    while (!frontier.empty()) {
      const Cell c = frontier.front();
      frontier.pop_front();
      for (const Cell& nb : neighbors(level, c)) {
        const auto k = static_cast<std::size_t>(level.index(nb));
        if (level.at(nb) == Tile::Floor && rep.component[k] == -1) {
          rep.component[k] = id;
          frontier.push_back(nb);
        }
      }
    }
  }

  for (int a = 0; a < 2; ++a) {
    const int comp = rep.component[static_cast<std::size_t>(level.index(level.spawns()[a]))];
    rep.agent_component[a] = comp;
    auto& reach = rep.agent_reach[a];
    reach.onion = region_touches_kind(level, rep.component, comp, Tile::OnionPile);
    reach.plate = region_touches_kind(level, rep.component, comp, Tile::PlatePile);
    reach.pot = region_touches_kind(level, rep.component, comp, Tile::Pot);
    reach.serve = region_touches_kind(level, rep.component, comp, Tile::ServingWindow);
    rep.solo_solvable[a] = solvable_over(level, rep.component, {comp}, false);
  }

  rep.shared_region = rep.agent_component[0] == rep.agent_component[1];
  std::vector<int> regions{rep.agent_component[0]};
  if (!rep.shared_region) regions.push_back(rep.agent_component[1]);
  rep.coop_solvable = solvable_over(level, rep.component, regions, true);
  if (!rep.shared_region) {
    for (int i = 0; i < static_cast<int>(level.tiles().size()); ++i) {
      if (level.tiles()[static_cast<std::size_t>(i)] == Tile::Counter &&
          region_touches(level, rep.component, regions[0], level.cell(i)) &&
          region_touches(level, rep.component, regions[1], level.cell(i))) {
        rep.handoff_counter = true;
      }
    }
  }
  return rep;
}

}  // namespace upd::levelgen
