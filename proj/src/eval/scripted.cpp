#include "upd/eval/scripted.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <deque>
#include <stdexcept>

namespace upd::eval {

using env::Action;
using env::Cell;
using env::Direction;
using env::Item;
using env::Tile;

namespace {

constexpr std::array<Direction, 4> kDirs{Direction::Up, Direction::Down, Direction::Left,
                                         Direction::Right};

Action move_action(Direction d) { return static_cast<Action>(static_cast<int>(d)); }

// Adjacent target in tie-break order, if any.
std::optional<Direction> adjacent_target(Cell c, const env::GridLevel& level,
                                         const std::function<bool(Cell)>& is_target) {
  for (Direction d : kDirs) {
    const Cell n = env::neighbor(c, d);
    if (level.in_bounds(n) && is_target(n)) return d;
  }
  return std::nullopt;
}

// BFS over floor; returns the first move of a shortest path to a standing
// cell next to a target.
std::optional<Direction> first_move(const env::EnvState& s, int i, Cell blocked, bool avoid,
                                    const std::function<bool(Cell)>& is_target) {
  const env::GridLevel& level = *s.level;
  const Cell start = s.agents[i].pos;
  std::vector<int> first(static_cast<std::size_t>(level.width() * level.height()), -1);
  std::deque<Cell> q;
  first[static_cast<std::size_t>(level.index(start))] = 4;  // sentinel
  q.push_back(start);
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop_front();
    const int f = first[static_cast<std::size_t>(level.index(c))];
    if (!(c == start) && adjacent_target(c, level, is_target)) return static_cast<Direction>(f);
    for (Direction d : kDirs) {
      const Cell n = env::neighbor(c, d);
      if (!level.passable(n)) continue;
      if (avoid && n == blocked) continue;
      int& slot = first[static_cast<std::size_t>(level.index(n))];
      if (slot != -1) continue;
      slot = c == start ? static_cast<int>(d) : f;
      q.push_back(n);
    }
  }
  return std::nullopt;
}

}  // namespace

std::string scripted_name(ScriptedKind k) {
  switch (k) {
    case ScriptedKind::Random: return "random";
    case ScriptedKind::Stay: return "stay";
    case ScriptedKind::Biased: return "biased";
    case ScriptedKind::OnionWorker: return "onion_worker";
    case ScriptedKind::PlateWorker: return "plate_worker";
  }
  return "?";
}

ScriptedKind parse_scripted_kind(const std::string& s) {
  std::string k;
  for (char c : s) k += c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (ScriptedKind v : {ScriptedKind::Random, ScriptedKind::Stay, ScriptedKind::Biased,
                         ScriptedKind::OnionWorker, ScriptedKind::PlateWorker})
    if (scripted_name(v) == k) return v;
  if (k == "onion") return ScriptedKind::OnionWorker;
  if (k == "plate") return ScriptedKind::PlateWorker;
  throw std::invalid_argument("unknown scripted agent '" + s + "'");
}

ScriptedAgent make_scripted(ScriptedKind kind, std::uint64_t seed, std::vector<double> mask) {
  if (kind == ScriptedKind::Biased) {
    if (static_cast<int>(mask.size()) != env::kNumActions)
      throw std::invalid_argument("biased agent needs a mask over 6 actions");
    double sum = 0;
    for (double m : mask) {
      if (!(m >= 0)) throw std::invalid_argument("biased mask must be nonnegative");
      sum += m;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("biased mask must sum to 1");
  }
  return {kind, std::move(mask), Rng(seed)};
}

std::optional<Action> navigate(const env::EnvState& s, int i,
                               const std::function<bool(Cell)>& is_target) {
  const env::GridLevel& level = *s.level;
  const env::AgentState& me = s.agents[i];
  if (const auto d = adjacent_target(me.pos, level, is_target)) {
    // Prefer the faced target so a correctly-facing agent never turns away.
    const Cell faced = env::neighbor(me.pos, me.dir);
    if (level.in_bounds(faced) && is_target(faced)) return Action::Interact;
    return move_action(*d);
  }
  const Cell other = s.agents[1 - i].pos;
  auto d = first_move(s, i, other, true, is_target);
  if (!d) d = first_move(s, i, other, false, is_target);
  if (!d) return std::nullopt;
  return move_action(*d);
}

Action scripted_act(ScriptedAgent& a, const env::EnvState& s, int i) {
  const env::GridLevel& level = *s.level;
  const int need = level.recipe().onions_per_soup;
  auto pot_at = [&](Cell c) -> const env::PotState* {
    const int p = level.pot_index(c);
    return p < 0 ? nullptr : &s.pots[static_cast<std::size_t>(p)];
  };
  auto tile_is = [&](Tile t) { return [&level, t](Cell c) { return level.at(c) == t; }; };

  switch (a.kind) {
    case ScriptedKind::Random:
      return static_cast<Action>(a.rng.uniform_int(0, env::kNumActions - 1));
    case ScriptedKind::Stay:
      return Action::Stay;
    case ScriptedKind::Biased:
      return static_cast<Action>(a.rng.categorical(std::span<const double>(a.mask)));
    case ScriptedKind::OnionWorker: {
      const Item held = s.agents[i].held;
      std::optional<Action> act;
      auto open_pot = [&](Cell c) {
        const env::PotState* p = pot_at(c);
        return p && !p->full(need);
      };
      bool any_open = false;
      for (const env::PotState& p : s.pots) any_open |= !p.full(need);
      if (held == Item::Nothing && any_open) act = navigate(s, i, tile_is(Tile::OnionPile));
      else if (held == Item::Onion) act = navigate(s, i, open_pot);
      return act.value_or(Action::Stay);
    }
    case ScriptedKind::PlateWorker: {
      const Item held = s.agents[i].held;
      auto busy_pot = [&](Cell c) {
        const env::PotState* p = pot_at(c);
        return p && p->full(need);
      };
      bool any_busy = false;
      for (const env::PotState& p : s.pots) any_busy |= p.full(need);
      std::optional<Action> act;
      if (held == Item::Nothing && any_busy) {
        act = navigate(s, i, tile_is(Tile::PlatePile));
      } else if (held == Item::Plate) {
        act = navigate(s, i, busy_pot);
        // Wait beside a pot that is still cooking.
        if (act == Action::Interact) {
          const env::PotState* p = pot_at(env::neighbor(s.agents[i].pos, s.agents[i].dir));
          if (!p || !p->ready) act = Action::Stay;
        }
      } else if (held == Item::Soup) {
        act = navigate(s, i, tile_is(Tile::ServingWindow));
      }
      return act.value_or(Action::Stay);
    }
  }
  return Action::Stay;
}

}  // namespace upd::eval
