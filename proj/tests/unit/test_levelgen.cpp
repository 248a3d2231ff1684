#include <doctest.h>

#include <deque>
#include <set>

#include "support/stats.hpp"
#include "upd/levelgen/level_gen.hpp"

using namespace upd;
using namespace upd::levelgen;
using env::Cell;
using env::Tile;

namespace {

// Independent oracle: flood fill from both spawns, then ask whether the
// union of reached cells faces a pot and a serving window.
bool jointly_reaches_pot_and_window(const env::GridLevel& level) {
  std::set<std::pair<int, int>> seen;
  std::deque<Cell> q(level.spawns().begin(), level.spawns().end());
  for (Cell s : level.spawns()) seen.insert({s.x, s.y});
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop_front();
    const Cell next[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
    for (Cell n : next) {
      if (level.passable(n) && seen.insert({n.x, n.y}).second) q.push_back(n);
    }
  }
  bool pot = false, window = false;
  for (auto [x, y] : seen) {
    const Cell next[4] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
    for (Cell n : next) {
      if (!level.in_bounds(n)) continue;
      pot = pot || level.at(n) == Tile::Pot;
      window = window || level.at(n) == Tile::ServingWindow;
    }
  }
  return pot && window;
}

}  // namespace

TEST_CASE("generated levels satisfy structural invariants") {
  const LevelGenConfig cfg;
  std::vector<long> budget_hist(10, 0);
  int reachable = 0;
  const int n = 10000;
  for (int seed = 0; seed < n; ++seed) {
    const GeneratedLevel g = generate_level_info(static_cast<std::uint64_t>(seed), cfg);
    const env::GridLevel& l = g.level;
    REQUIRE(l.width() == 5);
    REQUIRE(l.height() == 5);
    REQUIRE(g.wall_budget >= 1);
    REQUIRE(g.wall_budget <= 10);
    REQUIRE(g.interior_walls <= g.wall_budget);
    ++budget_hist[static_cast<std::size_t>(g.wall_budget - 1)];
    int items = 0;
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 5; ++x) {
        const Tile t = l.at({x, y});
        const bool border = x == 0 || y == 0 || x == 4 || y == 4;
        if (border) REQUIRE(t != Tile::Floor);
        if (t == Tile::Pot || t == Tile::OnionPile || t == Tile::PlatePile ||
            t == Tile::ServingWindow) {
          ++items;
          bool faces_floor = false;
          for (Cell nb : {Cell{x + 1, y}, Cell{x - 1, y}, Cell{x, y + 1}, Cell{x, y - 1}})
            faces_floor = faces_floor || l.passable(nb);
          REQUIRE(faces_floor);
        }
      }
    }
    REQUIRE(items == 4);
    REQUIRE(l.spawns()[0] != l.spawns()[1]);
    REQUIRE(l.at(l.spawns()[0]) == Tile::Floor);
    REQUIRE(l.at(l.spawns()[1]) == Tile::Floor);
    reachable += jointly_reaches_pot_and_window(l);
  }
  CHECK(testing::chi2_uniform_pvalue(budget_hist) > 0.01);
  CHECK(reachable > 0);
  CHECK(reachable < n);
}

TEST_CASE("generation is deterministic in the seed") {
  for (std::uint64_t seed : {0ULL, 17ULL, 123456789ULL}) {
    CHECK(generate_level(seed) == generate_level(seed));
  }
  int differing = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    differing += !(generate_level(seed) == generate_level(seed + 1));
  }
  CHECK(differing > 15);
}

TEST_CASE("generator configuration is validated") {
  LevelGenConfig cfg;
  cfg.width = 3;
  CHECK_THROWS_AS(generate_level(0, cfg), LevelGenError);
  cfg = {};
  cfg.max_wall_budget = 0;
  CHECK_THROWS_AS(generate_level(0, cfg), LevelGenError);
  cfg = {};
  cfg.min_wall_budget = 20;
  cfg.max_wall_budget = 20;
  CHECK_THROWS_AS(generate_level(0, cfg), LevelGenError);
  cfg = {};
  cfg.min_onions_per_soup = 1;
  cfg.max_onions_per_soup = 3;
  std::set<int> onions;
  for (std::uint64_t s = 0; s < 50; ++s)
    onions.insert(generate_level(s, cfg).recipe().onions_per_soup);
  CHECK(onions == std::set<int>{1, 2, 3});
}

TEST_CASE("larger generator sizes produce valid levels") {
  LevelGenConfig cfg;
  cfg.width = 9;
  cfg.height = 6;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto l = generate_level(s, cfg);
    CHECK(l.width() == 9);
    CHECK(l.height() == 6);
  }
}

TEST_CASE("analyze_level: open room") {
  const auto l = env::parse_layout(
      "XPODX\n"
      "X1  S\n"
      "X   X\n"
      "X  2X\n"
      "XXXXX\n");
  const LevelReport r = analyze_level(l);
  CHECK(r.num_components == 1);
  CHECK(r.shared_region);
  CHECK(r.coop_solvable);
  CHECK(r.solo_solvable[0]);
  CHECK(r.solo_solvable[1]);
}

TEST_CASE("analyze_level: split kitchen needs a hand-off") {
  const auto l = env::parse_layout(
      "XXXPX\n"
      "O X1P\n"
      "O2X X\n"
      "D X X\n"
      "XXXSX\n");
  const LevelReport r = analyze_level(l);
  CHECK(r.num_components == 2);
  CHECK_FALSE(r.shared_region);
  CHECK(r.handoff_counter);
  CHECK(r.coop_solvable);
  CHECK_FALSE(r.solo_solvable[0]);
  CHECK_FALSE(r.solo_solvable[1]);
  CHECK(r.agent_reach[0].pot);
  CHECK_FALSE(r.agent_reach[0].onion);
  CHECK(r.agent_reach[1].onion);
  CHECK_FALSE(r.agent_reach[1].serve);

  // Same split with a wall column instead of counters: no hand-off possible.
  const auto walled = env::parse_layout(
      "XXWPX\n"
      "O W1P\n"
      "O2W X\n"
      "D W X\n"
      "XXWSX\n");
  const LevelReport w = analyze_level(walled);
  CHECK_FALSE(w.handoff_counter);
  CHECK_FALSE(w.coop_solvable);
}

TEST_CASE("analyze_level: enclosed pot is unsolvable") {
  const auto l = env::parse_layout(
      "XXXXXXX\n"
      "XXXXX1S\n"
      "XXPXX X\n"
      "XXXXX2X\n"
      "XOXXXDX\n"
      "X XXXXX\n"
      "XXXXXXX\n");
  const LevelReport r = analyze_level(l);
  CHECK_FALSE(r.coop_solvable);
  CHECK_FALSE(r.agent_reach[0].pot);
}

TEST_CASE("analyze_level is deterministic and bounded on generated levels") {
  int solvable = 0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const auto l = generate_level(s);
    const LevelReport a = analyze_level(l);
    const LevelReport b = analyze_level(l);
    CHECK(a.coop_solvable == b.coop_solvable);
    CHECK(a.component == b.component);
    // Solo competence implies joint competence.
    if (a.solo_solvable[0] || a.solo_solvable[1]) CHECK(a.coop_solvable);
    // Joint competence needs the pair to reach a pot and a window.
    if (a.coop_solvable) CHECK(jointly_reaches_pot_and_window(l));
    solvable += a.coop_solvable;
  }
  CHECK(solvable > 0);
  CHECK(solvable < 2000);
}
