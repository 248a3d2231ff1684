#include <doctest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "upd/env/env.hpp"
#include "upd/env/transcript.hpp"

using namespace upd::env;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string layout_path(const std::string& name) {
  return std::string(UPD_SOURCE_DIR) + "/layouts/" + name + ".layout";
}

LevelPtr make_level(std::string_view text) {
  return std::make_shared<const GridLevel>(parse_layout(text));
}

// 5x5 room, 3x3 open interior, items on the border.
constexpr std::string_view kOpenRoom =
    "XPXOX\n"
    "X1  X\n"
    "X   D\n"
    "X  2X\n"
    "XXSXX\n";

JointAction random_joint(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, kNumActions - 1);
  return {static_cast<Action>(d(rng)), static_cast<Action>(d(rng))};
}

}  // namespace

TEST_CASE("parse_layout transcribes tiles and spawns") {
  const GridLevel l = parse_layout(
      "XXPXX\n"
      "O 2 O\n"
      "X1  X\n"
      "XDXSX");
  CHECK(l.width() == 5);
  CHECK(l.height() == 4);
  CHECK(l.at({2, 0}) == Tile::Pot);
  CHECK(l.at({0, 1}) == Tile::OnionPile);
  CHECK(l.at({4, 1}) == Tile::OnionPile);
  CHECK(l.at({1, 3}) == Tile::PlatePile);
  CHECK(l.at({3, 3}) == Tile::ServingWindow);
  CHECK(l.at({1, 1}) == Tile::Floor);
  CHECK(l.at({0, 0}) == Tile::Counter);
  CHECK(l.spawns()[0] == Cell{1, 2});
  CHECK(l.spawns()[1] == Cell{2, 1});
  CHECK(l.at(l.spawns()[0]) == Tile::Floor);
  CHECK(l.pot_cells().size() == 1);
}

TEST_CASE("parse_layout rejects malformed layouts") {
  CHECK_THROWS_WITH_AS(parse_layout("XXPXX\nO 2 O\nX1  X\nXDXXX"),
                       "MissingTile(ServingWindow)", LevelError);
  CHECK_THROWS_AS(parse_layout("XXPXX\nO 2 O\nX1 X\nXDXSX"), LevelError);
  CHECK_THROWS_AS(parse_layout("XXPXX\nO 1 O\nX1  X\nXDXSX"), LevelError);
  CHECK_THROWS_AS(parse_layout("XXPXX\nO   O\nX1  X\nXDXSX"), LevelError);
  CHECK_THROWS_AS(parse_layout("XXPXX\nO 2  \nX1  X\nXDXSX"), LevelError);
  CHECK_THROWS_AS(parse_layout("XXPXX\nO 2 O\nX1 ?X\nXDXSX"), LevelError);
}

TEST_CASE("bundled layouts round-trip byte for byte") {
  for (const char* name : {"cramped_room", "asymmetric_advantages",
                           "coordination_ring", "counter_circuit",
                           "forced_coordination"}) {
    CAPTURE(name);
    const std::string text = read_file(layout_path(name));
    REQUIRE(!text.empty());
    CHECK(serialize_layout(parse_layout(text)) == text);
    CHECK(serialize_layout(load_layout_file(layout_path(name))) == text);
  }
}

TEST_CASE("reset is deterministic and places agents at spawns") {
  auto level = make_level(read_file(layout_path("cramped_room")));
  const ResetResult a = reset(level, 7);
  const ResetResult b = reset(level, 7);
  CHECK(a.state == b.state);
  CHECK(a.obs == b.obs);
  CHECK(a.state.agents[0].pos == level->spawns()[0]);
  CHECK(a.state.agents[1].pos == level->spawns()[1]);
  CHECK(a.state.t == 0);
  for (const auto& ag : a.state.agents) CHECK(ag.held == Item::Nothing);
  for (const auto& p : a.state.pots) CHECK(p == PotState{});

  // Encoding length recomputed from the plane inventory: 7 tile kinds,
  // 3 counter items, 2 positions, 2x4 directions, 3 pot features; 13 scalars.
  const int per_cell = 7 + 3 + 2 + 8 + 3;
  const int expected = level->width() * level->height() * per_cell + 4 + 4 + 4 + 1;
  CHECK(static_cast<int>(a.obs[0].size()) == expected);
  CHECK(a.obs[1].size() == a.obs[0].size());
}

TEST_CASE("Stay/Stay leaves the world unchanged") {
  auto level = make_level(read_file(layout_path("cramped_room")));
  const EnvState s0 = initial_state(level, 1);
  const StepResult r = step(s0, {Action::Stay, Action::Stay}, 1.0);
  CHECK(r.reward == 0.0);
  CHECK(r.state.agents == s0.agents);
  CHECK(r.state.pots == s0.pots);
  CHECK(r.state.counter_items == s0.counter_items);
  CHECK(r.state.t == 1);
}

TEST_CASE("picking up a ready soup pays the shaped reward") {
  auto level = make_level(kOpenRoom);
  EnvState s = initial_state(level, 0);
  // Agent 0 at (1,1) faces the pot at (1,0).
  s.agents[0].dir = Direction::Up;
  s.agents[0].held = Item::Plate;
  s.pots[0] = PotState{3, 0, true};
  const StepResult r = step(s, {Action::Interact, Action::Stay}, 1.0);
  CHECK(r.state.agents[0].held == Item::Soup);
  CHECK(r.reward == 5.0);
  CHECK(r.events.agent[0].pickup_soup);
  CHECK(r.state.pots[0] == PotState{});

  const StepResult unshaped = step(s, {Action::Interact, Action::Stay}, 0.0);
  CHECK(unshaped.reward == 0.0);
}

TEST_CASE("serving a soup pays the delivery reward") {
  auto level = make_level(kOpenRoom);
  EnvState s = initial_state(level, 0);
  // Serving window at (2,4); stand at (2,3) facing down.
  s.agents[1].pos = {3, 2};
  s.agents[0].pos = {2, 3};
  s.agents[0].dir = Direction::Down;
  s.agents[0].held = Item::Soup;
  const StepResult r = step(s, {Action::Interact, Action::Stay}, 1.0);
  CHECK(r.reward == level->recipe().delivery_reward);
  CHECK(r.reward == 20.0);
  CHECK(r.state.agents[0].held == Item::Nothing);
  CHECK(r.events.agent[0].deliver);
}

TEST_CASE("onion placement fills the pot and starts cooking") {
  auto level = make_level(kOpenRoom);
  EnvState s = initial_state(level, 0);
  s.agents[0].held = Item::Onion;
  s.pots[0].onions = 2;
  StepResult r = step(s, {Action::Interact, Action::Stay}, 1.0);
  CHECK(r.reward == 3.0);
  CHECK(r.events.agent[0].place_onion);
  CHECK(r.state.pots[0].onions == 3);
  // Cooking counts down from the filling step.
  CHECK(r.state.pots[0].timer == level->recipe().cook_time - 1);
  EnvState cur = r.state;
  for (int k = 1; k < level->recipe().cook_time; ++k) {
    CHECK_FALSE(cur.pots[0].ready);
    cur = step(cur, {Action::Stay, Action::Stay}, 1.0).state;
  }
  CHECK(cur.pots[0].ready);
  CHECK(cur.pots[0].timer == 0);
}

TEST_CASE("plate pickup is shaped only while a soup waits for a plate") {
  auto level = make_level(kOpenRoom);
  EnvState s = initial_state(level, 0);
  // Plate pile at (4,2); stand at (3,2) facing right.
  s.agents[1].pos = {3, 2};
  s.agents[1].dir = Direction::Right;
  StepResult idle = step(s, {Action::Stay, Action::Interact}, 1.0);
  CHECK(idle.state.agents[1].held == Item::Plate);
  CHECK(idle.reward == 0.0);

  s.pots[0] = PotState{3, 10, false};
  StepResult cooking = step(s, {Action::Stay, Action::Interact}, 1.0);
  CHECK(cooking.reward == 3.0);
  CHECK(cooking.events.agent[1].pickup_plate_while_cooking);

  // A plate already in play covers the single cooking pot.
  s.agents[0].held = Item::Plate;
  StepResult covered = step(s, {Action::Stay, Action::Interact}, 1.0);
  CHECK(covered.reward == 0.0);
}

TEST_CASE("counters hold one item for hand-offs") {
  auto level = make_level(read_file(layout_path("forced_coordination")));
  EnvState s = initial_state(level, 0);
  // Agent 1 spawns at (1,2); counter at (2,2) to its right.
  s.agents[1].held = Item::Onion;
  s.agents[1].dir = Direction::Right;
  EnvState after = step(s, {Action::Stay, Action::Interact}, 1.0).state;
  CHECK(after.agents[1].held == Item::Nothing);
  CHECK(after.counter_item({2, 2}) == Item::Onion);
  // Agent 0 at (3,1) steps down to (3,2) then faces left and takes it.
  after = step(after, {Action::Down, Action::Stay}, 1.0).state;
  REQUIRE(after.agents[0].pos == Cell{3, 2});
  after = step(after, {Action::Left, Action::Stay}, 1.0).state;
  CHECK(after.agents[0].pos == Cell{3, 2});
  CHECK(after.agents[0].dir == Direction::Left);
  after = step(after, {Action::Interact, Action::Stay}, 1.0).state;
  CHECK(after.agents[0].held == Item::Onion);
  CHECK(after.counter_item({2, 2}) == Item::Nothing);
}

TEST_CASE("collision rule matches the exhaustive proposal oracle") {
  auto level = make_level(kOpenRoom);
  std::vector<Cell> floor;
  for (int y = 1; y <= 3; ++y)
    for (int x = 1; x <= 3; ++x) floor.push_back({x, y});

  int conflicts = 0;
  for (Cell p0 : floor) {
    for (Cell p1 : floor) {
      if (p0 == p1) continue;
      for (int a0 = 0; a0 < kNumActions; ++a0) {
        for (int a1 = 0; a1 < kNumActions; ++a1) {
          EnvState s = initial_state(level, 0);
          s.agents[0].pos = p0;
          s.agents[1].pos = p1;
          const JointAction ja{static_cast<Action>(a0), static_cast<Action>(a1)};
          const StepResult r = step(s, ja, 0.0);

          // Oracle: each agent's wish is its neighbor if that neighbor is
          // interior floor, else its own cell. Wishes are granted together
          // iff they end on distinct cells and the agents do not trade places.
          auto wish = [&](Cell p, int a) {
            if (a >= 4) return p;
            Cell n = neighbor(p, static_cast<Direction>(a));
            const bool interior = n.x >= 1 && n.x <= 3 && n.y >= 1 && n.y <= 3;
            return interior ? n : p;
          };
          const Cell w0 = wish(p0, a0);
          const Cell w1 = wish(p1, a1);
          const std::set<std::pair<int, int>> ends{{w0.x, w0.y}, {w1.x, w1.y}};
          const bool traded = w0 == p1 && w1 == p0;
          const bool granted = ends.size() == 2 && !traded;
          const Cell e0 = granted ? w0 : p0;
          const Cell e1 = granted ? w1 : p1;
          conflicts += !granted;
          CHECK(r.state.agents[0].pos == e0);
          CHECK(r.state.agents[1].pos == e1);
          CHECK(r.state.agents[0].pos != r.state.agents[1].pos);
        }
      }
    }
  }
  CHECK(conflicts > 0);

  // Both agents step toward the same cell: neither moves.
  EnvState s = initial_state(level, 0);
  s.agents[0].pos = {1, 2};
  s.agents[1].pos = {3, 2};
  const StepResult r = step(s, {Action::Right, Action::Left}, 0.0);
  CHECK(r.state.agents[0].pos == Cell{1, 2});
  CHECK(r.state.agents[1].pos == Cell{3, 2});
}

TEST_CASE("episode ends at the horizon and refuses further steps") {
  auto level = make_level(kOpenRoom);
  EnvState s = initial_state(level, 0, 3);
  bool done = false;
  for (int i = 0; i < 3; ++i) {
    CHECK_FALSE(done);
    done = step_inplace(s, {Action::Stay, Action::Stay}, 0.0).done;
  }
  CHECK(done);
  CHECK_THROWS_AS(step_inplace(s, {Action::Stay, Action::Stay}, 0.0), StepError);
}

TEST_CASE("observation encoding properties") {
  auto level = make_level(kOpenRoom);
  const EnvState s = initial_state(level, 0);
  const int cells = level->width() * level->height();
  const Observation o = encode_obs(s, 0);
  // Pot timer plane (index 21) at the pot cell is zero for an empty pot.
  const int pot_cell = level->index(level->pot_cells()[0]);
  CHECK(o[static_cast<std::size_t>((kPlanesPerCell - 2) * cells + pot_cell)] == 0.0f);

  SUBCASE("self/other swap") {
    EnvState a = s;
    a.agents[0] = {{1, 1}, Direction::Left, Item::Onion};
    a.agents[1] = {{3, 3}, Direction::Down, Item::Plate};
    a.pots[0] = {1, 0, false};
    EnvState b = a;
    std::swap(b.agents[0], b.agents[1]);
    CHECK(encode_obs(a, 0) == encode_obs(b, 1));
    CHECK(encode_obs(a, 1) == encode_obs(b, 0));
    CHECK(encode_obs(a, 0) != encode_obs(a, 1));
  }

  SUBCASE("fuzzed rollout stays in the unit interval") {
    auto cr = make_level(read_file(layout_path("cramped_room")));
    std::mt19937_64 rng(3);
    EnvState cur = initial_state(cr, 3, 1000);
    for (int t = 0; t < 1000; ++t) {
      for (int i = 0; i < 2; ++i) {
        for (float f : encode_obs(cur, i)) {
          REQUIRE(std::isfinite(f));
          REQUIRE(f >= 0.0f);
          REQUIRE(f <= 1.0f);
        }
      }
      step_inplace(cur, random_joint(rng), 1.0);
    }
  }
}

TEST_CASE("random play invariants") {
  for (const char* name : {"cramped_room", "asymmetric_advantages",
                           "coordination_ring", "counter_circuit",
                           "forced_coordination"}) {
    CAPTURE(name);
    auto level = make_level(read_file(layout_path(name)));
    const Recipe& recipe = level->recipe();
    std::mt19937_64 rng(11);
    // Biased toward interacting so that items actually move.
    std::discrete_distribution<int> pick({1, 1, 1, 1, 4, 1});
    EnvState s = initial_state(level, 5, 2000);
    double total = 0.0;
    int deliveries = 0;
    while (!s.done()) {
      const EnvState before = s;
      const JointAction ja{static_cast<Action>(pick(rng)),
                           static_cast<Action>(pick(rng))};
      const double coeff = std::uniform_real_distribution<double>(0, 1)(rng);
      const StepOutcome o = step_inplace(s, ja, coeff);
      total += o.reward;
      deliveries += o.events.count_deliveries();

      CHECK(o.reward >= 0.0);
      CHECK(o.reward <= max_step_reward(recipe, coeff));
      CHECK(o.reward == reward_from_events(o.events, recipe, coeff));
      CHECK(s.agents[0].pos != s.agents[1].pos);
      for (int i = 0; i < 2; ++i) {
        CHECK(level->passable(s.agents[i].pos));
        if (ja[i] != Action::Interact) {
          CHECK(s.agents[i].held == before.agents[i].held);
        }
      }
      const bool pot_event =
          o.events.count_place_onion() + o.events.count_soup_pickup() > 0;
      for (std::size_t p = 0; p < s.pots.size(); ++p) {
        CHECK(s.pots[p].onions >= 0);
        CHECK(s.pots[p].onions <= recipe.onions_per_soup);
        if (s.pots[p].ready) CHECK(s.pots[p].timer == 0);
        if (!pot_event) CHECK(s.pots[p].onions == before.pots[p].onions);
        if (before.pots[p].cooking(recipe.onions_per_soup)) {
          CHECK(s.pots[p].timer <= before.pots[p].timer);
        }
      }
    }
    CHECK(total >= 0.0);
    (void)deliveries;
  }
}

TEST_CASE("identical inputs give bit-identical trajectories") {
  auto level = make_level(read_file(layout_path("coordination_ring")));
  auto run = [&](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    EnvState s = initial_state(level, seed);
    std::vector<float> trace;
    while (!s.done()) {
      const StepResult r = step(s, random_joint(rng), 0.5);
      s = r.state;
      trace.push_back(static_cast<float>(r.reward));
      trace.insert(trace.end(), r.obs[0].begin(), r.obs[0].end());
    }
    return trace;
  };
  CHECK(run(42) == run(42));
}

TEST_CASE("transcript round-trip and replay") {
  auto level = make_level(read_file(layout_path("cramped_room")));
  std::mt19937_64 rng(9);
  std::discrete_distribution<int> pick({1, 1, 1, 1, 4, 1});
  Transcript tr;
  tr.layout = serialize_layout(*level);
  tr.seed = 9;
  tr.horizon = 400;
  EnvState s = initial_state(level, tr.seed, tr.horizon);
  while (!s.done()) {
    StepRecord rec;
    rec.t = s.t;
    rec.actions = {static_cast<Action>(pick(rng)), static_cast<Action>(pick(rng))};
    rec.shaping_coeff = 1.0 - s.t / 400.0;
    const StepOutcome o = step_inplace(s, rec.actions, rec.shaping_coeff);
    rec.reward = o.reward;
    rec.events = o.events;
    tr.steps.push_back(rec);
  }
  const Transcript back = transcript_from_jsonl(transcript_to_jsonl(tr));
  CHECK(back.steps == tr.steps);
  CHECK(back.layout == tr.layout);
  const ReplayReport rep = replay(back);
  CHECK(rep.ok());
  CHECK(rep.final_state == s);

  Transcript tampered = back;
  tampered.steps[17].reward += 1.0;
  CHECK_FALSE(replay(tampered).ok());
}
