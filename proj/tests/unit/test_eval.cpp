#include <doctest.h>

#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>

#include "upd/eval/diagnostics.hpp"
#include "upd/eval/evaluate.hpp"
#include "upd/levelgen/level_gen.hpp"
#include "upd/nn/checkpoint.hpp"

using namespace upd;
using namespace upd::eval;
using env::Action;

namespace {

env::LevelPtr layout(const std::string& name) { return trainer::resolve_layout(name); }

env::LevelPtr open_room() {
  return std::make_shared<const env::GridLevel>(env::parse_layout(
      "XXXPXXX\n"
      "X     X\n"
      "O  1  X\n"
      "X     D\n"
      "X  2  X\n"
      "X     X\n"
      "XXXSXXX\n"));
}

// The pot sits on an island, reachable from four sides.
env::LevelPtr island_room() {
  return std::make_shared<const env::GridLevel>(env::parse_layout(
      "XXXXXXX\n"
      "O     X\n"
      "X  P  D\n"
      "X 1 2 X\n"
      "X     X\n"
      "XXXSXXX\n"));
}

nn::ArchConfig tiny_arch() {
  nn::ArchConfig a;
  a.embed_layers = 1;
  a.hidden = 16;
  a.gru_hidden = 16;
  a.actor_layers = 1;
  a.critic_layers = 1;
  a.moa_layers = 1;
  a.moa_hidden = 8;
  a.action_embed = 8;
  a.history_len = 3;
  return a;
}

std::shared_ptr<const nn::PolicyParams> tiny_policy(std::uint64_t seed, const env::GridLevel& lv) {
  return std::make_shared<const nn::PolicyParams>(nn::init_params(
      seed, tiny_arch(), env::observation_length(lv.width(), lv.height()), env::kNumActions));
}

// Floor distance between two cells, ignoring agents.
int floor_distance(const env::GridLevel& lv, env::Cell a, env::Cell b) {
  std::vector<int> dist(static_cast<std::size_t>(lv.width() * lv.height()), -1);
  std::deque<env::Cell> q{a};
  dist[lv.index(a)] = 0;
  while (!q.empty()) {
    const env::Cell c = q.front();
    q.pop_front();
    if (c == b) return dist[lv.index(c)];
    for (env::Cell n : {env::Cell{c.x, c.y - 1}, env::Cell{c.x, c.y + 1}, env::Cell{c.x - 1, c.y},
                        env::Cell{c.x + 1, c.y}}) {
      if (!lv.passable(n) || dist[lv.index(n)] >= 0) continue;
      dist[lv.index(n)] = dist[lv.index(c)] + 1;
      q.push_back(n);
    }
  }
  return -1;
}

}  // namespace

TEST_CASE("trivial scripted agents") {
  const auto lv = layout("cramped_room");
  env::EnvState s = env::initial_state(lv, 1);
  auto stay = make_scripted(ScriptedKind::Stay, 1);
  auto up = make_scripted(ScriptedKind::Biased, 2, {1, 0, 0, 0, 0, 0});
  auto rnd = make_scripted(ScriptedKind::Random, 3);
  std::vector<long> counts(6, 0);
  for (int t = 0; t < 300; ++t) {
    CHECK(scripted_act(stay, s, 0) == Action::Stay);
    CHECK(scripted_act(up, s, 1) == Action::Up);
    ++counts[static_cast<int>(scripted_act(rnd, s, 0))];
    s = env::step(s, {Action::Stay, Action::Up}, 0).state;
  }
  for (long c : counts) CHECK(c > 20);
  CHECK_THROWS(make_scripted(ScriptedKind::Biased, 0, {0.5, 0.6, 0, 0, 0, 0}));
  CHECK(parse_scripted_kind("Onion-Worker") == ScriptedKind::OnionWorker);
  CHECK_THROWS(parse_scripted_kind("planner"));
}

TEST_CASE("onion worker fills a pot within the path-length bound") {
  for (const auto& lv : {open_room(), island_room(), layout("cramped_room")}) {
    env::EnvState s = env::initial_state(lv, 4);
    auto w = make_scripted(ScriptedKind::OnionWorker, 0);
    const int diameter = lv->width() + lv->height();
    int t = 0;
    while (s.pots[0].onions == 0 && t < 4 * diameter) {
      s = env::step(s, {scripted_act(w, s, 0), Action::Stay}, 0).state;
      ++t;
    }
    CAPTURE(env::serialize_layout(*lv));
    CHECK(s.pots[0].onions + (s.pots.size() > 1 ? s.pots[1].onions : 0) >= 1);
    CHECK(t < 4 * diameter);
  }
}

TEST_CASE("navigation follows a shortest path") {
  const auto lv = open_room();
  env::EnvState s = env::initial_state(lv, 0);
  s.agents[1].pos = {5, 5};
  auto is_serve = [&](env::Cell c) { return lv->at(c) == env::Tile::ServingWindow; };
  const env::Cell stand{3, 5};
  const int d = floor_distance(*lv, s.agents[0].pos, stand);
  int steps = 0;
  while (true) {
    const auto a = navigate(s, 0, is_serve);
    REQUIRE(a);
    if (*a == Action::Interact) break;
    s = env::step(s, {*a, Action::Stay}, 0).state;
    ++steps;
    REQUIRE(steps < 20);
  }
  // d moves plus one turn to face down.
  CHECK(steps <= d + 1);
  CHECK(s.agents[0].pos == stand);
  // Nothing to reach: no action.
  CHECK_FALSE(navigate(s, 0, [](env::Cell) { return false; }));
}

TEST_CASE("onion and plate workers cook and serve together") {
  const auto lv = island_room();
  ScriptedPolicy onion(ScriptedKind::OnionWorker), plate(ScriptedKind::PlateWorker);
  const double r = play_episode(onion, plate, lv, 1, 400);
  CHECK(r >= 40.0);
  CHECK(std::fmod(r, 20.0) == 0.0);
}

TEST_CASE("a random ego with a Stay partner scores nothing where solo play is impossible") {
  const auto lv = layout("forced_coordination");
  const levelgen::LevelReport rep = levelgen::analyze_level(*lv);
  REQUIRE_FALSE(rep.solo_solvable[0]);
  REQUIRE_FALSE(rep.solo_solvable[1]);
  ScriptedPolicy ego(ScriptedKind::Random), stay(ScriptedKind::Stay);
  EvalOptions o;
  o.episodes = 8;
  for (const EvalCell& c : evaluate_both_seats(ego, stay, lv, "forced_coordination", o)) {
    CHECK(c.returns.size() == 8);
    CHECK(c.mean() == 0.0);
  }
}

TEST_CASE("greedy self-pairing matches the batched network") {
  const auto lv = layout("cramped_room");
  const auto params = tiny_policy(7, *lv);
  PolicyAgent a(params, "a", std::nullopt, true), b(params, "b", std::nullopt, true);
  a.reset(0);
  b.reset(0);
  std::vector<env::JointAction> acts;
  play_episode(a, b, lv, 3, 60, &acts);

  // Oracle: both seats through one two-row hidden batch, argmax actions.
  const int O = params->layout->obs_len();
  nn::HiddenBatch<float> hb(*params->layout, 2);
  env::EnvState s = env::initial_state(lv, 3, 60);
  for (int t = 0; t < 60; ++t) {
    nn::Mat<float> obs(2, O);
    for (int k = 0; k < 2; ++k) env::encode_obs_into(s, k, {obs.row(k).data(), static_cast<std::size_t>(O)});
    const auto out = nn::forward_step(*params, obs, hb);
    env::JointAction ja{};
    for (int k = 0; k < 2; ++k) {
      Eigen::Index j;
      out.logits.row(k).maxCoeff(&j);
      ja[k] = static_cast<Action>(j);
    }
    CHECK(ja == acts[t]);
    nn::Mat<float> swapped(2, O);
    swapped.row(0) = obs.row(1);
    swapped.row(1) = obs.row(0);
    const std::vector<int> pa{static_cast<int>(ja[1]), static_cast<int>(ja[0])};
    hb.push_partner(*params, swapped, pa);
    s = env::step(s, ja, 0).state;
  }
}

TEST_CASE("mixture partner agent uses the epsilon mixture") {
  const auto lv = layout("cramped_room");
  const auto params = tiny_policy(8, *lv);
  partner::PartnerSpec spec;
  spec.epsilon = 1.0;
  spec.mask = {0, 0, 0, 0, 0, 1};
  PolicyAgent p(params, "mix", spec);
  p.reset(1);
  const env::EnvState s = env::initial_state(lv, 0);
  for (int i = 0; i < 20; ++i) CHECK(p.act(s, 1) == Action::Stay);
  CHECK(p.last_dist()[5] == 1.0);
}

TEST_CASE("evaluation is deterministic and seat-averaged") {
  const auto lv = layout("cramped_room");
  const auto params = tiny_policy(9, *lv);
  PolicyAgent ego(params, "ego");
  ScriptedPolicy rnd(ScriptedKind::Random);
  EvalOptions o;
  o.episodes = 3;
  o.horizon = 100;
  EvalReport r1, r2;
  r1.cells = evaluate_both_seats(ego, rnd, lv, "cramped_room", o);
  r2.cells = evaluate_both_seats(ego, rnd, lv, "cramped_room", o);
  CHECK(r1.to_json() == r2.to_json());

  // Unequal episode counts: the pooled mean weights by episodes.
  r1.cells.push_back({"ego", "random", "cramped_room", 0, {20, 40, 0, 60, 20}});
  r1.cells.push_back({"x", "random", "cramped_room", 0, {20}});
  const auto agg = r1.aggregates();
  REQUIRE(agg.size() == 2);
  double sum = 0;
  int n = 0;
  for (const auto& c : r1.cells)
    if (c.ego == "ego") {
      sum += c.mean() * static_cast<double>(c.returns.size());
      n += static_cast<int>(c.returns.size());
    }
  CHECK(agg[0].episodes == n);
  CHECK(agg[0].mean == doctest::Approx(sum / n).epsilon(1e-12));

  const EvalReport back = EvalReport::from_json(r1.to_json());
  CHECK(back.to_table() == r1.to_table());
  CHECK(r1.to_table().find("\tboth\t") != std::string::npos);

  o.episodes = 0;
  CHECK_THROWS_AS(evaluate_pairing(ego, rnd, lv, "x", 0, o), EvalError);
  CHECK_THROWS_AS(EvalReport::from_json("{\"cells\": 3}"), EvalError);
}

TEST_CASE("agent descriptors") {
  CHECK(make_agent("stay")->name() == "stay");
  CHECK(make_agent("onion")->name() == "onion_worker");
  CHECK(make_agent("biased:0,0,0,0,1,0")->name() == "biased:0,0,0,0,1,0");
  CHECK_THROWS(make_agent("biased:1,1"));
  CHECK_THROWS(make_agent("ckpt:"));

  const auto dir = std::filesystem::temp_directory_path() / "upd_eval_agents";
  std::filesystem::create_directories(dir);
  const auto lv = layout("cramped_room");
  nn::save_checkpoint(dir / "a.ckpt", {*tiny_policy(1, *lv), 0});
  auto a = make_agent("greedy:" + (dir / "a.ckpt").string());
  auto m = make_agent("mix:0.5:0,0,0,0,0,1:" + (dir / "a.ckpt").string());
  a->reset(0);
  m->reset(0);
  const env::EnvState s = env::initial_state(lv, 0);
  CHECK(static_cast<int>(a->act(s, 0)) < 6);
  CHECK(static_cast<int>(m->act(s, 1)) < 6);
  // A policy cannot act on a level larger than its input.
  auto ring = layout("counter_circuit");
  CHECK_THROWS_AS(a->act(env::initial_state(ring, 0), 0), nn::ShapeError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("curriculum tables from training metrics") {
  trainer::TrainConfig c;
  c.mode = trainer::Mode::UPD;
  c.n_envs = 4;
  c.horizon = c.rollout_len = 20;
  c.total_steps = 3 * 80;
  c.shaping_horizon = c.total_steps;
  c.ppo_epochs = 1;
  c.minibatches = 1;
  c.arch = tiny_arch();
  c.upd.n_generated = 20;
  c.upd.buffer = 10;
  c.upd.top_k = 5;
  c.upd.n_rollouts = 2;
  std::string jsonl;
  trainer::train(c, {}, [&](const trainer::UpdateMetrics& m) { jsonl += trainer::metrics_to_json(m) + "\n"; });
  const auto rows = parse_curriculum(jsonl);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    double e = 0, m = 0;
    for (double v : r.eps_share) e += v;
    for (double v : r.mask_mean) m += v;
    CHECK(e == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m == doctest::Approx(1.0).epsilon(1e-9));
  }
  const std::string t = eps_decile_table(rows);
  CHECK(std::count(t.begin(), t.end(), '\n') == 4);
  CHECK(mask_mean_table(rows).find("Interact") != std::string::npos);
  CHECK_THROWS_AS(parse_curriculum("{\"update\": 1}\n"), DiagnosticsError);
}

TEST_CASE("an untrained ego scores most fresh partners low") {
  trainer::TrainConfig c = trainer::desk_config();
  c.mode = trainer::Mode::UPD;
  c.upd.n_rollouts = 4;
  trainer::Trainer init(c);
  const auto pts = learnability_scatter(c, init.params(), 256, 11);
  REQUIRE(pts.size() == 256);
  for (const auto& p : pts) CHECK(p.score >= 0.0);
  CHECK(low_return_share(pts, 0.25) >= 0.8);
  CHECK(scatter_table(pts).rfind("id\tepsilon\tscore\tmean_return\n", 0) == 0);
}
