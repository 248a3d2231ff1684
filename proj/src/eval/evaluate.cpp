#include "upd/eval/evaluate.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace upd::eval {

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

enum : std::uint64_t { kEnv = 1, kEgo, kPartner };

}  // namespace

std::vector<std::string> default_suite() {
  return {"random", "stay", "biased:0.1,0.1,0.1,0.1,0.5,0.1", "biased:0.3,0.3,0.1,0.1,0.1,0.1",
          "onion"};
}

double EvalCell::mean() const { return mean_of(returns); }
double EvalCell::std() const { return std_of(returns); }

std::vector<EvalAggregate> EvalReport::aggregates() const {
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> pooled;
  std::vector<std::tuple<std::string, std::string, std::string>> order;
  for (const EvalCell& c : cells) {
    auto key = std::make_tuple(c.ego, c.partner, c.layout);
    if (!pooled.count(key)) order.push_back(key);
    auto& v = pooled[key];
    v.insert(v.end(), c.returns.begin(), c.returns.end());
  }
  std::vector<EvalAggregate> out;
  for (const auto& k : order) {
    const auto& v = pooled[k];
    out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), static_cast<int>(v.size()),
                   mean_of(v), std_of(v)});
  }
  return out;
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os.precision(6);
  os << "ego\tpartner\tlayout\tseat\tepisodes\tmean\tstd\n";
  for (const EvalCell& c : cells)
    os << c.ego << '\t' << c.partner << '\t' << c.layout << '\t' << c.seat << '\t'
       << c.returns.size() << '\t' << c.mean() << '\t' << c.std() << '\n';
  for (const EvalAggregate& a : aggregates())
    os << a.ego << '\t' << a.partner << '\t' << a.layout << "\tboth\t" << a.episodes << '\t'
       << a.mean << '\t' << a.std << '\n';
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["cells"] = nlohmann::json::array();
  for (const EvalCell& c : cells) {
    j["cells"].push_back({{"ego", c.ego}, {"partner", c.partner}, {"layout", c.layout},
                          {"seat", c.seat}, {"returns", c.returns}, {"mean", c.mean()},
                          {"std", c.std()}});
  }
  j["aggregates"] = nlohmann::json::array();
  for (const EvalAggregate& a : aggregates()) {
    j["aggregates"].push_back({{"ego", a.ego}, {"partner", a.partner}, {"layout", a.layout},
                               {"episodes", a.episodes}, {"mean", a.mean}, {"std", a.std}});
  }
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  EvalReport r;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    for (const auto& c : j.at("cells")) {
      EvalCell cell;
      cell.ego = c.at("ego").get<std::string>();
      cell.partner = c.at("partner").get<std::string>();
      cell.layout = c.at("layout").get<std::string>();
      cell.seat = c.at("seat").get<int>();
      cell.returns = c.at("returns").get<std::vector<double>>();
      r.cells.push_back(std::move(cell));
    }
  } catch (const nlohmann::json::exception& e) {
    throw EvalError(std::string("bad report: ") + e.what());
  }
  return r;
}

double play_episode(Agent& a0, Agent& a1, const env::LevelPtr& level, std::uint64_t env_seed,
                    int horizon, std::vector<env::JointAction>* actions) {
  env::EnvState s = env::initial_state(level, env_seed, horizon);
  double ret = 0.0;
  while (!s.done()) {
    const env::JointAction ja{a0.act(s, 0), a1.act(s, 1)};
    env::StepResult r = env::step(s, ja, 0.0);
    a0.observe(s, ja, 0);
    a1.observe(s, ja, 1);
    ret += r.reward;
    if (actions) actions->push_back(ja);
    s = std::move(r.state);
  }
  return ret;
}

EvalCell evaluate_pairing(Agent& ego, Agent& partner, const env::LevelPtr& level,
                          const std::string& layout_name, int seat, const EvalOptions& opts) {
  if (opts.episodes < 1) throw EvalError("episodes must be positive");
  if (seat != 0 && seat != 1) throw EvalError("seat must be 0 or 1");
  EvalCell cell{ego.name(), partner.name(), layout_name, seat, {}};
  const auto s = static_cast<std::uint64_t>(seat);
  for (int k = 0; k < opts.episodes; ++k) {
    const auto uk = static_cast<std::uint64_t>(k);
    ego.reset(stream_seed({opts.seed, s, uk, kEgo}));
    partner.reset(stream_seed({opts.seed, s, uk, kPartner}));
    const std::uint64_t env_seed = stream_seed({opts.seed, s, uk, kEnv});
    cell.returns.push_back(seat == 0 ? play_episode(ego, partner, level, env_seed, opts.horizon)
                                     : play_episode(partner, ego, level, env_seed, opts.horizon));
  }
  return cell;
}

std::vector<EvalCell> evaluate_both_seats(Agent& ego, Agent& partner, const env::LevelPtr& level,
                                          const std::string& layout_name, const EvalOptions& opts) {
  return {evaluate_pairing(ego, partner, level, layout_name, 0, opts),
          evaluate_pairing(ego, partner, level, layout_name, 1, opts)};
}

}  // namespace upd::eval
