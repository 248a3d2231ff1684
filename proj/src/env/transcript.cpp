#include "upd/env/transcript.hpp"

#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace upd::env {

using nlohmann::json;

double Transcript::total_return() const {
  double sum = 0.0;
  for (const auto& s : steps) sum += s.reward;
  return sum;
}

namespace {

json events_to_json(const EventSet& ev) {
  json out = json::array();
  for (const AgentEvents& a : ev.agent) {
    json names = json::array();
    if (a.place_onion) names.push_back("place_onion");
    if (a.pickup_plate_while_cooking) names.push_back("pickup_plate");
    if (a.pickup_soup) names.push_back("pickup_soup");
    if (a.deliver) names.push_back("deliver");
    out.push_back(std::move(names));
  }
  return out;
}

EventSet events_from_json(const json& j) {
  EventSet ev;
  for (int i = 0; i < 2; ++i) {
    for (const auto& n : j.at(i)) {
      const std::string name = n.get<std::string>();
      if (name == "place_onion") {
        ev.agent[i].place_onion = true;
      } else if (name == "pickup_plate") {
        ev.agent[i].pickup_plate_while_cooking = true;
      } else if (name == "pickup_soup") {
        ev.agent[i].pickup_soup = true;
      } else if (name == "deliver") {
        ev.agent[i].deliver = true;
      } else {
        throw std::runtime_error("unknown event '" + name + "'");
      }
    }
  }
  return ev;
}

Action action_from_int(int a) {
  if (a < 0 || a >= kNumActions) {
    throw std::runtime_error("action index out of range");
  }
  return static_cast<Action>(a);
}

json step_to_json(const StepRecord& r) {
  return json{{"type", "step"},
              {"t", r.t},
              {"a", {static_cast<int>(r.actions[0]), static_cast<int>(r.actions[1])}},
              {"c", r.shaping_coeff},
              {"r", r.reward},
              {"ev", events_to_json(r.events)}};
}

StepRecord step_from_json(const json& j) {
  StepRecord r;
  r.t = j.at("t").get<int>();
  r.actions = {action_from_int(j.at("a").at(0).get<int>()),
               action_from_int(j.at("a").at(1).get<int>())};
  r.shaping_coeff = j.at("c").get<double>();
  r.reward = j.at("r").get<double>();
  r.events = events_from_json(j.at("ev"));
  return r;
}

}  // namespace

std::string step_record_to_line(const StepRecord& r) {
  return step_to_json(r).dump();
}

StepRecord step_record_from_line(std::string_view line) {
  return step_from_json(json::parse(line));
}

std::string transcript_to_jsonl(const Transcript& t) {
  std::string out;
  json header{{"type", "header"},
              {"layout", t.layout},
              {"onions_per_soup", t.recipe.onions_per_soup},
              {"cook_time", t.recipe.cook_time},
              {"delivery_reward", t.recipe.delivery_reward},
              {"seed", t.seed},
              {"horizon", t.horizon}};
  out += header.dump();
  out += '\n';
  for (const auto& s : t.steps) {
    out += step_record_to_line(s);
    out += '\n';
  }
  out += json{{"type", "end"}, {"return", t.total_return()}}.dump();
  out += '\n';
  return out;
}

Transcript transcript_from_jsonl(std::string_view text) {
  Transcript t;
  bool have_header = false;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "header") {
      t.layout = j.at("layout").get<std::string>();
      t.recipe.onions_per_soup = j.at("onions_per_soup").get<int>();
      t.recipe.cook_time = j.at("cook_time").get<int>();
      t.recipe.delivery_reward = j.at("delivery_reward").get<double>();
      t.seed = j.at("seed").get<std::uint64_t>();
      t.horizon = j.at("horizon").get<int>();
      have_header = true;
    } else if (type == "step") {
      t.steps.push_back(step_from_json(j));
    } else if (type == "end") {
      t.stated_return = j.at("return").get<double>();
    }
  }
  if (!have_header) throw std::runtime_error("transcript has no header");
  return t;
}

void save_transcript(const Transcript& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write transcript " + path);
  out << transcript_to_jsonl(t);
}

Transcript load_transcript(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open transcript " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return transcript_from_jsonl(ss.str());
}

ReplayReport replay(const Transcript& t) {
  auto level = std::make_shared<const GridLevel>(parse_layout(t.layout, t.recipe));
  ReplayReport rep;
  rep.final_state = initial_state(level, t.seed, t.horizon);
  rep.logged_return = t.stated_return.value_or(t.total_return());
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const StepRecord& rec = t.steps[i];
    if (rec.t != rep.final_state.t) {
      if (!rep.first_mismatch) rep.first_mismatch = static_cast<int>(i);
    }
    const StepOutcome o =
        step_inplace(rep.final_state, rec.actions, rec.shaping_coeff);
    rep.recomputed_return += o.reward;
    if ((o.reward != rec.reward || !(o.events == rec.events)) &&
        !rep.first_mismatch) {
      rep.first_mismatch = static_cast<int>(i);
    }
  }
  return rep;
}

}  // namespace upd::env
