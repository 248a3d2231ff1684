#include "upd/eval/agents.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "upd/nn/checkpoint.hpp"

namespace upd::eval {

ScriptedPolicy::ScriptedPolicy(ScriptedKind kind, std::vector<double> mask, std::string label)
    : agent_(make_scripted(kind, 0, std::move(mask))), label_(std::move(label)) {}

std::string ScriptedPolicy::name() const {
  return label_.empty() ? scripted_name(agent_.kind) : label_;
}

void ScriptedPolicy::reset(std::uint64_t seed) { agent_.rng = Rng(seed); }

env::Action ScriptedPolicy::act(const env::EnvState& state, int seat) {
  return scripted_act(agent_, state, seat);
}

PolicyAgent::PolicyAgent(std::shared_ptr<const nn::PolicyParams> params, std::string label,
                         std::optional<partner::PartnerSpec> mix, bool greedy)
    : params_(std::move(params)), label_(std::move(label)), mix_(std::move(mix)), greedy_(greedy) {
  if (!params_) throw std::invalid_argument("policy agent without parameters");
  if (params_->layout->n_actions() != env::kNumActions)
    throw nn::ShapeError("policy has the wrong number of actions");
  if (mix_) mix_->validate();
  hidden_ = nn::HiddenState::zeros(*params_->layout);
}

void PolicyAgent::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  hidden_ = nn::HiddenState::zeros(*params_->layout);
}

std::vector<float> PolicyAgent::encode(const env::EnvState& state, int seat) const {
  const trainer::Canvas canvas = trainer::canvas_for(params_->layout->obs_len(), *state.level);
  std::vector<float> obs(static_cast<std::size_t>(canvas.obs_len()));
  trainer::encode_obs_canvas(state, seat, canvas, obs);
  return obs;
}

env::Action PolicyAgent::act(const env::EnvState& state, int seat) {
  const std::vector<float> obs = encode(state, seat);
  if (mix_) {
    partner::PartnerStep st = partner::partner_action_dist(*mix_, *params_, obs, hidden_);
    dist_ = std::move(st.dist);
    hidden_ = std::move(st.hidden);
  } else {
    nn::ForwardResult r = nn::forward(*params_, obs, hidden_);
    dist_ = partner::softmax(r.logits);
    hidden_ = std::move(r.hidden);
  }
  if (greedy_)
    return static_cast<env::Action>(std::max_element(dist_.begin(), dist_.end()) - dist_.begin());
  return static_cast<env::Action>(rng_.categorical(std::span<const double>(dist_)));
}

void PolicyAgent::observe(const env::EnvState& before, const env::JointAction& actions, int seat) {
  hidden_.push_partner(encode(before, 1 - seat), static_cast<int>(actions[1 - seat]),
                       params_->layout->arch().history_len);
}

namespace {

std::vector<double> parse_mask(const std::string& s) {
  std::vector<double> m;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) m.push_back(std::stod(tok));
  return m;
}

std::shared_ptr<const nn::PolicyParams> load_params(const std::string& path) {
  return std::make_shared<const nn::PolicyParams>(nn::load_checkpoint(path).params);
}

}  // namespace

std::unique_ptr<Agent> make_agent(const std::string& d) {
  const auto colon = d.find(':');
  const std::string head = d.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : d.substr(colon + 1);
  try {
    if (head == "ckpt" || head == "greedy") {
      if (rest.empty()) throw std::invalid_argument("missing checkpoint path");
      return std::make_unique<PolicyAgent>(load_params(rest), d, std::nullopt, head == "greedy");
    }
    if (head == "mix") {
      const auto a = rest.find(':');
      const auto b = a == std::string::npos ? a : rest.find(':', a + 1);
      if (b == std::string::npos) throw std::invalid_argument("expected mix:<eps>:<mask>:<path>");
      partner::PartnerSpec spec;
      spec.epsilon = std::stod(rest.substr(0, a));
      spec.mask = parse_mask(rest.substr(a + 1, b - a - 1));
      return std::make_unique<PolicyAgent>(load_params(rest.substr(b + 1)), d, spec);
    }
    if (head == "biased") return std::make_unique<ScriptedPolicy>(ScriptedKind::Biased, parse_mask(rest), d);
    return std::make_unique<ScriptedPolicy>(parse_scripted_kind(head));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("bad agent '" + d + "': " + e.what());
  }
}

}  // namespace upd::eval
