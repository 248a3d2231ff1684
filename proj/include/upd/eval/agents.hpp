#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "upd/eval/scripted.hpp"
#include "upd/nn/params.hpp"
#include "upd/partner/partner.hpp"
#include "upd/trainer/rollout.hpp"

namespace upd::eval {

// Anything that can fill a seat for an episode. `observe` is called after
// every step with the state the actions were chosen in.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  virtual void reset(std::uint64_t seed) = 0;
  virtual env::Action act(const env::EnvState& state, int seat) = 0;
  virtual void observe(const env::EnvState& /*before*/, const env::JointAction& /*actions*/,
                       int /*seat*/) {}
};

class ScriptedPolicy : public Agent {
 public:
  ScriptedPolicy(ScriptedKind kind, std::vector<double> mask = {}, std::string label = {});
  std::string name() const override;
  void reset(std::uint64_t seed) override;
  env::Action act(const env::EnvState& state, int seat) override;

 private:
  ScriptedAgent agent_;
  std::string label_;
};

// A trained policy. With a partner spec it acts as the epsilon-mixture of
// itself and the spec's biased random policy. Greedy mode takes the argmax.
class PolicyAgent : public Agent {
 public:
  PolicyAgent(std::shared_ptr<const nn::PolicyParams> params, std::string label,
              std::optional<partner::PartnerSpec> mix = std::nullopt, bool greedy = false);
  std::string name() const override { return label_; }
  void reset(std::uint64_t seed) override;
  env::Action act(const env::EnvState& state, int seat) override;
  void observe(const env::EnvState& before, const env::JointAction& actions, int seat) override;

  // Distribution used for the last action.
  const std::vector<double>& last_dist() const { return dist_; }

 private:
  std::vector<float> encode(const env::EnvState& state, int seat) const;

  std::shared_ptr<const nn::PolicyParams> params_;
  std::string label_;
  std::optional<partner::PartnerSpec> mix_;
  bool greedy_;
  Rng rng_;
  nn::HiddenState hidden_;
  std::vector<double> dist_;
};

// Agent from a short descriptor:
//   random | stay | onion | plate | biased:<m0,...,m5>
//   ckpt:<path> | greedy:<path> | mix:<eps>:<m0,...,m5>:<path>
std::unique_ptr<Agent> make_agent(const std::string& descriptor);

}  // namespace upd::eval
