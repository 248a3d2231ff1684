#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "upd/common/random.hpp"
#include "upd/nn/network.hpp"

namespace upd::partner {

class PartnerError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PartnerGenConfig {
  double p_bias = 0.5;
  double alpha = 1.0;
  int n_actions = 6;
  // When set, every partner uses this mixing weight instead of U(0, 1).
  std::optional<double> fixed_epsilon;

  void validate() const;
};

// A candidate partner: with probability epsilon it acts from the biased
// random policy `mask`, otherwise from the current ego policy. The ego is
// not stored here; callers pass the live parameters.
struct PartnerSpec {
  std::uint64_t id = 0;
  double epsilon = 0.0;
  std::vector<double> mask;
  std::string ego_hash;  // informational, filled when recording curricula

  void validate() const;
  friend bool operator==(const PartnerSpec&, const PartnerSpec&) = default;
};

PartnerSpec sample_partner_spec(Rng& rng, const PartnerGenConfig& cfg, std::uint64_t id);

std::vector<double> uniform_mask(int n_actions);

// The biased random policy is memoryless: pi_r(a) = mask[a].
std::vector<double> biased_random_dist(std::span<const double> mask);

// epsilon * mask + (1 - epsilon) * ego, coordinate-wise.
std::vector<double> mix_dist(double epsilon, std::span<const double> mask,
                             std::span<const double> ego);

// Softmax of a logit row in double precision.
std::vector<double> softmax(std::span<const float> logits);

struct PartnerStep {
  std::vector<double> dist;
  nn::HiddenState hidden;  // the partner's own recurrent state, advanced
};

PartnerStep partner_action_dist(const PartnerSpec& spec, const nn::PolicyParams& ego,
                                std::span<const float> obs, const nn::HiddenState& hidden);

// One-line text record: "id=<n> eps=<x> mask=<a,b,...> ego=<hash>".
std::string to_record(const PartnerSpec& spec);
PartnerSpec from_record(const std::string& line);

}  // namespace upd::partner
