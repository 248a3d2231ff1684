#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "upd/env/env.hpp"
#include "upd/nn/network.hpp"
#include "upd/partner/partner.hpp"

namespace upd::trainer {

// Observations are written into a fixed canvas so one policy can act on
// levels smaller than the one it was trained for. Cells outside the level
// are all-zero.
struct Canvas {
  int width = 0;
  int height = 0;
  int obs_len() const { return env::observation_length(width, height); }
  friend bool operator==(const Canvas&, const Canvas&) = default;
};

// Canvas for a policy with the given input length acting on `level`: the
// narrowest width >= level width whose height also fits. Throws
// nn::ShapeError when none exists.
Canvas canvas_for(int obs_len, const env::GridLevel& level);
void encode_obs_canvas(const env::EnvState& state, int agent, Canvas canvas,
                       std::span<float> out);

// One environment's setup for a rollout. Without a partner both seats are
// driven by the ego (self-play) and both are recorded.
struct EnvAssignment {
  env::LevelPtr level;
  std::optional<partner::PartnerSpec> partner;
  int ego_seat = 0;
  std::uint64_t env_seed = 0;
  std::uint64_t action_seed = 0;
};

struct RolloutOptions {
  int horizon = env::kDefaultHorizon;
  double shaping_coeff = 1.0;
  Canvas canvas;
  bool record = true;        // keep per-step training data
  bool record_dists = false;  // keep every agent's action distribution
};

// Whole episodes, time-major: row t * S + s for sequence s. Sequence order
// is env-major; self-play envs contribute seats 0 and 1, partner envs only
// the ego seat.
struct RolloutBatch {
  int T = 0;
  int S = 0;
  nn::Mat<float> obs;
  nn::Mat<float> partner_obs;
  std::vector<int> action;
  std::vector<int> partner_action;
  std::vector<float> logp;
  std::vector<float> value;
  std::vector<float> reward;  // training reward (shaped)
  std::vector<std::uint8_t> done;
  std::vector<int> seq_env;
  std::vector<int> seq_seat;

  // Per env.
  std::vector<double> env_return;         // shaped, as trained on
  std::vector<double> env_sparse_return;  // deliveries only
  std::vector<int> env_deliveries;

  // Per env and step when recording: joint actions and rewards (replay
  // oracle), row t * E + e.
  std::vector<env::JointAction> joint_actions;
  std::vector<double> step_reward;
  // Per env, step and seat when record_dists: row (t * E + e) * 2 + seat.
  std::vector<std::array<double, env::kNumActions>> dists;

  int rows() const { return T * S; }
};

RolloutBatch collect_rollouts(const nn::PolicyParams& ego,
                              const std::vector<EnvAssignment>& envs,
                              const RolloutOptions& opts);

}  // namespace upd::trainer
