#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "upd/nn/network.hpp"
#include "upd/nn/optim.hpp"
#include "upd/trainer/rollout.hpp"

namespace upd::trainer {

struct GaeResult {
  std::vector<double> advantage;
  std::vector<double> value_target;
};

// Standard backward GAE recursion over time-major rows t * S + s. A done
// flag at (t, s) ends the episode after step t; otherwise the last step
// bootstraps from `last_value` (zeros when empty).
GaeResult compute_gae(std::span<const float> reward, std::span<const float> value,
                      std::span<const std::uint8_t> done, int T, int S, double gamma,
                      double lambda, std::span<const float> last_value = {});

struct PpoSettings {
  int epochs = 6;
  int minibatches = 8;
  double lr = 1e-3;
  double grad_clip = 0.5;
  nn::LossSpec loss;
  bool normalize_advantage = true;
};

struct PpoStats {
  nn::LossBreakdown loss;  // averaged over minibatches
  double grad_norm = 0.0;  // mean pre-clip norm
  int minibatch_updates = 0;
};

// Epochs of minibatch PPO over whole sequences. `rng_seed` drives the
// sequence shuffle.
PpoStats ppo_update(nn::PolicyParams& params, nn::Adam& opt, const RolloutBatch& batch,
                    const GaeResult& gae, const PpoSettings& settings, std::uint64_t rng_seed);

}  // namespace upd::trainer
