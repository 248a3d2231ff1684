#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "upd/learnability/buffer.hpp"
#include "upd/nn/checkpoint.hpp"
#include "upd/nn/optim.hpp"
#include "upd/trainer/config.hpp"
#include "upd/trainer/ppo.hpp"
#include "upd/trainer/rollout.hpp"

namespace upd::trainer {

struct UpdateMetrics {
  int update = 0;
  std::int64_t step = 0;  // environment steps after this update
  Mode mode = Mode::SP;
  double mean_return = 0.0;         // shaped, as trained on
  double mean_sparse_return = 0.0;  // deliveries only
  double lr = 0.0;
  double shaping = 0.0;
  PpoStats ppo;
  bool refreshed = false;
  std::size_t buffer_size = 0;
  std::array<int, 10> eps_hist{};          // partner epsilon deciles
  std::array<double, env::kNumActions> mask_mean{};
  int n_partners = 0;
  double seconds = 0.0;
};

std::string metrics_to_json(const UpdateMetrics& m);

// Partner generation settings derived from the curriculum config.
partner::PartnerGenConfig partner_gen_config(const TrainConfig& cfg);

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  const nn::PolicyParams& params() const { return params_; }
  nn::PolicyParams& mutable_params() { return params_; }
  int update_index() const { return update_; }
  std::int64_t env_steps() const { return steps_; }
  bool finished() const { return update_ >= cfg_.num_updates(); }
  Canvas canvas() const { return canvas_; }
  const learnability::PartnerBuffer& buffer() const { return buffer_; }

  double shaping_coeff() const;
  double current_lr() const;
  RolloutOptions rollout_options() const;

  // Environment setup for the coming update; refreshes the partner or
  // level buffer first when it is due.
  std::vector<EnvAssignment> prepare_update();
  bool refreshed_last_prepare() const { return refreshed_; }

  // Scores a candidate set with the current ego (used by refreshes and
  // diagnostics). Each candidate gets n_rollouts episodes; the sparse
  // (delivery-only) returns go to `sparse` when given.
  std::vector<learnability::LearnabilityEntry> score_candidates(
      std::vector<learnability::LearnabilityEntry> candidates, int loop,
      std::vector<std::vector<double>>* sparse = nullptr) const;

  UpdateMetrics step();
  nn::Checkpoint checkpoint() const { return {params_, static_cast<std::uint64_t>(steps_)}; }

 private:
  env::LevelPtr generated_level(std::uint64_t seed) const;
  partner::PartnerSpec e3t_partner();
  partner::PartnerSpec fresh_partner(std::uint64_t seed);

  TrainConfig cfg_;
  env::LevelPtr fixed_level_;
  Canvas canvas_;
  nn::PolicyParams params_;
  nn::Adam adam_;
  learnability::PartnerBuffer buffer_;
  int update_ = 0;
  std::int64_t steps_ = 0;
  std::uint64_t next_id_ = 0;
  bool refreshed_ = false;
  std::vector<EnvAssignment> last_assignments_;
};

// Runs a full training job. With a non-empty out_dir it writes
// config.cfg, metrics.jsonl, buffer dumps, periodic checkpoints and
// final.ckpt there.
nn::Checkpoint train(const TrainConfig& cfg, const std::filesystem::path& out_dir,
                     const std::function<void(const UpdateMetrics&)>& on_update = {});

}  // namespace upd::trainer
