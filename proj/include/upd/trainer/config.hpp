#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "upd/env/grid_level.hpp"
#include "upd/learnability/scores.hpp"
#include "upd/levelgen/level_gen.hpp"
#include "upd/nn/arch.hpp"

namespace upd::trainer {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Mode { SP, E3T_FIXED, UPD, DR_DR, CEC, SFL_E3T, JUPD };

Mode parse_mode(const std::string& s);  // case-insensitive, '-' and '_' alike
std::string mode_name(Mode m);

// Partner-curriculum settings shared by UPD, JUPD and the baselines that
// generate partners.
struct CurriculumConfig {
  int n_generated = 8192;
  int buffer = 512;
  int top_k = 512;
  int n_rollouts = 10;
  int refresh = 4;
  double alpha = 1.0;
  double p_bias = 0.5;
  bool scoring = true;   // off: fresh random partner per rollout
  bool bias = true;      // off: every mask uniform
  std::optional<double> fixed_epsilon;
  learnability::ScoreKind score = learnability::ScoreKind::Var;
  learnability::ScoreKind joint_score = learnability::ScoreKind::Cv2;
};

struct TrainConfig {
  Mode mode = Mode::SP;
  std::string layout = "cramped_room";
  std::uint64_t seed = 0;
  int n_envs = 512;
  std::int64_t total_steps = 50'000'000;
  std::int64_t shaping_horizon = 30'000'000;
  double lr = 1e-3;
  bool anneal_lr = true;
  int rollout_len = 400;
  int horizon = 400;
  int ppo_epochs = 6;
  int minibatches = 8;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double vf_coef = 1.0;
  double grad_clip = 0.5;
  double moa_coef = 1.0;
  bool detach_moa = false;
  double epsilon = 0.5;  // E3T_FIXED and SFL_E3T partners
  int canvas_width = 0;  // 0: size of the training levels
  int canvas_height = 0;
  int checkpoint_every = 0;  // updates; 0 keeps only the final checkpoint
  nn::ArchConfig arch;
  CurriculumConfig upd;
  levelgen::LevelGenConfig levelgen;

  void validate() const;

  std::int64_t steps_per_update() const {
    return static_cast<std::int64_t>(n_envs) * rollout_len;
  }
  int num_updates() const;
  bool uses_generated_levels() const {
    return mode == Mode::DR_DR || mode == Mode::CEC || mode == Mode::SFL_E3T ||
           mode == Mode::JUPD;
  }
};

// The full-scale defaults scaled down for a single machine.
TrainConfig desk_config();

// Key/value text: one "key = value" per line, '#' starts a comment.
// Unknown keys are errors.
void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value);
void apply_override(TrainConfig& cfg, const std::string& assignment);  // "key=value"
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config_file(const std::filesystem::path& path, TrainConfig base = {});
std::string config_to_text(const TrainConfig& cfg);

// Bundled layout by name, or a layout file path.
std::filesystem::path layout_dir();
env::LevelPtr resolve_layout(const std::string& name_or_path);

}  // namespace upd::trainer
