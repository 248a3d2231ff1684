#include "upd/trainer/train.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include <json.hpp>

#include "upd/common/random.hpp"

namespace upd::trainer {

namespace {

// Stream tags for counter-based seeding.
enum : std::uint64_t {
  kInit = 1,
  kEnvSeed,
  kActionSeed,
  kPartnerSeed,
  kLevelSeed,
  kSelectSeed,
  kShuffleSeed,
  kScoreEnv,
  kScoreAction,
  kCandidate,
  kCandidateLevel,
};

bool needs_partner(Mode m) { return m != Mode::SP && m != Mode::CEC; }
bool uses_buffer(const TrainConfig& c) {
  return c.mode == Mode::JUPD || c.mode == Mode::SFL_E3T ||
         (c.mode == Mode::UPD && c.upd.scoring);
}

}  // namespace

partner::PartnerGenConfig partner_gen_config(const TrainConfig& cfg) {
  partner::PartnerGenConfig p;
  p.p_bias = cfg.upd.bias ? cfg.upd.p_bias : 0.0;
  p.alpha = cfg.upd.alpha;
  p.n_actions = env::kNumActions;
  p.fixed_epsilon = cfg.upd.fixed_epsilon;
  return p;
}

std::string metrics_to_json(const UpdateMetrics& m) {
  nlohmann::json j;
  j["update"] = m.update;
  j["step"] = m.step;
  j["mode"] = mode_name(m.mode);
  j["mean_return"] = m.mean_return;
  j["mean_sparse_return"] = m.mean_sparse_return;
  j["lr"] = m.lr;
  j["shaping"] = m.shaping;
  j["loss"] = m.ppo.loss.total;
  j["policy_loss"] = m.ppo.loss.policy;
  j["value_loss"] = m.ppo.loss.value;
  j["entropy"] = m.ppo.loss.entropy;
  j["moa_loss"] = m.ppo.loss.moa;
  j["approx_kl"] = m.ppo.loss.approx_kl;
  j["clip_frac"] = m.ppo.loss.clip_frac;
  j["grad_norm"] = m.ppo.grad_norm;
  j["refreshed"] = m.refreshed;
  j["buffer_size"] = m.buffer_size;
  j["n_partners"] = m.n_partners;
  j["eps_hist"] = m.eps_hist;
  j["mask_mean"] = m.mask_mean;
  j["seconds"] = m.seconds;
  return j.dump();
}

Trainer::Trainer(TrainConfig cfg)
    : cfg_(std::move(cfg)),
      buffer_(static_cast<std::size_t>(std::max(1, cfg_.upd.buffer)), std::max(1, cfg_.upd.refresh),
              static_cast<std::size_t>(std::max(1, cfg_.upd.top_k))) {
  cfg_.validate();
  if (cfg_.uses_generated_levels()) {
    canvas_ = {cfg_.levelgen.width, cfg_.levelgen.height};
  } else {
    fixed_level_ = resolve_layout(cfg_.layout);
    canvas_ = {fixed_level_->width(), fixed_level_->height()};
  }
  if (cfg_.canvas_width > 0) canvas_.width = std::max(canvas_.width, cfg_.canvas_width);
  if (cfg_.canvas_height > 0) canvas_.height = std::max(canvas_.height, cfg_.canvas_height);
  params_ = nn::init_params(stream_seed({cfg_.seed, kInit}), cfg_.arch, canvas_.obs_len(),
                            env::kNumActions);
  adam_ = nn::Adam(params_.values.size());
}

double Trainer::shaping_coeff() const {
  if (cfg_.shaping_horizon <= 0) return 0.0;
  return std::max(0.0, 1.0 - static_cast<double>(steps_) / static_cast<double>(cfg_.shaping_horizon));
}

double Trainer::current_lr() const {
  if (!cfg_.anneal_lr) return cfg_.lr;
  return cfg_.lr * (1.0 - static_cast<double>(update_) / cfg_.num_updates());
}

RolloutOptions Trainer::rollout_options() const {
  RolloutOptions o;
  o.horizon = cfg_.horizon;
  o.shaping_coeff = shaping_coeff();
  o.canvas = canvas_;
  return o;
}

env::LevelPtr Trainer::generated_level(std::uint64_t seed) const {
  return std::make_shared<const env::GridLevel>(levelgen::generate_level(seed, cfg_.levelgen));
}

partner::PartnerSpec Trainer::e3t_partner() {
  partner::PartnerSpec s;
  s.id = next_id_++;
  s.epsilon = cfg_.epsilon;
  s.mask = partner::uniform_mask(env::kNumActions);
  return s;
}

partner::PartnerSpec Trainer::fresh_partner(std::uint64_t seed) {
  Rng rng(seed);
  return partner::sample_partner_spec(rng, partner_gen_config(cfg_), next_id_++);
}

std::vector<learnability::LearnabilityEntry> Trainer::score_candidates(
    std::vector<learnability::LearnabilityEntry> candidates, int loop,
    std::vector<std::vector<double>>* sparse) const {
  const int N = cfg_.upd.n_rollouts;
  std::vector<EnvAssignment> all;
  all.reserve(candidates.size() * static_cast<std::size_t>(N));
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    for (int k = 0; k < N; ++k) {
      EnvAssignment a;
      a.level = candidates[c].level ? candidates[c].level : fixed_level_;
      a.partner = candidates[c].partner;
      a.ego_seat = k % 2;
      a.env_seed = stream_seed({cfg_.seed, static_cast<std::uint64_t>(loop), c, static_cast<std::uint64_t>(k), kScoreEnv});
      a.action_seed = stream_seed({cfg_.seed, static_cast<std::uint64_t>(loop), c, static_cast<std::uint64_t>(k), kScoreAction});
      all.push_back(std::move(a));
    }
  }
  RolloutOptions opts = rollout_options();
  opts.record = false;
  const std::size_t chunk = 256;
  std::vector<double> returns(all.size()), sparse_returns(all.size());
  for (std::size_t lo = 0; lo < all.size(); lo += chunk) {
    const std::size_t hi = std::min(all.size(), lo + chunk);
    const std::vector<EnvAssignment> part(all.begin() + static_cast<std::ptrdiff_t>(lo),
                                          all.begin() + static_cast<std::ptrdiff_t>(hi));
    const RolloutBatch b = collect_rollouts(params_, part, opts);
    std::copy(b.env_return.begin(), b.env_return.end(), returns.begin() + static_cast<std::ptrdiff_t>(lo));
    std::copy(b.env_sparse_return.begin(), b.env_sparse_return.end(),
              sparse_returns.begin() + static_cast<std::ptrdiff_t>(lo));
  }

  const bool joint = cfg_.mode == Mode::JUPD || cfg_.mode == Mode::SFL_E3T;
  const learnability::ScoreKind kind = joint ? cfg_.upd.joint_score : cfg_.upd.score;
  std::vector<std::vector<double>> per(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    per[c].assign(returns.begin() + static_cast<std::ptrdiff_t>(c * N),
                  returns.begin() + static_cast<std::ptrdiff_t>((c + 1) * N));
  }
  if (sparse) {
    sparse->assign(candidates.size(), {});
    for (std::size_t c = 0; c < candidates.size(); ++c)
      (*sparse)[c].assign(sparse_returns.begin() + static_cast<std::ptrdiff_t>(c * N),
                          sparse_returns.begin() + static_cast<std::ptrdiff_t>((c + 1) * N));
  }
  std::optional<learnability::PopulationStats> pop;
  if (kind == learnability::ScoreKind::Gauss) pop = learnability::population_stats(per);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    candidates[c].returns = std::move(per[c]);
    candidates[c].score = learnability::score(kind, candidates[c].returns, pop,
                                              fixed_level_ ? fixed_level_->recipe().delivery_reward
                                                           : cfg_.levelgen.recipe.delivery_reward);
    candidates[c].created_at = loop;
  }
  return candidates;
}

std::vector<EnvAssignment> Trainer::prepare_update() {
  const auto u = static_cast<std::uint64_t>(update_);
  const std::uint64_t seed = cfg_.seed;
  refreshed_ = false;

  if (uses_buffer(cfg_) && buffer_.refresh_due(update_)) {
    std::vector<learnability::LearnabilityEntry> cands(static_cast<std::size_t>(cfg_.upd.n_generated));
    const partner::PartnerGenConfig pg = partner_gen_config(cfg_);
    for (std::size_t c = 0; c < cands.size(); ++c) {
      auto& e = cands[c];
      if (cfg_.mode == Mode::SFL_E3T) {
        e.partner = e3t_partner();
      } else {
        Rng rng(stream_seed({seed, u, c, kCandidate}));
        e.partner = partner::sample_partner_spec(rng, pg, next_id_++);
      }
      if (cfg_.mode != Mode::UPD) {
        e.level_seed = stream_seed({seed, u, c, kCandidateLevel});
        e.level = generated_level(*e.level_seed);
      }
    }
    buffer_.refresh(score_candidates(std::move(cands), update_), update_);
    refreshed_ = true;
  }

  std::vector<EnvAssignment> out(static_cast<std::size_t>(cfg_.n_envs));
  for (int e = 0; e < cfg_.n_envs; ++e) {
    const auto ue = static_cast<std::uint64_t>(e);
    EnvAssignment& a = out[static_cast<std::size_t>(e)];
    a.env_seed = stream_seed({seed, u, ue, kEnvSeed});
    a.action_seed = stream_seed({seed, u, ue, kActionSeed});
    a.ego_seat = needs_partner(cfg_.mode) ? e % 2 : 0;
    a.level = fixed_level_;
    switch (cfg_.mode) {
      case Mode::SP:
        break;
      case Mode::CEC:
        a.level = generated_level(stream_seed({seed, u, ue, kLevelSeed}));
        break;
      case Mode::E3T_FIXED:
        a.partner = e3t_partner();
        break;
      case Mode::UPD:
        if (cfg_.upd.scoring) {
          Rng pick(stream_seed({seed, u, ue, kSelectSeed}));
          a.partner = buffer_.sample(pick).partner;
        } else {
          a.partner = fresh_partner(stream_seed({seed, u, ue, kPartnerSeed}));
        }
        break;
      case Mode::DR_DR:
        a.level = generated_level(stream_seed({seed, u, ue, kLevelSeed}));
        a.partner = fresh_partner(stream_seed({seed, u, ue, kPartnerSeed}));
        break;
      case Mode::SFL_E3T: {
        Rng pick(stream_seed({seed, u, ue, kSelectSeed}));
        a.level = buffer_.sample(pick).level;
        a.partner = e3t_partner();
        break;
      }
      case Mode::JUPD: {
        Rng pick(stream_seed({seed, u, ue, kSelectSeed}));
        const auto& entry = buffer_.sample(pick);
        a.level = entry.level;
        a.partner = entry.partner;
        break;
      }
    }
  }
  last_assignments_ = out;
  return out;
}

UpdateMetrics Trainer::step() {
  if (finished()) throw ConfigError("training already finished");
  const auto t0 = std::chrono::steady_clock::now();
  UpdateMetrics m;
  m.update = update_;
  m.mode = cfg_.mode;
  m.lr = current_lr();
  m.shaping = shaping_coeff();

  const std::vector<EnvAssignment> envs = prepare_update();
  m.refreshed = refreshed_;
  const RolloutBatch batch = collect_rollouts(params_, envs, rollout_options());
  const GaeResult gae = compute_gae(batch.reward, batch.value, batch.done, batch.T, batch.S,
                                    cfg_.gamma, cfg_.gae_lambda);
  PpoSettings ps;
  ps.epochs = cfg_.ppo_epochs;
  ps.minibatches = cfg_.minibatches;
  ps.lr = m.lr;
  ps.grad_clip = cfg_.grad_clip;
  ps.loss.clip = cfg_.clip;
  ps.loss.vf_coef = cfg_.vf_coef;
  ps.loss.ent_coef = cfg_.entropy_coef;
  ps.loss.moa_coef = cfg_.moa_coef;
  ps.loss.detach_moa_prediction = cfg_.detach_moa;
  m.ppo = ppo_update(params_, adam_, batch, gae, ps,
                     stream_seed({cfg_.seed, static_cast<std::uint64_t>(update_), kShuffleSeed}));

  for (std::size_t e = 0; e < batch.env_return.size(); ++e) {
    m.mean_return += batch.env_return[e];
    m.mean_sparse_return += batch.env_sparse_return[e];
  }
  m.mean_return /= static_cast<double>(batch.env_return.size());
  m.mean_sparse_return /= static_cast<double>(batch.env_return.size());

  // Partner statistics: the buffer's sampling pool when there is one,
  // otherwise the partners used this update.
  std::vector<const partner::PartnerSpec*> partners;
  std::vector<learnability::LearnabilityEntry> pool;
  if (uses_buffer(cfg_) && cfg_.mode != Mode::SFL_E3T) {
    pool = buffer_.top_k();
    for (const auto& e : pool) partners.push_back(&e.partner);
  } else {
    for (const auto& a : envs)
      if (a.partner) partners.push_back(&*a.partner);
  }
  for (const partner::PartnerSpec* p : partners) {
    ++m.eps_hist[static_cast<std::size_t>(std::min(9, static_cast<int>(p->epsilon * 10.0)))];
    for (int j = 0; j < env::kNumActions; ++j) m.mask_mean[j] += p->mask[j];
  }
  m.n_partners = static_cast<int>(partners.size());
  if (!partners.empty())
    for (double& v : m.mask_mean) v /= static_cast<double>(partners.size());
  m.buffer_size = buffer_.size();

  steps_ += cfg_.steps_per_update();
  ++update_;
  m.step = steps_;
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

nn::Checkpoint train(const TrainConfig& cfg, const std::filesystem::path& out_dir,
                     const std::function<void(const UpdateMetrics&)>& on_update) {
  Trainer tr(cfg);
  std::ofstream metrics;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream(out_dir / "config.cfg") << config_to_text(cfg);
    metrics.open(out_dir / "metrics.jsonl", std::ios::trunc);
  }
  while (!tr.finished()) {
    const UpdateMetrics m = tr.step();
    if (!out_dir.empty()) {
      metrics << metrics_to_json(m) << '\n' << std::flush;
      if (m.refreshed) {
        std::filesystem::create_directories(out_dir / "buffer");
        std::ofstream(out_dir / "buffer" / ("loop_" + std::to_string(m.update) + ".tsv"))
            << tr.buffer().dump(m.update);
        if (cfg.mode == Mode::JUPD || cfg.mode == Mode::SFL_E3T) {
          std::ofstream lv(out_dir / "buffer" / ("levels_" + std::to_string(m.update) + ".txt"));
          for (const auto& e : tr.buffer().top_k()) {
            lv << "# id=" << e.partner.id << " score=" << e.score
               << " level_seed=" << e.level_seed.value_or(0) << '\n'
               << env::serialize_layout(*e.level) << '\n';
          }
        }
      }
      if (cfg.checkpoint_every > 0 && (m.update + 1) % cfg.checkpoint_every == 0) {
        nn::save_checkpoint(out_dir / ("ckpt_" + std::to_string(tr.env_steps()) + ".ckpt"),
                            tr.checkpoint());
      }
    }
    if (on_update) on_update(m);
  }
  nn::Checkpoint final = tr.checkpoint();
  if (!out_dir.empty()) nn::save_checkpoint(out_dir / "final.ckpt", final);
  return final;
}

}  // namespace upd::trainer
