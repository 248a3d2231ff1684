#include "upd/trainer/rollout.hpp"

#include <cmath>

#include "upd/common/random.hpp"

namespace upd::trainer {

Canvas canvas_for(int obs_len, const env::GridLevel& level) {
  const int cells_total = obs_len - env::kScalarFeatures;
  if (cells_total > 0 && cells_total % env::kPlanesPerCell == 0) {
    const int cells = cells_total / env::kPlanesPerCell;
    for (int w = level.width(); w <= cells; ++w) {
      if (cells % w == 0 && cells / w >= level.height()) return {w, cells / w};
    }
  }
  throw nn::ShapeError("policy input of length " + std::to_string(obs_len) +
                       " cannot cover a " + std::to_string(level.width()) + "x" +
                       std::to_string(level.height()) + " level");
}

void encode_obs_canvas(const env::EnvState& state, int agent, Canvas canvas,
                       std::span<float> out) {
  const int w = state.level->width(), h = state.level->height();
  if (canvas.width == w && canvas.height == h) {
    env::encode_obs_into(state, agent, out);
    return;
  }
  if (canvas.width < w || canvas.height < h || static_cast<int>(out.size()) != canvas.obs_len())
    throw nn::ShapeError("observation canvas smaller than the level");
  thread_local std::vector<float> tmp;
  tmp.resize(static_cast<std::size_t>(env::observation_length(w, h)));
  env::encode_obs_into(state, agent, tmp);
  std::fill(out.begin(), out.end(), 0.0f);
  const int cells = w * h, ccells = canvas.width * canvas.height;
  for (int p = 0; p < env::kPlanesPerCell; ++p) {
    for (int y = 0; y < h; ++y) {
      const float* src = tmp.data() + p * cells + y * w;
      std::copy(src, src + w, out.data() + p * ccells + y * canvas.width);
    }
  }
  std::copy(tmp.end() - env::kScalarFeatures, tmp.end(), out.end() - env::kScalarFeatures);
}

RolloutBatch collect_rollouts(const nn::PolicyParams& ego,
                              const std::vector<EnvAssignment>& envs,
                              const RolloutOptions& opts) {
  const int E = static_cast<int>(envs.size());
  const int T = opts.horizon;
  const int O = opts.canvas.obs_len();
  if (O != ego.layout->obs_len()) throw nn::ShapeError("canvas does not match the policy input");
  constexpr int A = env::kNumActions;

  // Sequences: self-play envs record both seats, partner envs the ego seat.
  RolloutBatch b;
  b.T = T;
  std::vector<int> seq_of(static_cast<std::size_t>(2 * E), -1);
  for (int e = 0; e < E; ++e) {
    for (int k = 0; k < 2; ++k) {
      const bool ego_row = !envs[e].partner || envs[e].ego_seat == k;
      if (!ego_row) continue;
      seq_of[static_cast<std::size_t>(2 * e + k)] = static_cast<int>(b.seq_env.size());
      b.seq_env.push_back(e);
      b.seq_seat.push_back(k);
    }
  }
  b.S = static_cast<int>(b.seq_env.size());
  const int S = b.S;
  if (opts.record) {
    const std::size_t n = static_cast<std::size_t>(T) * S;
    b.obs.resize(static_cast<Eigen::Index>(n), O);
    b.partner_obs.resize(static_cast<Eigen::Index>(n), O);
    b.action.resize(n);
    b.partner_action.resize(n);
    b.logp.resize(n);
    b.value.resize(n);
    b.reward.resize(n);
    b.done.assign(n, 0);
    b.joint_actions.resize(static_cast<std::size_t>(T) * E);
    b.step_reward.resize(static_cast<std::size_t>(T) * E);
  }
  if (opts.record_dists) b.dists.resize(static_cast<std::size_t>(T) * E * 2);
  b.env_return.assign(static_cast<std::size_t>(E), 0.0);
  b.env_sparse_return.assign(static_cast<std::size_t>(E), 0.0);
  b.env_deliveries.assign(static_cast<std::size_t>(E), 0);

  std::vector<env::EnvState> states;
  std::vector<Rng> rngs;
  states.reserve(static_cast<std::size_t>(E));
  for (const EnvAssignment& a : envs) {
    if (a.partner) {
      if (static_cast<int>(a.partner->mask.size()) != A) throw nn::ShapeError("partner mask size");
      if (a.ego_seat != 0 && a.ego_seat != 1) throw nn::ShapeError("ego seat must be 0 or 1");
    }
    states.push_back(env::initial_state(a.level, a.env_seed, T));
    rngs.emplace_back(a.action_seed);
  }

  nn::HiddenBatch<float> hidden(*ego.layout, 2 * E);
  nn::Mat<float> obs(2 * E, O);
  nn::Mat<float> swapped(2 * E, O);
  std::vector<int> actions(static_cast<std::size_t>(2 * E));
  std::vector<int> swapped_actions(static_cast<std::size_t>(2 * E));
  std::array<double, A> dist{};

  for (int t = 0; t < T; ++t) {
    for (int e = 0; e < E; ++e) {
      for (int k = 0; k < 2; ++k) {
        encode_obs_canvas(states[e], k, opts.canvas,
                          {obs.row(2 * e + k).data(), static_cast<std::size_t>(O)});
      }
    }
    const nn::StepOutput<float> out = nn::forward_step(ego, obs, hidden);

    for (int e = 0; e < E; ++e) {
      const EnvAssignment& a = envs[e];
      for (int k = 0; k < 2; ++k) {
        const int r = 2 * e + k;
        double m = -INFINITY, z = 0.0;
        for (int j = 0; j < A; ++j) m = std::max(m, static_cast<double>(out.logits(r, j)));
        for (int j = 0; j < A; ++j) z += (dist[j] = std::exp(out.logits(r, j) - m));
        for (double& p : dist) p /= z;
        const bool ego_row = !a.partner || a.ego_seat == k;
        if (!ego_row) {
          for (int j = 0; j < A; ++j)
            dist[j] = a.partner->epsilon * a.partner->mask[j] + (1.0 - a.partner->epsilon) * dist[j];
        }
        const int act = rngs[e].categorical(std::span<const double>(dist));
        actions[static_cast<std::size_t>(r)] = act;
        if (opts.record_dists) b.dists[(static_cast<std::size_t>(t) * E + e) * 2 + k] = dist;
        if (ego_row && opts.record) {
          const std::size_t row = static_cast<std::size_t>(t) * S + seq_of[r];
          b.action[row] = act;
          b.logp[row] = static_cast<float>(std::log(std::max(dist[act], 1e-30)));
          b.value[row] = out.value(r);
          b.obs.row(static_cast<Eigen::Index>(row)) = obs.row(r);
          b.partner_obs.row(static_cast<Eigen::Index>(row)) = obs.row(2 * e + 1 - k);
        }
      }
    }

    for (int e = 0; e < E; ++e) {
      const env::JointAction ja{static_cast<env::Action>(actions[2 * e]),
                                static_cast<env::Action>(actions[2 * e + 1])};
      const env::StepOutcome o = env::step_inplace(states[e], ja, opts.shaping_coeff);
      b.env_return[e] += o.reward;
      const int deliveries = o.events.count_deliveries();
      b.env_deliveries[e] += deliveries;
      b.env_sparse_return[e] += deliveries * states[e].level->recipe().delivery_reward;
      if (opts.record) {
        b.joint_actions[static_cast<std::size_t>(t) * E + e] = ja;
        b.step_reward[static_cast<std::size_t>(t) * E + e] = o.reward;
        for (int k = 0; k < 2; ++k) {
          const int sq = seq_of[static_cast<std::size_t>(2 * e + k)];
          if (sq < 0) continue;
          const std::size_t row = static_cast<std::size_t>(t) * S + sq;
          b.reward[row] = static_cast<float>(o.reward);
          b.partner_action[row] = actions[static_cast<std::size_t>(2 * e + 1 - k)];
          b.done[row] = o.done ? 1 : 0;
        }
      }
      swapped.row(2 * e) = obs.row(2 * e + 1);
      swapped.row(2 * e + 1) = obs.row(2 * e);
      swapped_actions[static_cast<std::size_t>(2 * e)] = actions[static_cast<std::size_t>(2 * e + 1)];
      swapped_actions[static_cast<std::size_t>(2 * e + 1)] = actions[static_cast<std::size_t>(2 * e)];
    }
    if (t + 1 < T) hidden.push_partner(ego, swapped, swapped_actions);
  }
  return b;
}

}  // namespace upd::trainer
