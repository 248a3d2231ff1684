#include "upd/trainer/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "upd/common/random.hpp"

namespace upd::trainer {

GaeResult compute_gae(std::span<const float> reward, std::span<const float> value,
                      std::span<const std::uint8_t> done, int T, int S, double gamma,
                      double lambda, std::span<const float> last_value) {
  const std::size_t n = static_cast<std::size_t>(T) * S;
  if (reward.size() != n || value.size() != n || done.size() != n ||
      (!last_value.empty() && last_value.size() != static_cast<std::size_t>(S)))
    throw nn::ShapeError("compute_gae: inconsistent sizes");
  GaeResult g;
  g.advantage.assign(n, 0.0);
  g.value_target.assign(n, 0.0);
  for (int s = 0; s < S; ++s) {
    double next_adv = 0.0;
    double next_value = last_value.empty() ? 0.0 : last_value[static_cast<std::size_t>(s)];
    for (int t = T - 1; t >= 0; --t) {
      const std::size_t i = static_cast<std::size_t>(t) * S + s;
      const double live = done[i] ? 0.0 : 1.0;
      const double delta = reward[i] + gamma * next_value * live - value[i];
      next_adv = delta + gamma * lambda * live * next_adv;
      g.advantage[i] = next_adv;
      g.value_target[i] = next_adv + value[i];
      next_value = value[i];
    }
  }
  return g;
}

PpoStats ppo_update(nn::PolicyParams& params, nn::Adam& opt, const RolloutBatch& batch,
                    const GaeResult& gae, const PpoSettings& st, std::uint64_t rng_seed) {
  const int T = batch.T, S = batch.S, O = static_cast<int>(batch.obs.cols());
  Rng rng(rng_seed);
  std::vector<int> order(static_cast<std::size_t>(S));
  PpoStats stats;
  std::vector<float> grad;
  double kl_sum = 0, clip_sum = 0;

  for (int epoch = 0; epoch < st.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (int mb = 0; mb < st.minibatches; ++mb) {
      const int lo = static_cast<int>(static_cast<long>(S) * mb / st.minibatches);
      const int hi = static_cast<int>(static_cast<long>(S) * (mb + 1) / st.minibatches);
      const int B = hi - lo;
      if (B == 0) continue;

      nn::SequenceBatch<float> sb;
      sb.T = T;
      sb.B = B;
      sb.obs.resize(T * B, O);
      sb.partner_obs.resize(T * B, O);
      sb.partner_action.resize(static_cast<std::size_t>(T) * B);
      sb.episode_start.assign(static_cast<std::size_t>(T) * B, 0);
      nn::LossTargets<float> tg;
      tg.action.resize(static_cast<std::size_t>(T) * B);
      tg.old_logp.resize(T * B);
      tg.advantage.resize(T * B);
      tg.value_target.resize(T * B);
      for (int t = 0; t < T; ++t) {
        for (int j = 0; j < B; ++j) {
          const std::size_t src = static_cast<std::size_t>(t) * S + order[lo + j];
          const int dst = t * B + j;
          sb.obs.row(dst) = batch.obs.row(static_cast<Eigen::Index>(src));
          sb.partner_obs.row(dst) = batch.partner_obs.row(static_cast<Eigen::Index>(src));
          sb.partner_action[dst] = batch.partner_action[src];
          // A done at t - 1 means a fresh episode starts at t.
          if (t > 0 && batch.done[src - S]) sb.episode_start[dst] = 1;
          tg.action[dst] = batch.action[src];
          tg.old_logp(dst) = batch.logp[src];
          tg.advantage(dst) = static_cast<float>(gae.advantage[src]);
          tg.value_target(dst) = static_cast<float>(gae.value_target[src]);
        }
      }
      if (st.normalize_advantage && T * B > 1) {
        const double mean = tg.advantage.template cast<double>().mean();
        const double var = (tg.advantage.template cast<double>().array() - mean).square().mean();
        tg.advantage = ((tg.advantage.template cast<double>().array() - mean) / (std::sqrt(var) + 1e-8))
                           .template cast<float>()
                           .matrix();
      }

      const nn::LossBreakdown l = nn::loss_and_grad(params, sb, tg, st.loss, &grad);
      stats.grad_norm += nn::clip_grad_norm(grad, st.grad_clip);
      opt.step(params.values, grad, st.lr);
      ++params.version;

      stats.loss.total += l.total;
      stats.loss.policy += l.policy;
      stats.loss.value += l.value;
      stats.loss.entropy += l.entropy;
      stats.loss.moa += l.moa;
      kl_sum += l.approx_kl;
      clip_sum += l.clip_frac;
      ++stats.minibatch_updates;
    }
  }
  if (stats.minibatch_updates > 0) {
    const double n = stats.minibatch_updates;
    stats.loss.total /= n;
    stats.loss.policy /= n;
    stats.loss.value /= n;
    stats.loss.entropy /= n;
    stats.loss.moa /= n;
    stats.loss.approx_kl = kl_sum / n;
    stats.loss.clip_frac = clip_sum / n;
    stats.grad_norm /= n;
  }
  return stats;
}

}  // namespace upd::trainer
