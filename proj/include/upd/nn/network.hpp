#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "upd/nn/params.hpp"

namespace upd::nn {

// Recurrent state for a batch of agents: the GRU state plus the embedded
// partner history that feeds the partner-modelling head. History slot 0 is
// the most recent step; empty slots are zero.
template <typename S>
class HiddenBatch {
 public:
  HiddenBatch() = default;
  HiddenBatch(const ParamLayout& layout, int rows);

  int rows() const { return static_cast<int>(h.rows()); }
  void reset_row(int row);
  void reset_all();
  // Shifts every row's history by one slot and inserts the partner's latest
  // (observation, action). Rows with action < 0 get an empty slot.
  void push_partner(const Params<S>& params, const Mat<S>& partner_obs,
                    std::span<const int> partner_action);

  Mat<S> h;        // rows x gru_hidden
  Mat<S> history;  // rows x moa_input
};

// Single-agent view of the recurrent state.
struct HiddenState {
  struct Entry {
    std::vector<float> obs;
    int action = -1;
  };
  std::vector<float> gru_h;
  std::deque<Entry> partner_history;  // front is the most recent

  static HiddenState zeros(const ParamLayout& layout);
  void push_partner(std::vector<float> obs, int action, int history_len);
  friend bool operator==(const HiddenState& a, const HiddenState& b) {
    if (a.gru_h != b.gru_h || a.partner_history.size() != b.partner_history.size())
      return false;
    for (std::size_t i = 0; i < a.partner_history.size(); ++i) {
      if (a.partner_history[i].obs != b.partner_history[i].obs ||
          a.partner_history[i].action != b.partner_history[i].action)
        return false;
    }
    return true;
  }
};

template <typename S>
struct StepOutput {
  Mat<S> logits;      // rows x n_actions
  Vec<S> value;       // rows
  Mat<S> moa_logits;  // rows x n_actions
};

// One recurrent step for a batch; advances hidden.h in place. The partner
// history is updated separately through push_partner once the partner's
// action is known.
template <typename S>
StepOutput<S> forward_step(const Params<S>& params, const Mat<S>& obs,
                           HiddenBatch<S>& hidden);

struct ForwardResult {
  std::vector<float> logits;
  float value = 0.0f;
  std::vector<float> moa_logits;
  HiddenState hidden;
};

// Single-agent step. The returned hidden state has the GRU advanced; the
// partner history is extended by the caller once the partner has acted.
ForwardResult forward(const Params<float>& params, std::span<const float> obs,
                      const HiddenState& hidden);

// Time-major batch of whole sequences; row r = t * B + b. Every sequence
// starts an episode at t = 0; `episode_start` marks further resets.
template <typename S>
struct SequenceBatch {
  int T = 0;
  int B = 0;
  Mat<S> obs;
  Mat<S> partner_obs;
  std::vector<int> partner_action;
  std::vector<std::uint8_t> episode_start;

  int rows() const { return T * B; }
};

template <typename S>
struct SequenceOutput {
  Mat<S> logits;
  Vec<S> value;
  Mat<S> moa_logits;
};

template <typename S>
SequenceOutput<S> forward_sequence(const Params<S>& params,
                                   const SequenceBatch<S>& batch);

// Composite PPO objective:
//   clipped surrogate + vf_coef * MSE(value) - ent_coef * entropy
//   + moa_coef * cross-entropy(partner action)
struct LossSpec {
  double clip = 0.2;
  double vf_coef = 1.0;
  double ent_coef = 0.01;
  double moa_coef = 1.0;
  double policy_coef = 1.0;
  // Stop the policy-head gradient at the normalised partner prediction.
  bool detach_moa_prediction = false;
};

template <typename S>
struct LossTargets {
  std::vector<int> action;  // ego action per row
  Vec<S> old_logp;
  Vec<S> advantage;
  Vec<S> value_target;
};

struct LossBreakdown {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double moa = 0.0;
  double approx_kl = 0.0;
  double clip_frac = 0.0;
};

class LossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loss value and, when grad is non-null, exact reverse-mode gradients
// (same layout as params.values, overwritten). Throws LossError when the
// loss is not finite.
template <typename S>
LossBreakdown loss_and_grad(const Params<S>& params, const SequenceBatch<S>& batch,
                            const LossTargets<S>& targets, const LossSpec& spec,
                            std::vector<S>* grad);

// Row-wise log-softmax helper shared by rollout and training code.
template <typename S>
Mat<S> log_softmax(const Mat<S>& logits);

}  // namespace upd::nn
