#include "upd/nn/network.hpp"

#include <cmath>

namespace upd::nn {

namespace {

constexpr double kLnEps = 1e-5;

template <typename S>
void activate(Mat<S>& z, Activation a) {
  if (a == Activation::Tanh) {
    z = z.array().tanh().matrix();
  } else {
    z = z.cwiseMax(S(0));
  }
}

template <typename S>
void activate_backward(Mat<S>& d, const Mat<S>& out, Activation a) {
  if (a == Activation::Tanh) {
    d.array() *= S(1) - out.array().square();
  } else {
    d.array() *= (out.array() > S(0)).template cast<S>();
  }
}

template <typename S>
Mat<S> sigmoid(const Mat<S>& x) {
  return (S(1) / (S(1) + (-x.array()).exp())).matrix();
}

template <typename S>
Mat<S> linear(const Params<S>& p, const std::string& prefix, const Mat<S>& x) {
  Mat<S> y = x * p.matrix(prefix + ".w").transpose();
  y.rowwise() += p.row(prefix + ".b");
  return y;
}

template <typename S>
struct Grad {
  const ParamLayout& layout;
  ParamVector<S>& g;

  Eigen::Map<Mat<S>> matrix(const std::string& name) {
    const Segment& s = layout.segment(name);
    return {g.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<RowVec<S>> row(const std::string& name) {
    const Segment& s = layout.segment(name);
    return {g.data() + s.offset, static_cast<Eigen::Index>(s.size())};
  }
};

template <typename S>
void linear_backward(const Params<S>& p, Grad<S>& g, const std::string& prefix,
                     const Mat<S>& x, const Mat<S>& dy, Mat<S>* dx) {
  g.matrix(prefix + ".w").noalias() += dy.transpose() * x;
  g.row(prefix + ".b") += dy.colwise().sum();
  if (dx) *dx = dy * p.matrix(prefix + ".w");
}

// ---- encoder -------------------------------------------------------------

template <typename S>
struct EncoderCache {
  std::vector<Mat<S>> out;
  std::vector<Mat<S>> zhat;
  std::vector<Vec<S>> rstd;
};

template <typename S>
Mat<S> encoder_forward(const Params<S>& p, const Mat<S>& x, EncoderCache<S>* cache) {
  const ArchConfig& arch = p.layout->arch();
  Mat<S> a;
  for (int l = 0; l <= arch.embed_layers; ++l) {
    const std::string pre = "enc." + std::to_string(l);
    Mat<S> z = linear(p, pre, l == 0 ? x : a);
    if (arch.layernorm) {
      const Vec<S> mu = z.rowwise().mean();
      z.colwise() -= mu;
      const Vec<S> rstd =
          (z.array().square().rowwise().mean() + S(kLnEps)).rsqrt().matrix();
      z = rstd.asDiagonal() * z;
      if (cache) {
        cache->zhat.push_back(z);
        cache->rstd.push_back(rstd);
      }
      z.array().rowwise() *= p.row(pre + ".ln_g").array();
      z.rowwise() += p.row(pre + ".ln_b");
    }
    activate(z, arch.activation);
    a = std::move(z);
    if (cache) cache->out.push_back(a);
  }
  return a;
}

template <typename S>
void encoder_backward(const Params<S>& p, Grad<S>& g, const Mat<S>& x,
                      const EncoderCache<S>& c, Mat<S> d) {
  const ArchConfig& arch = p.layout->arch();
  for (int l = arch.embed_layers; l >= 0; --l) {
    const std::string pre = "enc." + std::to_string(l);
    activate_backward(d, c.out[l], arch.activation);
    if (arch.layernorm) {
      const Mat<S>& zh = c.zhat[l];
      g.row(pre + ".ln_g") += (d.array() * zh.array()).colwise().sum().matrix();
      g.row(pre + ".ln_b") += d.colwise().sum();
      Mat<S> dzh = (d.array().rowwise() * p.row(pre + ".ln_g").array()).matrix();
      const Vec<S> m1 = dzh.rowwise().mean();
      const Vec<S> m2 = (dzh.array() * zh.array()).rowwise().mean().matrix();
      dzh.colwise() -= m1;
      dzh -= (zh.array().colwise() * m2.array()).matrix();
      d = c.rstd[l].asDiagonal() * dzh;
    }
    Mat<S> dx;
    linear_backward(p, g, pre, l == 0 ? x : c.out[l - 1], d, l > 0 ? &dx : nullptr);
    d = std::move(dx);
  }
}

// ---- plain MLP stacks (moa, actor, critic) -----------------------------

template <typename S>
Mat<S> mlp_forward(const Params<S>& p, const std::string& prefix, int layers,
                   const Mat<S>& x, std::vector<Mat<S>>* outs) {
  const Activation act = p.layout->arch().activation;
  Mat<S> a;
  for (int l = 0; l < layers; ++l) {
    Mat<S> z = linear(p, prefix + "." + std::to_string(l), l == 0 ? x : a);
    activate(z, act);
    a = std::move(z);
    if (outs) outs->push_back(a);
  }
  return a;
}

template <typename S>
Mat<S> mlp_backward(const Params<S>& p, Grad<S>& g, const std::string& prefix,
                    int layers, const Mat<S>& x, const std::vector<Mat<S>>& outs,
                    Mat<S> d) {
  const Activation act = p.layout->arch().activation;
  for (int l = layers - 1; l >= 0; --l) {
    activate_backward(d, outs[l], act);
    Mat<S> dx;
    linear_backward(p, g, prefix + "." + std::to_string(l), l == 0 ? x : outs[l - 1],
                    d, &dx);
    d = std::move(dx);
  }
  return d;
}

// ---- GRU -----------------------------------------------------------------

template <typename S>
struct GruStep {
  Mat<S> r, z, n, ghn, h;
};

// PyTorch gate order (reset, update, candidate):
//   r = s(Wir x + bir + Whr h + bhr)
//   z = s(Wiz x + biz + Whz h + bhz)
//   n = tanh(Win x + bin + r * (Whn h + bhn))
//   h' = (1 - z) * n + z * h
template <typename S>
void gru_step(const Params<S>& p, const Eigen::Ref<const Mat<S>>& gi,
              const Mat<S>& h_prev, GruStep<S>& out) {
  const Eigen::Index g = p.layout->arch().gru_hidden;
  Mat<S> gh = h_prev * p.matrix("gru.w_hh").transpose();
  gh.rowwise() += p.row("gru.b_hh");
  out.r = sigmoid<S>(gi.leftCols(g) + gh.leftCols(g));
  out.z = sigmoid<S>(gi.middleCols(g, g) + gh.middleCols(g, g));
  out.ghn = gh.rightCols(g);
  out.n = (gi.rightCols(g).array() + out.r.array() * out.ghn.array()).tanh().matrix();
  out.h = ((S(1) - out.z.array()) * out.n.array() + out.z.array() * h_prev.array())
              .matrix();
}

// ---- partner modelling ---------------------------------------------------

int slot_width(const ParamLayout& l) {
  return l.arch().moa_hidden + l.arch().action_embed;
}

// Embedded (observation, action) pair per row; rows with action < 0 are zero.
template <typename S>
Mat<S> partner_embedding(const Params<S>& p, const Mat<S>& obs,
                         std::span<const int> action, Mat<S>* pe_out, Mat<S>* ae_out) {
  const ParamLayout& l = *p.layout;
  const Activation act = l.arch().activation;
  const Eigen::Index rows = obs.rows();
  Mat<S> pe = linear(p, "moa.obs", obs);
  activate(pe, act);
  const auto w = p.matrix("moa.act.w");
  const auto b = p.row("moa.act.b");
  Mat<S> ae(rows, l.arch().action_embed);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const int a = action[static_cast<std::size_t>(i)];
    if (a >= l.n_actions()) throw ShapeError("partner action out of range");
    if (a >= 0) ae.row(i) = w.col(a).transpose() + b;
    else ae.row(i).setZero();
  }
  activate(ae, act);
  Mat<S> out(rows, slot_width(l));
  out << pe, ae;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (action[static_cast<std::size_t>(i)] < 0) out.row(i).setZero();
  }
  if (pe_out) *pe_out = std::move(pe);
  if (ae_out) *ae_out = std::move(ae);
  return out;
}

// ---- heads ---------------------------------------------------------------

template <typename S>
struct HeadCache {
  std::vector<Mat<S>> moa_outs;
  Mat<S> q;      // softmax of moa logits
  Vec<S> qnorm;  // row L2 norms of q
  Mat<S> actor_in;
  std::vector<Mat<S>> actor_outs;
  std::vector<Mat<S>> critic_outs;
};

template <typename S>
void heads_forward(const Params<S>& p, const Mat<S>& h, const Mat<S>& moa_in,
                   HeadCache<S>* c, Mat<S>& logits, Vec<S>& value, Mat<S>& moa_logits) {
  const ArchConfig& arch = p.layout->arch();
  const Mat<S> moa_h = mlp_forward(p, "moa", arch.moa_layers, moa_in,
                                   c ? &c->moa_outs : nullptr);
  moa_logits = linear(p, "moa.out", moa_h);

  Mat<S> q = (moa_logits.colwise() - moa_logits.rowwise().maxCoeff()).array().exp().matrix();
  q = q.array().colwise() / q.rowwise().sum().array();
  const Vec<S> qnorm = q.rowwise().norm();

  Mat<S> actor_in(h.rows(), h.cols() + q.cols());
  actor_in << h, qnorm.asDiagonal().inverse() * q;
  const Mat<S> actor_h = mlp_forward(p, "actor", arch.actor_layers, actor_in,
                                     c ? &c->actor_outs : nullptr);
  logits = linear(p, "actor.out", actor_h);

  const Mat<S> critic_h = mlp_forward(p, "critic", arch.critic_layers, h,
                                      c ? &c->critic_outs : nullptr);
  value = linear(p, "critic.out", critic_h).col(0);

  if (c) {
    c->q = std::move(q);
    c->qnorm = qnorm;
    c->actor_in = std::move(actor_in);
  }
}

// ---- sequence forward with caches ----------------------------------------

template <typename S>
struct SeqCache {
  EncoderCache<S> enc;
  Mat<S> enc_out;
  Mat<S> h_prev, r, z, n, ghn, h;
  Mat<S> pe, ae, moa_in;
  std::vector<int> src;  // source row per (row, slot), -1 when empty
  HeadCache<S> heads;
  SequenceOutput<S> out;
};

template <typename S>
void check_batch(const ParamLayout& l, const SequenceBatch<S>& b) {
  const auto n = static_cast<Eigen::Index>(b.rows());
  if (b.T < 1 || b.B < 1) throw ShapeError("empty sequence batch");
  if (b.obs.rows() != n || b.obs.cols() != l.obs_len())
    throw ShapeError("observation batch has wrong shape");
  if (b.partner_obs.rows() != n || b.partner_obs.cols() != l.obs_len())
    throw ShapeError("partner observation batch has wrong shape");
  if (b.partner_action.size() != static_cast<std::size_t>(n) ||
      b.episode_start.size() != static_cast<std::size_t>(n))
    throw ShapeError("per-row vectors have wrong length");
}

template <typename S>
void run_sequence(const Params<S>& p, const SequenceBatch<S>& batch, SeqCache<S>& c,
                  bool keep) {
  const ParamLayout& l = *p.layout;
  check_batch(l, batch);
  const ArchConfig& arch = l.arch();
  const int T = batch.T, B = batch.B, N = batch.rows();
  const int G = arch.gru_hidden;

  c.enc_out = encoder_forward(p, batch.obs, keep ? &c.enc : nullptr);

  Mat<S> gi = c.enc_out * p.matrix("gru.w_ih").transpose();
  gi.rowwise() += p.row("gru.b_ih");
  c.h.resize(N, G);
  if (keep) {
    c.h_prev.resize(N, G);
    c.r.resize(N, G);
    c.z.resize(N, G);
    c.n.resize(N, G);
    c.ghn.resize(N, G);
  }
  Mat<S> h_prev = Mat<S>::Zero(B, G);
  GruStep<S> st;
  for (int t = 0; t < T; ++t) {
    for (int b = 0; b < B; ++b) {
      if (t == 0 || batch.episode_start[static_cast<std::size_t>(t * B + b)])
        h_prev.row(b).setZero();
    }
    gru_step<S>(p, gi.middleRows(t * B, B), h_prev, st);
    c.h.middleRows(t * B, B) = st.h;
    if (keep) {
      c.h_prev.middleRows(t * B, B) = h_prev;
      c.r.middleRows(t * B, B) = st.r;
      c.z.middleRows(t * B, B) = st.z;
      c.n.middleRows(t * B, B) = st.n;
      c.ghn.middleRows(t * B, B) = st.ghn;
    }
    h_prev = st.h;
  }

  // Partner history: slot s of row (t, b) holds step t - 1 - s of the same
  // episode.
  const int L = arch.history_len;
  const int W = slot_width(l);
  const Mat<S> emb = partner_embedding(p, batch.partner_obs, batch.partner_action,
                                       keep ? &c.pe : nullptr, keep ? &c.ae : nullptr);
  c.moa_in = Mat<S>::Zero(N, static_cast<Eigen::Index>(L) * W);
  c.src.assign(static_cast<std::size_t>(N) * L, -1);
  std::vector<int> start(static_cast<std::size_t>(B), 0);
  for (int t = 0; t < T; ++t) {
    for (int b = 0; b < B; ++b) {
      const int row = t * B + b;
      if (batch.episode_start[static_cast<std::size_t>(row)]) start[b] = t;
      for (int s = 0; s < L; ++s) {
        const int ts = t - 1 - s;
        if (ts < start[b]) break;
        const int from = ts * B + b;
        c.moa_in.block(row, static_cast<Eigen::Index>(s) * W, 1, W) = emb.row(from);
        c.src[static_cast<std::size_t>(row) * L + s] = from;
      }
    }
  }

  heads_forward(p, c.h, c.moa_in, keep ? &c.heads : nullptr, c.out.logits, c.out.value,
                c.out.moa_logits);
}

}  // namespace

// ---- HiddenBatch ---------------------------------------------------------

template <typename S>
HiddenBatch<S>::HiddenBatch(const ParamLayout& layout, int rows)
    : h(Mat<S>::Zero(rows, layout.arch().gru_hidden)),
      history(Mat<S>::Zero(rows, layout.moa_input())) {}

template <typename S>
void HiddenBatch<S>::reset_row(int row) {
  h.row(row).setZero();
  history.row(row).setZero();
}

template <typename S>
void HiddenBatch<S>::reset_all() {
  h.setZero();
  history.setZero();
}

template <typename S>
void HiddenBatch<S>::push_partner(const Params<S>& params, const Mat<S>& partner_obs,
                                  std::span<const int> partner_action) {
  if (partner_obs.rows() != h.rows() ||
      partner_action.size() != static_cast<std::size_t>(h.rows()))
    throw ShapeError("partner batch does not match hidden batch");
  const Mat<S> emb = partner_embedding<S>(params, partner_obs, partner_action, nullptr, nullptr);
  const Eigen::Index w = emb.cols();
  const Eigen::Index keep = history.cols() - w;
  if (keep > 0) history.rightCols(keep) = history.leftCols(keep).eval();
  history.leftCols(w) = emb;
}

// ---- HiddenState ---------------------------------------------------------

HiddenState HiddenState::zeros(const ParamLayout& layout) {
  HiddenState s;
  s.gru_h.assign(static_cast<std::size_t>(layout.arch().gru_hidden), 0.0f);
  return s;
}

void HiddenState::push_partner(std::vector<float> obs, int action, int history_len) {
  partner_history.push_front({std::move(obs), action});
  while (static_cast<int>(partner_history.size()) > history_len)
    partner_history.pop_back();
}

// ---- public forward API --------------------------------------------------

template <typename S>
StepOutput<S> forward_step(const Params<S>& p, const Mat<S>& obs, HiddenBatch<S>& hidden) {
  const ParamLayout& l = *p.layout;
  if (obs.cols() != l.obs_len() || obs.rows() != hidden.rows() ||
      hidden.h.cols() != l.arch().gru_hidden || hidden.history.cols() != l.moa_input())
    throw ShapeError("forward_step: dimension mismatch");
  const Mat<S> e = encoder_forward<S>(p, obs, nullptr);
  Mat<S> gi = e * p.matrix("gru.w_ih").transpose();
  gi.rowwise() += p.row("gru.b_ih");
  GruStep<S> st;
  gru_step<S>(p, gi, hidden.h, st);
  hidden.h = std::move(st.h);
  StepOutput<S> out;
  heads_forward<S>(p, hidden.h, hidden.history, nullptr, out.logits, out.value,
                   out.moa_logits);
  return out;
}

ForwardResult forward(const Params<float>& p, std::span<const float> obs,
                      const HiddenState& hidden) {
  const ParamLayout& l = *p.layout;
  if (static_cast<int>(obs.size()) != l.obs_len())
    throw ShapeError("forward: observation length mismatch");
  HiddenBatch<float> hb(l, 1);
  if (!hidden.gru_h.empty()) {
    if (static_cast<int>(hidden.gru_h.size()) != l.arch().gru_hidden)
      throw ShapeError("forward: hidden size mismatch");
    hb.h.row(0) = Eigen::Map<const RowVec<float>>(hidden.gru_h.data(), l.arch().gru_hidden);
  }
  const int w = slot_width(l);
  int slot = 0;
  for (const HiddenState::Entry& e : hidden.partner_history) {
    if (slot >= l.arch().history_len) break;
    if (static_cast<int>(e.obs.size()) != l.obs_len())
      throw ShapeError("forward: partner observation length mismatch");
    const Mat<float> po = Eigen::Map<const Mat<float>>(e.obs.data(), 1, l.obs_len());
    const int a = e.action;
    hb.history.block(0, static_cast<Eigen::Index>(slot) * w, 1, w) =
        partner_embedding<float>(p, po, std::span<const int>(&a, 1), nullptr, nullptr);
    ++slot;
  }
  const Mat<float> o = Eigen::Map<const Mat<float>>(obs.data(), 1, l.obs_len());
  const StepOutput<float> s = forward_step<float>(p, o, hb);

  ForwardResult r;
  r.logits.assign(s.logits.data(), s.logits.data() + s.logits.size());
  r.value = s.value(0);
  r.moa_logits.assign(s.moa_logits.data(), s.moa_logits.data() + s.moa_logits.size());
  r.hidden = hidden;
  r.hidden.gru_h.assign(hb.h.data(), hb.h.data() + hb.h.size());
  return r;
}

template <typename S>
SequenceOutput<S> forward_sequence(const Params<S>& p, const SequenceBatch<S>& batch) {
  SeqCache<S> c;
  run_sequence(p, batch, c, false);
  return std::move(c.out);
}

template <typename S>
Mat<S> log_softmax(const Mat<S>& logits) {
  Mat<S> z = logits.colwise() - logits.rowwise().maxCoeff();
  const Vec<S> lse = z.array().exp().rowwise().sum().log().matrix();
  z.colwise() -= lse;
  return z;
}

// ---- loss and gradient ---------------------------------------------------

template <typename S>
LossBreakdown loss_and_grad(const Params<S>& p, const SequenceBatch<S>& batch,
                            const LossTargets<S>& tg, const LossSpec& spec,
                            std::vector<S>* grad) {
  const ParamLayout& l = *p.layout;
  const ArchConfig& arch = l.arch();
  const int N = batch.rows();
  const int A = l.n_actions();
  const int G = arch.gru_hidden;
  if (tg.action.size() != static_cast<std::size_t>(N) || tg.old_logp.size() != N ||
      tg.advantage.size() != N || tg.value_target.size() != N)
    throw ShapeError("loss targets do not match batch");

  SeqCache<S> c;
  run_sequence(p, batch, c, grad != nullptr);
  const Mat<S>& logits = c.out.logits;
  const Vec<S>& value = c.out.value;

  const Mat<S> logp = log_softmax(logits);
  const Mat<S> prob = logp.array().exp().matrix();
  const Mat<S> moa_logp = log_softmax(c.out.moa_logits);

  const S inv_n = S(1) / S(N);
  Mat<S> dlogits(N, A);
  Mat<S> dvalue(N, 1);
  Mat<S> dmoa(N, A);
  double pol = 0, vl = 0, ent = 0, ce = 0, kl = 0, clipped = 0;
  for (int i = 0; i < N; ++i) {
    const int a = tg.action[static_cast<std::size_t>(i)];
    const int pa = batch.partner_action[static_cast<std::size_t>(i)];
    if (a < 0 || a >= A || pa < 0 || pa >= A) throw ShapeError("action out of range");
    const S log_ratio = logp(i, a) - tg.old_logp(i);
    const S ratio = std::exp(log_ratio);
    const S adv = tg.advantage(i);
    const S s1 = ratio * adv;
    const S s2 = std::clamp(ratio, S(1 - spec.clip), S(1 + spec.clip)) * adv;
    pol -= static_cast<double>(std::min(s1, s2));
    kl += static_cast<double>((ratio - S(1)) - log_ratio);
    clipped += std::abs(static_cast<double>(ratio) - 1.0) > spec.clip;
    const S dlpa = s1 <= s2 ? -S(spec.policy_coef) * ratio * adv * inv_n : S(0);

    S h = 0;
    for (int j = 0; j < A; ++j) h -= prob(i, j) * logp(i, j);
    ent += static_cast<double>(h);
    for (int j = 0; j < A; ++j) {
      dlogits(i, j) = dlpa * ((j == a ? S(1) : S(0)) - prob(i, j)) +
                      S(spec.ent_coef) * inv_n * prob(i, j) * (logp(i, j) + h);
    }

    const S dv = value(i) - tg.value_target(i);
    vl += static_cast<double>(dv * dv);
    dvalue(i, 0) = S(2 * spec.vf_coef) * dv * inv_n;

    ce -= static_cast<double>(moa_logp(i, pa));
    for (int j = 0; j < A; ++j) {
      dmoa(i, j) = S(spec.moa_coef) * inv_n *
                   (c.heads.q.size() ? c.heads.q(i, j) : std::exp(moa_logp(i, j)));
    }
    dmoa(i, pa) -= S(spec.moa_coef) * inv_n;
  }

  LossBreakdown out;
  out.policy = pol / N;
  out.value = vl / N;
  out.entropy = ent / N;
  out.moa = ce / N;
  out.approx_kl = kl / N;
  out.clip_frac = clipped / N;
  out.total = spec.policy_coef * out.policy + spec.vf_coef * out.value -
              spec.ent_coef * out.entropy + spec.moa_coef * out.moa;
  if (!std::isfinite(out.total)) throw LossError("loss is not finite");
  if (!grad) return out;

  ParamVector<S> buf(l.total(), S(0));
  Grad<S> g{l, buf};
  const HeadCache<S>& hc = c.heads;

  // Actor.
  Mat<S> d;
  linear_backward(p, g, "actor.out", hc.actor_outs.back(), dlogits, &d);
  const Mat<S> dactor_in =
      mlp_backward(p, g, "actor", arch.actor_layers, hc.actor_in, hc.actor_outs, d);
  Mat<S> dh = dactor_in.leftCols(G);

  // Critic.
  linear_backward(p, g, "critic.out", hc.critic_outs.back(), dvalue, &d);
  dh += mlp_backward(p, g, "critic", arch.critic_layers, c.h, hc.critic_outs, d);

  // Partner model: the L2-normalised prediction feeds the actor.
  if (!spec.detach_moa_prediction) {
    const Mat<S> du = dactor_in.rightCols(A);
    const Mat<S> u = hc.qnorm.asDiagonal().inverse() * hc.q;
    const Vec<S> udu = (u.array() * du.array()).rowwise().sum().matrix();
    Mat<S> dq = du - udu.asDiagonal() * u;
    dq = hc.qnorm.asDiagonal().inverse() * dq;
    const Vec<S> qdq = (hc.q.array() * dq.array()).rowwise().sum().matrix();
    dq.colwise() -= qdq;
    dmoa.array() += hc.q.array() * dq.array();
  }
  linear_backward(p, g, "moa.out", hc.moa_outs.back(), dmoa, &d);
  const Mat<S> dmoa_in =
      mlp_backward(p, g, "moa", arch.moa_layers, c.moa_in, hc.moa_outs, d);
  const int L = arch.history_len;
  const int M = arch.moa_hidden;
  const int W = slot_width(l);
  Mat<S> dpe = Mat<S>::Zero(N, M);
  Mat<S> dae = Mat<S>::Zero(N, arch.action_embed);
  for (int i = 0; i < N; ++i) {
    for (int s = 0; s < L; ++s) {
      const int from = c.src[static_cast<std::size_t>(i) * L + s];
      if (from < 0) break;
      dpe.row(from) += dmoa_in.block(i, static_cast<Eigen::Index>(s) * W, 1, M);
      dae.row(from) +=
          dmoa_in.block(i, static_cast<Eigen::Index>(s) * W + M, 1, arch.action_embed);
    }
  }
  activate_backward(dpe, c.pe, arch.activation);
  linear_backward<S>(p, g, "moa.obs", batch.partner_obs, dpe, nullptr);
  activate_backward(dae, c.ae, arch.activation);
  {
    auto gw = g.matrix("moa.act.w");
    for (int i = 0; i < N; ++i)
      gw.col(batch.partner_action[static_cast<std::size_t>(i)]) += dae.row(i).transpose();
    g.row("moa.act.b") += dae.colwise().sum();
  }

  // GRU, backwards through time.
  const int T = batch.T, B = batch.B;
  Mat<S> dgi(N, 3 * G);
  Mat<S> carry = Mat<S>::Zero(B, G);
  const auto w_hh = p.matrix("gru.w_hh");
  auto gw_hh = g.matrix("gru.w_hh");
  auto gb_hh = g.row("gru.b_hh");
  for (int t = T - 1; t >= 0; --t) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(t) * B;
    const Mat<S> dht = dh.middleRows(r0, B) + carry;
    const auto r = c.r.middleRows(r0, B).array();
    const auto z = c.z.middleRows(r0, B).array();
    const auto n = c.n.middleRows(r0, B).array();
    const auto ghn = c.ghn.middleRows(r0, B).array();
    const auto hp = c.h_prev.middleRows(r0, B).array();

    const Mat<S> dan = (dht.array() * (S(1) - z) * (S(1) - n.square())).matrix();
    const Mat<S> daz = (dht.array() * (hp - n) * z * (S(1) - z)).matrix();
    const Mat<S> dar = (dan.array() * ghn * r * (S(1) - r)).matrix();
    Mat<S> dgh(B, 3 * G);
    dgh << dar, daz, (dan.array() * r).matrix();
    dgi.middleRows(r0, B) << dar, daz, dan;

    gw_hh.noalias() += dgh.transpose() * c.h_prev.middleRows(r0, B);
    gb_hh += dgh.colwise().sum();
    carry = (dht.array() * z).matrix() + dgh * w_hh;
    for (int b = 0; b < B; ++b) {
      if (t == 0 || batch.episode_start[static_cast<std::size_t>(r0 + b)])
        carry.row(b).setZero();
    }
  }
  g.matrix("gru.w_ih").noalias() += dgi.transpose() * c.enc_out;
  g.row("gru.b_ih") += dgi.colwise().sum();
  Mat<S> denc = dgi * p.matrix("gru.w_ih");

  encoder_backward(p, g, batch.obs, c.enc, std::move(denc));
  grad->assign(buf.begin(), buf.end());
  return out;
}

#define UPD_INSTANTIATE(S)                                                            \
  template class HiddenBatch<S>;                                                      \
  template StepOutput<S> forward_step<S>(const Params<S>&, const Mat<S>&,             \
                                         HiddenBatch<S>&);                            \
  template SequenceOutput<S> forward_sequence<S>(const Params<S>&,                    \
                                                 const SequenceBatch<S>&);            \
  template LossBreakdown loss_and_grad<S>(const Params<S>&, const SequenceBatch<S>&,  \
                                          const LossTargets<S>&, const LossSpec&,     \
                                          std::vector<S>*);                           \
  template Mat<S> log_softmax<S>(const Mat<S>&);

UPD_INSTANTIATE(float)
UPD_INSTANTIATE(double)

#undef UPD_INSTANTIATE

}  // namespace upd::nn
