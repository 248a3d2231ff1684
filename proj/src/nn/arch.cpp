#include "upd/nn/arch.hpp"

#include <algorithm>

namespace upd::nn {

void ArchConfig::validate() const {
  if (embed_layers < 0 || hidden < 1 || actor_layers < 1 || critic_layers < 1 ||
      gru_hidden < 1 || moa_layers < 1 || moa_hidden < 1 || history_len < 1 ||
      action_embed < 1) {
    throw ShapeError("architecture dimensions must be positive");
  }
}

ArchConfig desk_arch() {
  ArchConfig a;
  a.hidden = 64;
  a.gru_hidden = 64;
  a.action_embed = 64;
  return a;
}

ParamLayout::ParamLayout(const ArchConfig& arch, int obs_len, int n_actions)
    : arch_(arch), obs_len_(obs_len), n_actions_(n_actions) {
  arch.validate();
  if (obs_len < 1 || n_actions < 2) throw ShapeError("bad input/output size");

  for (int l = 0; l <= arch.embed_layers; ++l) {
    const std::string p = "enc." + std::to_string(l);
    add_linear(p, arch.hidden, l == 0 ? obs_len : arch.hidden);
    if (arch.layernorm) {
      add(p + ".ln_g", arch.hidden, 1);
      add(p + ".ln_b", arch.hidden, 1);
    }
  }

  const int g = arch.gru_hidden;
  add("gru.w_ih", 3 * g, arch.hidden);
  add("gru.b_ih", 3 * g, 1);
  add("gru.w_hh", 3 * g, g);
  add("gru.b_hh", 3 * g, 1);

  add_linear("moa.obs", arch.moa_hidden, obs_len);
  add_linear("moa.act", arch.action_embed, n_actions);
  for (int l = 0; l < arch.moa_layers; ++l) {
    add_linear("moa." + std::to_string(l), arch.moa_hidden,
               l == 0 ? moa_input() : arch.moa_hidden);
  }
  add_linear("moa.out", n_actions, arch.moa_hidden);

  for (int l = 0; l < arch.actor_layers; ++l) {
    add_linear("actor." + std::to_string(l), arch.hidden,
               l == 0 ? g + n_actions : arch.hidden);
  }
  add_linear("actor.out", n_actions, arch.hidden);

  for (int l = 0; l < arch.critic_layers; ++l) {
    add_linear("critic." + std::to_string(l), arch.hidden,
               l == 0 ? g : arch.hidden);
  }
  add_linear("critic.out", 1, arch.hidden);
}

void ParamLayout::add(std::string name, int rows, int cols) {
  Segment s{std::move(name), total_, rows, cols};
  total_ += s.size();
  segments_.push_back(std::move(s));
}

void ParamLayout::add_linear(const std::string& prefix, int out, int in) {
  add(prefix + ".w", out, in);
  add(prefix + ".b", out, 1);
}

std::size_t ParamLayout::index_of(const std::string& name) const {
  auto it = std::find_if(segments_.begin(), segments_.end(),
                         [&](const Segment& s) { return s.name == name; });
  if (it == segments_.end()) throw ShapeError("no parameter segment " + name);
  return static_cast<std::size_t>(it - segments_.begin());
}

const Segment& ParamLayout::segment(const std::string& name) const {
  return segments_[index_of(name)];
}

}  // namespace upd::nn
