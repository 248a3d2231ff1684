#include <charconv>
#include "upd/trainer/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#ifndef UPD_DEFAULT_LAYOUT_DIR
#define UPD_DEFAULT_LAYOUT_DIR "layouts"
#endif

namespace upd::trainer {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

long long to_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("expected a number for " + key + ", got '" + v + "'");
  }
  if (pos != v.size() || d != static_cast<double>(static_cast<long long>(d)))
    throw ConfigError("expected an integer for " + key + ", got '" + v + "'");
  return static_cast<long long>(d);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("expected a number for " + key + ", got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("trailing characters in " + key + " value '" + v + "'");
  return d;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("expected a boolean for " + key + ", got '" + v + "'");
}

struct Field {
  std::string key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
};

#define UPD_INT(name, expr)                                                            \
  Field {                                                                              \
    name, [](const TrainConfig& c) { return std::to_string(c.expr); },                 \
        [](TrainConfig& c, const std::string& k, const std::string& v) {               \
          c.expr = static_cast<decltype(c.expr)>(to_int(k, v));                        \
        }                                                                              \
  }
#define UPD_DBL(name, expr)                                                            \
  Field {                                                                              \
    name, [](const TrainConfig& c) { return fmt_double(c.expr); },                     \
        [](TrainConfig& c, const std::string& k, const std::string& v) {               \
          c.expr = to_double(k, v);                                                    \
        }                                                                              \
  }
#define UPD_BOOL(name, expr)                                                           \
  Field {                                                                              \
    name, [](const TrainConfig& c) { return std::string(c.expr ? "true" : "false"); }, \
        [](TrainConfig& c, const std::string& k, const std::string& v) {               \
          c.expr = to_bool(k, v);                                                      \
        }                                                                              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      Field{"mode", [](const TrainConfig& c) { return mode_name(c.mode); },
            [](TrainConfig& c, const std::string&, const std::string& v) { c.mode = parse_mode(v); }},
      Field{"layout", [](const TrainConfig& c) { return c.layout; },
            [](TrainConfig& c, const std::string&, const std::string& v) { c.layout = v; }},
      UPD_INT("seed", seed),
      UPD_INT("n_envs", n_envs),
      UPD_INT("total_steps", total_steps),
      UPD_INT("shaping_horizon", shaping_horizon),
      UPD_DBL("lr", lr),
      UPD_BOOL("anneal_lr", anneal_lr),
      UPD_INT("rollout_len", rollout_len),
      UPD_INT("horizon", horizon),
      UPD_INT("ppo_epochs", ppo_epochs),
      UPD_INT("minibatches", minibatches),
      UPD_DBL("gamma", gamma),
      UPD_DBL("gae_lambda", gae_lambda),
      UPD_DBL("clip", clip),
      UPD_DBL("entropy_coef", entropy_coef),
      UPD_DBL("vf_coef", vf_coef),
      UPD_DBL("grad_clip", grad_clip),
      UPD_DBL("moa_coef", moa_coef),
      UPD_BOOL("detach_moa", detach_moa),
      UPD_DBL("epsilon", epsilon),
      UPD_INT("canvas_width", canvas_width),
      UPD_INT("canvas_height", canvas_height),
      UPD_INT("checkpoint_every", checkpoint_every),
      UPD_INT("arch.embed_layers", arch.embed_layers),
      UPD_INT("arch.hidden", arch.hidden),
      UPD_INT("arch.actor_layers", arch.actor_layers),
      UPD_INT("arch.critic_layers", arch.critic_layers),
      UPD_INT("arch.gru_hidden", arch.gru_hidden),
      Field{"arch.activation",
            [](const TrainConfig& c) {
              return std::string(c.arch.activation == nn::Activation::Tanh ? "tanh" : "relu");
            },
            [](TrainConfig& c, const std::string& k, const std::string& v) {
              if (v == "tanh") c.arch.activation = nn::Activation::Tanh;
              else if (v == "relu") c.arch.activation = nn::Activation::Relu;
              else throw ConfigError("expected tanh or relu for " + k);
            }},
      UPD_BOOL("arch.layernorm", arch.layernorm),
      UPD_INT("arch.moa_layers", arch.moa_layers),
      UPD_INT("arch.moa_hidden", arch.moa_hidden),
      UPD_INT("arch.history_len", arch.history_len),
      UPD_INT("arch.action_embed", arch.action_embed),
      UPD_INT("upd.n_generated", upd.n_generated),
      UPD_INT("upd.buffer", upd.buffer),
      UPD_INT("upd.top_k", upd.top_k),
      UPD_INT("upd.n_rollouts", upd.n_rollouts),
      UPD_INT("upd.refresh", upd.refresh),
      UPD_DBL("upd.alpha", upd.alpha),
      UPD_DBL("upd.p_bias", upd.p_bias),
      UPD_BOOL("upd.scoring", upd.scoring),
      UPD_BOOL("upd.bias", upd.bias),
      Field{"upd.fixed_epsilon",
            [](const TrainConfig& c) {
              return c.upd.fixed_epsilon ? fmt_double(*c.upd.fixed_epsilon) : std::string("none");
            },
            [](TrainConfig& c, const std::string& k, const std::string& v) {
              if (v == "none") c.upd.fixed_epsilon.reset();
              else c.upd.fixed_epsilon = to_double(k, v);
            }},
      Field{"upd.score", [](const TrainConfig& c) { return learnability::score_name(c.upd.score); },
            [](TrainConfig& c, const std::string& k, const std::string& v) {
              try {
                c.upd.score = learnability::parse_score_kind(v);
              } catch (const learnability::ScoreError&) {
                throw ConfigError("unknown score function for " + k + ": " + v);
              }
            }},
      Field{"upd.joint_score",
            [](const TrainConfig& c) { return learnability::score_name(c.upd.joint_score); },
            [](TrainConfig& c, const std::string& k, const std::string& v) {
              try {
                c.upd.joint_score = learnability::parse_score_kind(v);
              } catch (const learnability::ScoreError&) {
                throw ConfigError("unknown score function for " + k + ": " + v);
              }
            }},
      UPD_INT("levelgen.width", levelgen.width),
      UPD_INT("levelgen.height", levelgen.height),
      UPD_INT("levelgen.min_wall_budget", levelgen.min_wall_budget),
      UPD_INT("levelgen.max_wall_budget", levelgen.max_wall_budget),
      UPD_DBL("levelgen.p_dividing_wall", levelgen.p_dividing_wall),
      UPD_DBL("levelgen.p_side_narrowing", levelgen.p_side_narrowing),
  };
  return f;
}

#undef UPD_INT
#undef UPD_DBL
#undef UPD_BOOL

}  // namespace

Mode parse_mode(const std::string& s) {
  std::string k;
  for (char ch : s) k += ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (k == "SP") return Mode::SP;
  if (k == "E3T_FIXED" || k == "E3T") return Mode::E3T_FIXED;
  if (k == "UPD") return Mode::UPD;
  if (k == "DR_DR") return Mode::DR_DR;
  if (k == "CEC") return Mode::CEC;
  if (k == "SFL_E3T") return Mode::SFL_E3T;
  if (k == "JUPD") return Mode::JUPD;
  throw ConfigError("unknown mode: " + s);
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::SP: return "sp";
    case Mode::E3T_FIXED: return "e3t_fixed";
    case Mode::UPD: return "upd";
    case Mode::DR_DR: return "dr_dr";
    case Mode::CEC: return "cec";
    case Mode::SFL_E3T: return "sfl_e3t";
    case Mode::JUPD: return "jupd";
  }
  return "?";
}

int TrainConfig::num_updates() const {
  return static_cast<int>((total_steps + steps_per_update() - 1) / steps_per_update());
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (n_envs < 1 || total_steps < 1 || rollout_len < 1 || horizon < 1 || ppo_epochs < 1 ||
      minibatches < 1)
    fail("n_envs, total_steps, rollout_len, horizon, ppo_epochs and minibatches must be positive");
  if (shaping_horizon < 0 || shaping_horizon > total_steps)
    fail("shaping_horizon must lie in [0, total_steps]");
  if (rollout_len != horizon)
    fail("rollout_len must equal the episode horizon (rollouts are whole episodes)");
  if (!(lr > 0)) fail("lr must be positive");
  if (!(gamma >= 0 && gamma <= 1) || !(gae_lambda >= 0 && gae_lambda <= 1))
    fail("gamma and gae_lambda must lie in [0, 1]");
  if (!(clip >= 0) || !(entropy_coef >= 0) || !(vf_coef >= 0) || !(grad_clip > 0) ||
      !(moa_coef >= 0))
    fail("loss coefficients must be nonnegative and grad_clip positive");
  if (!(epsilon >= 0 && epsilon <= 1)) fail("epsilon must lie in [0, 1]");
  if (canvas_width < 0 || canvas_height < 0) fail("canvas size must be nonnegative");
  if (checkpoint_every < 0) fail("checkpoint_every must be nonnegative");
  const int sequences = mode == Mode::SP || mode == Mode::CEC ? 2 * n_envs : n_envs;
  if (minibatches > sequences) fail("more minibatches than sequences per update");
  if (mode != Mode::SP && mode != Mode::CEC && n_envs % 2 != 0)
    fail("n_envs must be even so the ego fills both seats equally");
  try {
    arch.validate();
  } catch (const nn::ShapeError& e) {
    fail(e.what());
  }
  if (upd.n_generated < 1 || upd.buffer < 1 || upd.top_k < 1 || upd.n_rollouts < 1 ||
      upd.refresh < 1)
    fail("curriculum sizes must be positive");
  if (!(upd.alpha > 0)) fail("upd.alpha must be positive");
  if (!(upd.p_bias >= 0 && upd.p_bias <= 1)) fail("upd.p_bias must lie in [0, 1]");
  if (upd.fixed_epsilon && !(*upd.fixed_epsilon >= 0 && *upd.fixed_epsilon <= 1))
    fail("upd.fixed_epsilon must lie in [0, 1]");
  const bool variance_score = upd.score != learnability::ScoreKind::Mean &&
                              upd.score != learnability::ScoreKind::Sr;
  if (variance_score && upd.n_rollouts < 2) fail("variance-based scores need upd.n_rollouts >= 2");
  try {
    levelgen.validate();
  } catch (const levelgen::LevelGenError& e) {
    fail(e.what());
  }
}

TrainConfig desk_config() {
  TrainConfig c;
  c.n_envs = 64;
  c.total_steps = 3'000'000;
  c.shaping_horizon = 2'000'000;
  c.arch = nn::desk_arch();
  c.upd.n_generated = 64;
  c.upd.buffer = 16;
  c.upd.top_k = 16;
  return c;
}

void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key: " + key);
}

void apply_override(TrainConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  apply_setting(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_override(base, line);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_config_file(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string config_to_text(const TrainConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

std::filesystem::path layout_dir() {
  if (const char* env = std::getenv("UPD_LAYOUT_DIR")) return env;
  return UPD_DEFAULT_LAYOUT_DIR;
}

env::LevelPtr resolve_layout(const std::string& name) {
  std::filesystem::path p = name;
  if (!std::filesystem::exists(p)) p = layout_dir() / (name + ".layout");
  if (!std::filesystem::exists(p)) throw ConfigError("unknown layout: " + name);
  return std::make_shared<const env::GridLevel>(env::load_layout_file(p.string()));
}

}  // namespace upd::trainer
