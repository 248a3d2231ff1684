#include "upd/partner/partner.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace upd::partner {

namespace {

void check_simplex(std::span<const double> p, const char* what) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw PartnerError(std::string(what) + " has a negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw PartnerError(std::string(what) + " does not sum to 1");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void PartnerGenConfig::validate() const {
  if (!(p_bias >= 0.0 && p_bias <= 1.0)) throw PartnerError("p_bias must lie in [0, 1]");
  if (!(alpha > 0.0)) throw PartnerError("alpha must be positive");
  if (n_actions < 1) throw PartnerError("n_actions must be positive");
  if (fixed_epsilon && !(*fixed_epsilon >= 0.0 && *fixed_epsilon <= 1.0))
    throw PartnerError("fixed epsilon must lie in [0, 1]");
}

void PartnerSpec::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw PartnerError("epsilon must lie in [0, 1]");
  if (mask.empty()) throw PartnerError("empty mask");
  check_simplex(mask, "mask");
}

std::vector<double> uniform_mask(int n_actions) {
  return std::vector<double>(static_cast<std::size_t>(n_actions), 1.0 / n_actions);
}

PartnerSpec sample_partner_spec(Rng& rng, const PartnerGenConfig& cfg, std::uint64_t id) {
  cfg.validate();
  PartnerSpec s;
  s.id = id;
  s.epsilon = cfg.fixed_epsilon ? *cfg.fixed_epsilon : rng.uniform();
  if (rng.bernoulli(cfg.p_bias)) {
    // Dirichlet(alpha * 1) as normalised Gamma(alpha, 1) draws.
    std::gamma_distribution<double> gamma(cfg.alpha, 1.0);
    s.mask.resize(static_cast<std::size_t>(cfg.n_actions));
    double total = 0.0;
    do {
      total = 0.0;
      for (double& m : s.mask) total += (m = gamma(rng.engine()));
    } while (total <= 0.0);
    for (double& m : s.mask) m /= total;
  } else {
    s.mask = uniform_mask(cfg.n_actions);
  }
  return s;
}

std::vector<double> biased_random_dist(std::span<const double> mask) {
  check_simplex(mask, "mask");
  return {mask.begin(), mask.end()};
}

std::vector<double> mix_dist(double epsilon, std::span<const double> mask,
                             std::span<const double> ego) {
  if (mask.size() != ego.size()) throw PartnerError("mask and ego distribution differ in size");
  std::vector<double> out(mask.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = epsilon * mask[i] + (1.0 - epsilon) * ego[i];
  return out;
}

std::vector<double> softmax(std::span<const float> logits) {
  double m = -INFINITY;
  for (float l : logits) m = std::max(m, static_cast<double>(l));
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp(logits[i] - m));
  for (double& v : p) v /= z;
  return p;
}

PartnerStep partner_action_dist(const PartnerSpec& spec, const nn::PolicyParams& ego,
                                std::span<const float> obs, const nn::HiddenState& hidden) {
  if (static_cast<int>(spec.mask.size()) != ego.layout->n_actions())
    throw PartnerError("mask size does not match the ego policy");
  nn::ForwardResult f = nn::forward(ego, obs, hidden);
  const std::vector<double> ego_dist = softmax(f.logits);
  return {mix_dist(spec.epsilon, biased_random_dist(spec.mask), ego_dist), std::move(f.hidden)};
}

std::string to_record(const PartnerSpec& spec) {
  std::string out = "id=" + std::to_string(spec.id) + " eps=" + fmt(spec.epsilon) + " mask=";
  for (std::size_t i = 0; i < spec.mask.size(); ++i) {
    if (i) out += ',';
    out += fmt(spec.mask[i]);
  }
  out += " ego=" + (spec.ego_hash.empty() ? std::string("-") : spec.ego_hash);
  return out;
}

PartnerSpec from_record(const std::string& line) {
  PartnerSpec s;
  std::istringstream in(line);
  std::string tok;
  bool have_id = false, have_eps = false, have_mask = false;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw PartnerError("bad partner record field: " + tok);
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    try {
      if (key == "id") {
        s.id = std::stoull(val);
        have_id = true;
      } else if (key == "eps") {
        s.epsilon = std::stod(val);
        have_eps = true;
      } else if (key == "mask") {
        std::istringstream ms(val);
        std::string part;
        while (std::getline(ms, part, ',')) s.mask.push_back(std::stod(part));
        have_mask = true;
      } else if (key == "ego") {
        s.ego_hash = val == "-" ? "" : val;
      } else {
        throw PartnerError("unknown partner record field: " + key);
      }
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const PartnerError*>(&e)) throw;
      throw PartnerError("bad value in partner record: " + tok);
    }
  }
  if (!have_id || !have_eps || !have_mask) throw PartnerError("incomplete partner record");
  s.validate();
  return s;
}

}  // namespace upd::partner
