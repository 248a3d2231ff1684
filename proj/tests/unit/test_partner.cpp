#include <doctest.h>

#include <cmath>
#include <random>

#include "support/stats.hpp"
#include "upd/partner/partner.hpp"

using namespace upd;
using namespace upd::partner;

namespace {

std::vector<double> random_simplex(std::mt19937_64& rng, int n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(static_cast<std::size_t>(n));
  double s = 0;
  for (double& x : v) s += (x = e(rng));
  for (double& x : v) x /= s;
  return v;
}

double tv(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return 0.5 * d;
}

nn::ArchConfig small_arch() {
  nn::ArchConfig a;
  a.embed_layers = 1;
  a.hidden = 16;
  a.gru_hidden = 16;
  a.actor_layers = 1;
  a.critic_layers = 1;
  a.moa_layers = 1;
  a.moa_hidden = 8;
  a.action_embed = 8;
  a.history_len = 2;
  return a;
}

}  // namespace

TEST_CASE("epsilon is uniform and Dirichlet masks are symmetric") {
  Rng rng(1);
  PartnerGenConfig cfg;
  cfg.p_bias = 1.0;
  const int n = 100000;
  std::vector<double> eps;
  std::vector<double> mean(6, 0.0);
  for (int i = 0; i < n; ++i) {
    const PartnerSpec s = sample_partner_spec(rng, cfg, static_cast<std::uint64_t>(i));
    eps.push_back(s.epsilon);
    REQUIRE_NOTHROW(s.validate());
    for (int a = 0; a < 6; ++a) mean[a] += s.mask[a] / n;
  }
  CHECK(testing::ks_uniform_pvalue(eps) > 0.01);
  for (double m : mean) CHECK(std::abs(m - 1.0 / 6.0) < 0.01);
}

TEST_CASE("masks are uniform without bias and mixed with p_bias in between") {
  Rng rng(2);
  PartnerGenConfig cfg;
  cfg.p_bias = 0.0;
  for (int i = 0; i < 1000; ++i) CHECK(sample_partner_spec(rng, cfg, 0).mask == uniform_mask(6));

  cfg.p_bias = 0.5;
  int biased = 0;
  for (int i = 0; i < 4000; ++i) biased += sample_partner_spec(rng, cfg, 0).mask != uniform_mask(6);
  CHECK(std::abs(biased / 4000.0 - 0.5) < 0.04);

  cfg.fixed_epsilon = 0.25;
  for (int i = 0; i < 100; ++i) CHECK(sample_partner_spec(rng, cfg, 0).epsilon == 0.25);

  cfg = {};
  cfg.alpha = 0;
  CHECK_THROWS_AS(sample_partner_spec(rng, cfg, 0), PartnerError);
  cfg = {};
  cfg.p_bias = 1.5;
  CHECK_THROWS_AS(sample_partner_spec(rng, cfg, 0), PartnerError);
}

TEST_CASE("biased random policy returns its mask") {
  CHECK(biased_random_dist(uniform_mask(6)) == uniform_mask(6));
  const std::vector<double> stay{0, 0, 0, 0, 0, 1};
  CHECK(biased_random_dist(stay) == stay);
  const std::vector<double> m{.4, .1, .1, .1, .2, .1};
  CHECK(biased_random_dist(m) == m);
  CHECK_THROWS_AS(biased_random_dist(std::vector<double>{0.5, 0.6}), PartnerError);
  CHECK_THROWS_AS(biased_random_dist(std::vector<double>{1.5, -0.5}), PartnerError);
}

TEST_CASE("mixture matches the coordinate-wise formula") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double e = u(rng);
    const auto mask = random_simplex(rng, 6);
    const auto ego = random_simplex(rng, 6);
    const auto mix = mix_dist(e, mask, ego);
    double sum = 0;
    for (int a = 0; a < 6; ++a) {
      const long double expect = static_cast<long double>(e) * mask[a] +
                                 (1.0L - static_cast<long double>(e)) * ego[a];
      REQUIRE(std::abs(static_cast<long double>(mix[a]) - expect) < 1e-12L);
      REQUIRE(mix[a] >= 0.0);
      sum += mix[a];
    }
    REQUIRE(std::abs(sum - 1.0) < 1e-9);
    CHECK(mix_dist(0.0, mask, ego) == ego);
    CHECK(mix_dist(1.0, mask, ego) == mask);
  }
  const auto half = mix_dist(0.5, uniform_mask(6), std::vector<double>{.5, .5, 0, 0, 0, 0});
  CHECK(half[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(half[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  for (int a = 2; a < 6; ++a) CHECK(half[a] == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
}

TEST_CASE("distance from the ego grows with epsilon") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto mask = random_simplex(rng, 6);
    const auto ego = random_simplex(rng, 6);
    double prev = -1;
    for (int k = 0; k <= 20; ++k) {
      const double d = tv(mix_dist(k / 20.0, mask, ego), ego);
      CHECK(d >= prev - 1e-15);
      prev = d;
    }
  }
}

TEST_CASE("partner follows the live ego unless epsilon is one") {
  const int obs_len = 20;
  nn::PolicyParams ego = nn::init_params(1, small_arch(), obs_len, 6);
  // Larger output weights so the ego distribution is clearly non-uniform.
  for (float& v : ego.values) v *= 3.0f;
  nn::PolicyParams changed = ego;
  for (float& v : changed.values) v = -v;
  std::vector<float> obs(obs_len);
  for (int i = 0; i < obs_len; ++i) obs[i] = 0.05f * i;
  const nn::HiddenState h0 = nn::HiddenState::zeros(*ego.layout);

  PartnerSpec s;
  s.mask = {.4, .1, .1, .1, .2, .1};
  for (double e : {0.0, 0.3, 0.99}) {
    s.epsilon = e;
    const auto a = partner_action_dist(s, ego, obs, h0).dist;
    const auto b = partner_action_dist(s, changed, obs, h0).dist;
    CHECK(tv(a, b) > 1e-6);
  }
  s.epsilon = 1.0;
  CHECK(partner_action_dist(s, ego, obs, h0).dist == partner_action_dist(s, changed, obs, h0).dist);
  CHECK(partner_action_dist(s, ego, obs, h0).dist == s.mask);

  s.epsilon = 0.0;
  const PartnerStep step = partner_action_dist(s, ego, obs, h0);
  const auto direct = softmax(nn::forward(ego, obs, h0).logits);
  CHECK(step.dist == direct);
  CHECK(step.hidden.gru_h != h0.gru_h);
}

TEST_CASE("partner records round-trip") {
  Rng rng(5);
  PartnerGenConfig cfg;
  cfg.p_bias = 1.0;
  for (int i = 0; i < 100; ++i) {
    PartnerSpec s = sample_partner_spec(rng, cfg, static_cast<std::uint64_t>(i));
    if (i % 2) s.ego_hash = "0123456789abcdef";
    CHECK(from_record(to_record(s)) == s);
  }
  CHECK_THROWS_AS(from_record("id=1 eps=0.5"), PartnerError);
  CHECK_THROWS_AS(from_record("id=1 eps=2 mask=1"), PartnerError);
  CHECK_THROWS_AS(from_record("id=x eps=0.5 mask=1"), PartnerError);
  CHECK_THROWS_AS(from_record("id=1 eps=0.5 mask=1 color=red"), PartnerError);
}
