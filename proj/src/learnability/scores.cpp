#include "upd/learnability/scores.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace upd::learnability {

namespace {

void require(std::span<const double> r, std::size_t n, const char* what) {
  if (r.size() < n) throw ScoreError(std::string(what) + ": too few returns");
  for (double v : r)
    if (!std::isfinite(v)) throw ScoreError(std::string(what) + ": non-finite return");
}

double mean_of(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v;
  return s / static_cast<double>(r.size());
}

double pvar(std::span<const double> r) {
  const double m = mean_of(r);
  double s = 0.0;
  for (double v : r) s += (v - m) * (v - m);
  return s / static_cast<double>(r.size());
}

}  // namespace

ScoreKind parse_score_kind(const std::string& name) {
  if (name == "var") return ScoreKind::Var;
  if (name == "mean") return ScoreKind::Mean;
  if (name == "adaptive_sr") return ScoreKind::AdaptiveSr;
  if (name == "gauss") return ScoreKind::Gauss;
  if (name == "cv2") return ScoreKind::Cv2;
  if (name == "sr") return ScoreKind::Sr;
  throw ScoreError("unknown score function: " + name);
}

std::string score_name(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::Var: return "var";
    case ScoreKind::Mean: return "mean";
    case ScoreKind::AdaptiveSr: return "adaptive_sr";
    case ScoreKind::Gauss: return "gauss";
    case ScoreKind::Cv2: return "cv2";
    case ScoreKind::Sr: return "sr";
  }
  return "?";
}

double score_var(std::span<const double> r) {
  require(r, 2, "score_var");
  return pvar(r);
}

double score_mean(std::span<const double> r) {
  require(r, 1, "score_mean");
  return mean_of(r);
}

double score_adaptive_sr(std::span<const double> r) {
  require(r, 2, "score_adaptive_sr");
  std::vector<double> s(r.begin(), r.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  const double median = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  const auto above = std::count_if(s.begin(), s.end(), [&](double v) { return v > median; });
  const double p = static_cast<double>(above) / static_cast<double>(n);
  return p * (1.0 - p);
}

double score_gauss(std::span<const double> r, double mu, double sigma) {
  require(r, 2, "score_gauss");
  const double sc = std::sqrt(pvar(r));
  if (!(sigma > 0.0)) return sc;
  const double z = (mean_of(r) - mu) / sigma;
  return sc * std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double score_cv2(std::span<const double> r) {
  require(r, 2, "score_cv2");
  const double m = mean_of(r);
  if (m < 1e-6) return 0.0;
  return pvar(r) / (m * m);
}

double score_sr(const std::vector<bool>& successes) {
  if (successes.empty()) throw ScoreError("score_sr: no rollouts");
  const double p = static_cast<double>(std::count(successes.begin(), successes.end(), true)) /
                   static_cast<double>(successes.size());
  return p * (1.0 - p);
}

PopulationStats population_stats(const std::vector<std::vector<double>>& candidates) {
  if (candidates.empty()) return {};
  std::vector<double> means;
  means.reserve(candidates.size());
  for (const auto& c : candidates) {
    require(c, 1, "population_stats");
    means.push_back(mean_of(c));
  }
  return {mean_of(means), std::sqrt(pvar(means))};
}

double score(ScoreKind kind, std::span<const double> returns,
             const std::optional<PopulationStats>& population, double success_threshold) {
  switch (kind) {
    case ScoreKind::Var: return score_var(returns);
    case ScoreKind::Mean: return score_mean(returns);
    case ScoreKind::AdaptiveSr: return score_adaptive_sr(returns);
    case ScoreKind::Gauss: {
      const PopulationStats p = population.value_or(PopulationStats{});
      return score_gauss(returns, p.mean, p.std);
    }
    case ScoreKind::Cv2: return score_cv2(returns);
    case ScoreKind::Sr: {
      require(returns, 1, "score_sr");
      std::vector<bool> ok;
      for (double v : returns) ok.push_back(v >= success_threshold);
      return score_sr(ok);
    }
  }
  throw ScoreError("unknown score kind");
}

}  // namespace upd::learnability
