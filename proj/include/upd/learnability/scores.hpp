#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace upd::learnability {

class ScoreError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ScoreKind { Var, Mean, AdaptiveSr, Gauss, Cv2, Sr };

ScoreKind parse_score_kind(const std::string& name);  // "var", "mean", ...
std::string score_name(ScoreKind kind);

// Population variance (divides by N). Needs N >= 2.
double score_var(std::span<const double> returns);
double score_mean(std::span<const double> returns);
// p (1 - p) with p the fraction of returns strictly above the median.
double score_adaptive_sr(std::span<const double> returns);
// sigma_c * N(mu_c | mu, sigma^2) for the candidate's mean and std; falls
// back to sigma_c alone when sigma <= 0.
double score_gauss(std::span<const double> returns, double mu, double sigma);
// Variance over squared mean; 0 when the mean is below 1e-6.
double score_cv2(std::span<const double> returns);
double score_sr(const std::vector<bool>& successes);

struct PopulationStats {
  double mean = 0.0;
  double std = 0.0;
};

// Mean and population std of the per-candidate mean returns.
PopulationStats population_stats(const std::vector<std::vector<double>>& candidate_returns);

// Dispatch on kind. Gauss needs population stats; Sr counts a rollout as a
// success when its return reaches success_threshold.
double score(ScoreKind kind, std::span<const double> returns,
             const std::optional<PopulationStats>& population = std::nullopt,
             double success_threshold = 20.0);

}  // namespace upd::learnability
