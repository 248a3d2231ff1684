#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "upd/trainer/train.hpp"

namespace upd::eval {

class DiagnosticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-update partner statistics read back from metrics.jsonl.
struct CurriculumRow {
  int update = 0;
  std::int64_t step = 0;
  std::array<double, 10> eps_share{};  // fraction of partners per epsilon decile
  std::array<double, env::kNumActions> mask_mean{};
};

std::vector<CurriculumRow> read_curriculum(const std::filesystem::path& metrics_jsonl);
std::vector<CurriculumRow> parse_curriculum(const std::string& jsonl);
std::string eps_decile_table(const std::vector<CurriculumRow>& rows);
std::string mask_mean_table(const std::vector<CurriculumRow>& rows);

struct ScatterPoint {
  std::uint64_t id = 0;
  double epsilon = 0.0;
  double score = 0.0;
  double mean_return = 0.0;  // sparse, deliveries only
};

// Scores `n_partners` fresh partners against `params` with the run's
// config (n_rollouts episodes each). Scores use the training reward.
std::vector<ScatterPoint> learnability_scatter(const trainer::TrainConfig& cfg,
                                               const nn::PolicyParams& params, int n_partners,
                                               std::uint64_t seed);
std::string scatter_table(const std::vector<ScatterPoint>& pts);

// Fraction of points whose mean return is below `fraction` of the largest
// observed mean return (zero when every return is zero counts as all low).
double low_return_share(const std::vector<ScatterPoint>& pts, double fraction);

}  // namespace upd::eval
